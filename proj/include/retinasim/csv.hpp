#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "retinasim/errors.hpp"

namespace retinasim::csv {

// All numeric output goes through this formatter: 17 significant digits so
// that doubles round-trip exactly through the text formats.
inline std::string format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Dense matrix file: header row "rows,cols", then row-major values, one row
// per line.
inline void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << m.rows() << "," << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ",";
            out << format(m(r, c));
        }
        out << "\n";
    }
    if (!out) throw io_error("write failed: " + path.string());
}

inline Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty matrix file: " + path.string());
    Eigen::Index rows = 0, cols = 0;
    {
        std::istringstream hdr(line);
        char comma;
        if (!(hdr >> rows >> comma >> cols) || comma != ',' || rows <= 0 || cols <= 0)
            throw io_error("bad matrix header in " + path.string() + ": '" + line + "'");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (!std::getline(in, line))
            throw io_error("truncated matrix file: " + path.string());
        std::istringstream row(line);
        std::string cell;
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!std::getline(row, cell, ','))
                throw io_error("short row " + std::to_string(r) + " in " + path.string());
            try {
                m(r, c) = std::stod(cell);
            } catch (const std::exception&) {
                throw io_error("bad value at (" + std::to_string(r) + "," + std::to_string(c) +
                               ") in " + path.string());
            }
        }
    }
    return m;
}

} // namespace retinasim::csv
