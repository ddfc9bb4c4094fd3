#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "retinasim/csv.hpp"
#include "retinasim/errors.hpp"
#include "retinasim/integrate.hpp"
#include "retinasim/spectral.hpp"

namespace retinasim {

/// Write-to-temporary-then-rename so readers never observe a partial file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw io_error("cannot open for writing: " + tmp.string());
        out << text;
        if (!out) throw io_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("rename failed for " + path.string() + ": " + ec.message());
}

inline void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

/// times in the first column, one state component per further column.
inline std::string trajectory_csv(const Eigen::VectorXd& times, const Eigen::MatrixXd& states) {
    if (times.size() != states.cols())
        throw io_error("trajectory export: time/state length mismatch");
    std::ostringstream out;
    out << "t_ms";
    for (Eigen::Index r = 0; r < states.rows(); ++r) out << ",x" << r;
    out << "\n";
    for (Eigen::Index c = 0; c < states.cols(); ++c) {
        out << csv::format(times[c]);
        for (Eigen::Index r = 0; r < states.rows(); ++r) out << "," << csv::format(states(r, c));
        out << "\n";
    }
    return out.str();
}

/// Sparse spike triples, one row per emitted spike.
inline std::string raster_csv(const SpikeRaster& raster) {
    std::ostringstream out;
    out << "trial,neuron,bin\n";
    for (int tr = 0; tr < raster.n_trials; ++tr)
        for (int n = 0; n < raster.n_neurons; ++n)
            for (int b = 0; b < raster.n_bins; ++b)
                if (raster.at(tr, n, b)) out << tr << "," << n << "," << b << "\n";
    return out.str();
}

/// Space-time kernel as (x_mm, y_mm, t_ms, value) rows.
inline std::string kernel_csv(const ReceptiveFieldKernel& rf) {
    std::ostringstream out;
    out << "x_mm,y_mm,t_ms,value\n";
    const int nx = int(rf.xs_mm.size());
    const int ns = nx * int(rf.ys_mm.size());
    for (int s = 0; s < ns; ++s) {
        const int ix = s % nx;
        const int iy = s / nx;
        for (int k = 0; k < rf.times_ms.size(); ++k)
            out << csv::format(rf.xs_mm[ix]) << "," << csv::format(rf.ys_mm[iy]) << ","
                << csv::format(rf.times_ms[k]) << "," << csv::format(rf.values(iy * nx + ix, k))
                << "\n";
    }
    return out.str();
}

inline std::string lag_series_csv(const Eigen::VectorXd& lags, const Eigen::VectorXd& values,
                                  const Eigen::VectorXd* errors = nullptr,
                                  const char* value_name = "value") {
    std::ostringstream out;
    out << "lag_ms," << value_name;
    if (errors) out << ",se";
    out << "\n";
    for (Eigen::Index k = 0; k < lags.size(); ++k) {
        out << csv::format(lags[k]) << "," << csv::format(values[k]);
        if (errors) out << "," << csv::format((*errors)[k]);
        out << "\n";
    }
    return out.str();
}

} // namespace retinasim
