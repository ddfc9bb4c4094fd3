#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <string>

#include "retinasim/csv.hpp"
#include "retinasim/errors.hpp"
#include "retinasim/layout.hpp"

namespace retinasim {

/// The four signed chemical-synapse blocks plus gap-junction blocks
/// (conductance over capacitance). Row index is the postsynaptic cell.
///   w_ab: A -> B, entries <= 0 (amacrine inhibition), N_B x N_A
///   w_ba: B -> A, entries >= 0,                       N_A x N_B
///   w_bg: B -> G, entries >= 0,                       N_G x N_B
///   w_ag: A -> G, entries <= 0,                       N_G x N_A
///   gamma_ab / gamma_ba: gap junctions, entries >= 0
struct ConnectivityWeights {
    Eigen::MatrixXd w_ab, w_ba, w_bg, w_ag;
    Eigen::MatrixXd gamma_ab, gamma_ba;

    static ConnectivityWeights zero(const LayerLayout& lay) {
        ConnectivityWeights w;
        w.w_ab = Eigen::MatrixXd::Zero(lay.n_b(), lay.n_a());
        w.w_ba = Eigen::MatrixXd::Zero(lay.n_a(), lay.n_b());
        w.w_bg = Eigen::MatrixXd::Zero(lay.n_g(), lay.n_b());
        w.w_ag = Eigen::MatrixXd::Zero(lay.n_g(), lay.n_a());
        w.gamma_ab = Eigen::MatrixXd::Zero(lay.n_b(), lay.n_a());
        w.gamma_ba = Eigen::MatrixXd::Zero(lay.n_a(), lay.n_b());
        return w;
    }

    void validate() const {
        check_sign(w_ab, false, "W_AB");
        check_sign(w_ba, true, "W_BA");
        check_sign(w_bg, true, "W_BG");
        check_sign(w_ag, false, "W_AG");
        check_sign(gamma_ab, true, "Gamma_AB");
        check_sign(gamma_ba, true, "Gamma_BA");
        if (gamma_ab.rows() != gamma_ba.cols() || gamma_ab.cols() != gamma_ba.rows())
            throw config_error("gap-junction blocks have inconsistent dimensions");
    }

private:
    static void check_sign(const Eigen::MatrixXd& m, bool nonneg, const char* name) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double v = m(r, c);
                if ((nonneg && v < 0) || (!nonneg && v > 0))
                    throw config_error(std::string(name) + " sign violation at (" +
                                       std::to_string(r) + "," + std::to_string(c) +
                                       "): " + csv::format(v));
            }
    }
};

/// Per-cell scalar parameters. Time constants in ms, thresholds in mV.
/// Effective time constants fold in the gap-junction conductance:
/// 1/tau' = 1/tau + sum of gap terms, so gap junctions only shorten them.
struct CellParameters {
    Eigen::VectorXd tau_b, tau_a, tau_g; // per cell
    double theta_b = 0.0, theta_a = 0.0;
    // LNP stage
    double theta_g = 0.0, sigma_g = 1.0;
    // gain control
    bool gain_control = false;
    double tau_act = 100.0, h_b = 0.0, theta_act = 2.0 / 3.0;
    // noise intensities
    double sigma_s = 0.0, sigma_b = 0.0;

    static CellParameters uniform(const LayerLayout& lay, double tb, double ta, double tg) {
        CellParameters p;
        p.tau_b = Eigen::VectorXd::Constant(lay.n_b(), tb);
        p.tau_a = Eigen::VectorXd::Constant(lay.n_a(), ta);
        p.tau_g = Eigen::VectorXd::Constant(lay.n_g(), tg);
        return p;
    }

    void validate() const {
        auto pos = [](const Eigen::VectorXd& v, const char* name) {
            if ((v.array() <= 0).any())
                throw config_error(std::string(name) + " must be strictly positive");
        };
        pos(tau_b, "tau_B");
        pos(tau_a, "tau_A");
        pos(tau_g, "tau_G");
        if (!(sigma_g > 0)) throw config_error("sigma_G must be > 0");
        if (gain_control && !(tau_act > 0)) throw config_error("tau_a must be > 0");
    }

    /// Effective inverse time constants for B cells: 1/tau_B + row sums of
    /// Gamma_AB. Never smaller than 1/tau_B.
    Eigen::VectorXd inv_tau_b_eff(const ConnectivityWeights& w) const {
        return tau_b.cwiseInverse() + w.gamma_ab.rowwise().sum();
    }
    Eigen::VectorXd inv_tau_a_eff(const ConnectivityWeights& w) const {
        return tau_a.cwiseInverse() + w.gamma_ba.rowwise().sum();
    }
};

// --- Connectivity profiles ---------------------------------------------------

/// One-to-one pooling: each target cell takes a single weight from the source
/// cell with the same flat index. Requires matching layer sizes.
inline Eigen::MatrixXd one_to_one_profile(int n_post, int n_pre, double weight) {
    if (n_post != n_pre)
        throw config_error("one-to-one profile needs equal layer sizes, got " +
                           std::to_string(n_post) + " vs " + std::to_string(n_pre));
    return weight * Eigen::MatrixXd::Identity(n_post, n_pre);
}

/// Gaussian lateral fall-off: entry (i,j) = w0 * exp(-d_ij^2 / (2 r^2)),
/// truncated to zero beyond 3r. Distances between cell centres in mm.
inline Eigen::MatrixXd gaussian_profile(const LayerLayout& lay, Layer post, Layer pre,
                                        double w0, double radius_mm) {
    if (!(radius_mm > 0)) throw config_error("gaussian profile radius must be > 0");
    const int np = lay.cell_count(post), nq = lay.cell_count(pre);
    Eigen::MatrixXd m(np, nq);
    for (int i = 1; i <= np; ++i) {
        auto [xi, yi] = lay.position_mm(post, i);
        for (int j = 1; j <= nq; ++j) {
            auto [xj, yj] = lay.position_mm(pre, j);
            const double d2 = (xi - xj) * (xi - xj) + (yi - yj) * (yi - yj);
            m(i - 1, j - 1) =
                d2 > 9.0 * radius_mm * radius_mm ? 0.0 : w0 * std::exp(-d2 / (2.0 * radius_mm * radius_mm));
        }
    }
    return m;
}

/// Dense matrix loaded from a CSV file, validated against the expected shape.
inline Eigen::MatrixXd matrix_file_profile(const std::filesystem::path& path,
                                           int rows, int cols) {
    Eigen::MatrixXd m = csv::read_matrix(path);
    if (m.rows() != rows || m.cols() != cols)
        throw config_error("matrix file " + path.string() + " has shape " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                           ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    return m;
}

} // namespace retinasim
