#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <vector>

#include "retinasim/integrate.hpp"
#include "retinasim/transport.hpp"

namespace retinasim {

/// Dense nonsymmetric eigendecomposition of a transport operator, with
/// residual and conditioning checks. Rejects near-defective matrices (the
/// documented fallback there is Schur-based propagation).
struct SpectralData {
    Eigen::VectorXcd eigenvalues;
    Eigen::MatrixXcd right; // columns: right eigenvectors (P)
    Eigen::MatrixXcd left;  // rows: left eigenvectors (P^-1)
    double basis_condition = 0;
    bool stable = false;

    int dim() const { return int(eigenvalues.size()); }
};

inline SpectralData eigendecompose(const Eigen::MatrixXd& l, double residual_tol = 1e-8,
                                   double condition_max = 1e10) {
    if (!l.allFinite()) throw accuracy_error("transport operator has non-finite entries");
    Eigen::EigenSolver<Eigen::MatrixXd> es(l);
    if (es.info() != Eigen::Success)
        throw accuracy_error("eigendecomposition failed to converge");
    SpectralData sd;
    sd.eigenvalues = es.eigenvalues();
    sd.right = es.eigenvectors();

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sd.right);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    sd.basis_condition = smin > 0 ? svd.singularValues()(0) / smin :
                                    std::numeric_limits<double>::infinity();
    if (!(sd.basis_condition < condition_max))
        throw accuracy_error(
            "eigenvector basis is ill-conditioned (condition " +
            csv::format(sd.basis_condition) +
            "); the operator is near-defective, use Schur-based propagation instead");
    sd.left = sd.right.inverse();

    const double lnorm = std::max(l.norm(), 1.0);
    const double residual =
        (l.cast<std::complex<double>>() * sd.right - sd.right * sd.eigenvalues.asDiagonal())
            .norm() /
        lnorm;
    if (residual > residual_tol)
        throw accuracy_error("eigendecomposition residual " + csv::format(residual) +
                             " exceeds tolerance");
    sd.stable = (sd.eigenvalues.real().array() < 0).all();
    return sd;
}

inline SpectralData eigendecompose(const TransportOperator& op, double residual_tol = 1e-8,
                                   double condition_max = 1e10) {
    return eigendecompose(op.matrix, residual_tol, condition_max);
}

// --- exponential-mode convolution --------------------------------------------

namespace detail {
/// y(t_k) = int_0^{t_k} e^{lambda (t_k - s)} f(s) ds for the piecewise-linear
/// interpolant of the samples: closed-form panel integrals, exact per panel.
inline Eigen::VectorXcd conv_exp_sampled(std::complex<double> lambda,
                                         const Eigen::VectorXd& samples, double dt) {
    using cd = std::complex<double>;
    const int n = int(samples.size());
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
    const cd lh = lambda * dt;
    const cd e = std::exp(lh);
    cd i0, i1; // int_0^h e^{lambda (h-u)} du and ... * u du
    if (std::abs(lh) > 1e-4) {
        i0 = (e - 1.0) / lambda;
        i1 = (e - 1.0) / (lambda * lambda) - dt / lambda;
    } else {
        // series in lambda h to avoid cancellation
        i0 = dt * (1.0 + lh / 2.0 + lh * lh / 6.0 + lh * lh * lh / 24.0);
        i1 = dt * dt * (0.5 + lh / 6.0 + lh * lh / 24.0 + lh * lh * lh / 120.0);
    }
    for (int k = 1; k < n; ++k) {
        const double a = samples[k - 1];
        const double b = (samples[k] - samples[k - 1]) / dt;
        y[k] = e * y[k - 1] + a * i0 + b * i1;
    }
    return y;
}
} // namespace detail

// --- receptive fields --------------------------------------------------------

/// Sampled ganglion-cell kernel K_G(x, y, t) with its per-mode decomposition.
struct ReceptiveFieldKernel {
    Eigen::VectorXd xs_mm, ys_mm, times_ms;
    // space unfolded row-major over (y, x); one column per time sample
    Eigen::MatrixXd values;
    struct Mode {
        std::complex<double> lambda;
        std::complex<double> weight; // sum_gamma P_ab P^-1_bg C_bg at the cell
    };
    std::vector<Mode> modes;
    double imag_residue = 0;
};

/// The spectral receptive-field formula:
/// K_G(x,y,t) = sum_b sum_g P_ab P^-1_bg (lambda_b + 1/tau_Bg)
///              [e_b *_t K_Bg](x,y,t),  e_b(t) = e^{lambda_b t} H(t).
/// Requires a stable spectrum (the formula integrates over the infinite past).
inline ReceptiveFieldKernel rg_receptive_field(int cell_alpha, const SpectralData& sd,
                                               const std::vector<BipolarKernel>& kernels,
                                               const LayerLayout& lay,
                                               const Eigen::VectorXd& xs_mm,
                                               const Eigen::VectorXd& ys_mm, double horizon_ms,
                                               double dt_ms, const CellParameters& par,
                                               double imag_tol = 1e-10) {
    if (!sd.stable)
        throw regime_error("receptive-field formula requires a stable spectrum");
    const int nb = lay.n_b();
    if (cell_alpha < 0 || cell_alpha >= sd.dim())
        throw config_error("cell index out of range");
    const int nt = int(std::round(horizon_ms / dt_ms)) + 1;
    const int nx = int(xs_mm.size()), ny = int(ys_mm.size());

    // sampled temporal parts of the B kernels
    Eigen::MatrixXd ktemp(nb, nt);
    for (int g = 0; g < nb; ++g)
        for (int k = 0; k < nt; ++k)
            ktemp(g, k) = kernels[g].gain_mv * kernels[g].temporal(k * dt_ms);

    ReceptiveFieldKernel rf;
    rf.xs_mm = xs_mm;
    rf.ys_mm = ys_mm;
    rf.times_ms = Eigen::VectorXd::LinSpaced(nt, 0.0, (nt - 1) * dt_ms);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(nx * ny, nt);

    for (int b = 0; b < sd.dim(); ++b) {
        const std::complex<double> lam = sd.eigenvalues[b];
        std::complex<double> mode_weight = 0;
        for (int g = 0; g < nb; ++g) {
            const std::complex<double> coeff =
                sd.right(cell_alpha, b) * sd.left(b, g) * (lam + 1.0 / par.tau_b[g]);
            if (std::abs(coeff) < 1e-300) continue;
            mode_weight += coeff;
            const Eigen::VectorXcd tconv =
                detail::conv_exp_sampled(lam, ktemp.row(g).transpose(), dt_ms);
            auto [cx, cy] = lay.position_mm(Layer::B, g + 1);
            for (int iy = 0; iy < ny; ++iy)
                for (int ix = 0; ix < nx; ++ix) {
                    const double s = kernels[g].spatial(xs_mm[ix] - cx, ys_mm[iy] - cy);
                    if (s != 0.0) acc.row(iy * nx + ix) += (coeff * s) * tconv.transpose();
                }
        }
        rf.modes.push_back({lam, mode_weight});
    }
    rf.imag_residue = acc.imag().cwiseAbs().maxCoeff();
    const double scale = std::max(acc.real().cwiseAbs().maxCoeff(), 1.0);
    if (rf.imag_residue > imag_tol * scale)
        throw accuracy_error("assembled kernel has imaginary residue " +
                             csv::format(rf.imag_residue));
    rf.values = acc.real();
    return rf;
}

/// Network response predicted by the spectral formula, given the per-B-cell
/// drives: X_a(t) = V_drive,a(t) + sum_bg P_ab P^-1_bg C_bg [e_b * V_drive,g](t).
/// Rows cover every cell in the network; columns the drive sample grid.
inline Eigen::MatrixXd linear_response_trace(const SpectralData& sd, const DriveTrace& drive,
                                             const CellParameters& par,
                                             double imag_tol = 1e-8) {
    if (!sd.stable) throw regime_error("linear response requires a stable spectrum");
    const int n = sd.dim();
    const int nb = int(drive.drive.rows());
    const int nt = int(drive.drive.cols());
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, nt);
    for (int b = 0; b < n; ++b) {
        const std::complex<double> lam = sd.eigenvalues[b];
        for (int g = 0; g < nb; ++g) {
            const std::complex<double> inner = sd.left(b, g) * (lam + 1.0 / par.tau_b[g]);
            if (std::abs(inner) < 1e-300) continue;
            const Eigen::VectorXcd conv =
                detail::conv_exp_sampled(lam, drive.drive.row(g).transpose(), drive.dt_ms);
            for (int a = 0; a < n; ++a) {
                const std::complex<double> coeff = sd.right(a, b) * inner;
                if (std::abs(coeff) > 1e-300) acc.row(a) += coeff * conv.transpose();
            }
        }
    }
    const double scale = std::max(acc.real().cwiseAbs().maxCoeff(), 1.0);
    if (acc.imag().cwiseAbs().maxCoeff() > imag_tol * scale)
        throw accuracy_error("linear response trace has excessive imaginary residue");
    Eigen::MatrixXd out = acc.real();
    out.topRows(nb) += drive.drive;
    return out;
}

// --- impulse response --------------------------------------------------------

struct ImpulseResponse {
    Eigen::VectorXd times_ms;
    Eigen::VectorXd response; // deviation of the chosen component from rest
    std::size_t visit_count = 0;
};

/// Response of one cell to a brief full-field flash, via the full piecewise
/// integrator. The run is certified linear: if the pulse drives any cell
/// through a threshold the call fails with a linearity-violation error.
inline ImpulseResponse impulse_response(int cell_alpha, const LayerLayout& lay,
                                        const ConnectivityWeights& w,
                                        const CellParameters& par,
                                        const std::vector<BipolarKernel>& kernels,
                                        double amplitude, double pulse_ms, double horizon_ms,
                                        const IntegratorConfig& cfg, double pixel_mm = 0.05) {
    StimulusField flash = full_field_flash(amplitude, 0.0, pulse_ms);
    DriveTrace drive =
        compute_drive_traces(flash, kernels, lay, par, horizon_ms, cfg.dt_ms, pixel_mm);
    const int dim = par.gain_control ? lay.state_dim() + lay.n_b() : lay.state_dim();
    TransportOperator rest = assemble_transport(lay, w, par,
                                                DomainLabel::unpack(0, lay.n_b() + lay.n_a(),
                                                                    par.gain_control ? lay.n_b() : 0));
    const Eigen::VectorXd x_rest = fixed_point(rest, lay, par).state;
    Trajectory traj =
        integrate_piecewise(x_rest, lay, w, par, drive_forcing(drive, dim), horizon_ms, cfg);
    if (amplitude != 0.0 && traj.visits.size() > 1)
        throw regime_error("impulse amplitude " + csv::format(amplitude) +
                           " caused rectification (" + std::to_string(traj.visits.size()) +
                           " domain visits); reduce it to stay in the linear regime");
    ImpulseResponse ir;
    ir.visit_count = traj.visits.size();
    ir.times_ms.resize(traj.times.size());
    ir.response.resize(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        ir.times_ms[int(k)] = traj.times[k];
        ir.response[int(k)] = traj.states[k][cell_alpha] - x_rest[cell_alpha];
    }
    return ir;
}

// --- diagnostics -------------------------------------------------------------

/// sigma_2 / sigma_1 of the (space x time) unfolding; 0 means exactly
/// separable (rank 1).
inline double separability_index(const ReceptiveFieldKernel& rf) {
    if (rf.values.cwiseAbs().maxCoeff() == 0.0)
        throw accuracy_error("separability index undefined for an all-zero kernel");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rf.values);
    const auto& s = svd.singularValues();
    return s.size() > 1 ? s[1] / s[0] : 0.0;
}

struct ResonanceScan {
    Eigen::VectorXd freqs_per_ms;
    Eigen::VectorXd amplitudes;
    struct Peak {
        double freq_per_ms;
        double prominence;
    };
    std::vector<Peak> peaks;
};

/// Steady-state amplitude of cell alpha under sinusoidal forcing with spatial
/// pattern `probe`: |((i w I - L)^-1 probe)_alpha| per frequency, plus local
/// maxima with prominence at least 5% of the curve maximum.
inline ResonanceScan resonance_scan(int cell_alpha, const Eigen::MatrixXd& l,
                                    const Eigen::VectorXd& probe,
                                    const Eigen::VectorXd& freqs_per_ms) {
    SpectralData sd = eigendecompose(l);
    if (!sd.stable) throw regime_error("resonance scan requires a stable spectrum");
    ResonanceScan scan;
    scan.freqs_per_ms = freqs_per_ms;
    scan.amplitudes.resize(freqs_per_ms.size());
    const int n = int(l.rows());
    for (Eigen::Index k = 0; k < freqs_per_ms.size(); ++k) {
        const double omega = 2.0 * M_PI * freqs_per_ms[k];
        Eigen::MatrixXcd resolvent =
            std::complex<double>(0, omega) * Eigen::MatrixXcd::Identity(n, n) -
            l.cast<std::complex<double>>();
        const Eigen::VectorXcd x = resolvent.partialPivLu().solve(probe.cast<std::complex<double>>());
        scan.amplitudes[k] = std::abs(x[cell_alpha]);
    }
    const double prominence_floor = 0.05 * scan.amplitudes.maxCoeff();
    for (Eigen::Index k = 1; k + 1 < scan.amplitudes.size(); ++k) {
        if (scan.amplitudes[k] > scan.amplitudes[k - 1] &&
            scan.amplitudes[k] > scan.amplitudes[k + 1]) {
            const double prominence =
                scan.amplitudes[k] - std::min(scan.amplitudes[k - 1], scan.amplitudes[k + 1]);
            if (prominence >= prominence_floor)
                scan.peaks.push_back({scan.freqs_per_ms[k], prominence});
        }
    }
    return scan;
}

} // namespace retinasim
