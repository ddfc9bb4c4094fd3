#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "retinasim/integrate.hpp"
#include "retinasim/spectral.hpp"
#include "retinasim/stimulus.hpp"

namespace retinasim {

// --- input (drive) correlations ----------------------------------------------

/// Overlap integral of two spatial kernel profiles centred at different cells,
/// by midpoint quadrature over the union of truncated supports.
inline double spatial_overlap(const BipolarKernel& ki, double xi, double yi,
                              const BipolarKernel& kj, double xj, double yj,
                              double pixel_mm) {
    const double ri = ki.spatial.truncation_radius_mm();
    const double rj = kj.spatial.truncation_radius_mm();
    const double x_lo = std::max(xi - ri, xj - rj), x_hi = std::min(xi + ri, xj + rj);
    const double y_lo = std::max(yi - ri, yj - rj), y_hi = std::min(yi + ri, yj + rj);
    if (x_lo >= x_hi || y_lo >= y_hi) return 0.0;
    double acc = 0.0;
    const int nx = std::max(1, int(std::ceil((x_hi - x_lo) / pixel_mm)));
    const int ny = std::max(1, int(std::ceil((y_hi - y_lo) / pixel_mm)));
    const double hx = (x_hi - x_lo) / nx, hy = (y_hi - y_lo) / ny;
    for (int a = 0; a < nx; ++a) {
        const double x = x_lo + (a + 0.5) * hx;
        for (int b = 0; b < ny; ++b) {
            const double y = y_lo + (b + 0.5) * hy;
            acc += ki.spatial(x - xi, y - yi) * kj.spatial(x - xj, y - yj);
        }
    }
    return acc * hx * hy;
}

/// Drive correlation of cells i and j at lag t' - t (t <= t'):
/// sigma_S^2 * [spatial overlap] * int_0^inf K_T,i(u) K_T,j(u + lag) du.
inline double drive_correlation(const BipolarKernel& ki, double xi, double yi,
                                const BipolarKernel& kj, double xj, double yj,
                                double sigma_s, double t, double t_prime, double pixel_mm,
                                double dt_ms) {
    const double lag = t_prime - t;
    if (lag < 0)
        return drive_correlation(kj, xj, yj, ki, xi, yi, sigma_s, t_prime, t, pixel_mm, dt_ms);
    const double overlap = spatial_overlap(ki, xi, yi, kj, xj, yj, pixel_mm);
    if (overlap == 0.0) return 0.0;
    double temporal = 0.0;
    const double extent = ki.temporal.extent_ms;
    const int n = int(std::ceil(extent / dt_ms));
    for (int k = 0; k < n; ++k) {
        const double u = (k + 0.5) * dt_ms;
        temporal += ki.temporal(u) * kj.temporal(u + lag);
    }
    temporal *= dt_ms;
    return sigma_s * sigma_s * ki.gain_mv * kj.gain_mv * overlap * temporal;
}

/// OPL-input correlation C_F_ij(t, t'): the four-term combination of the
/// temporal kernels and their time derivatives, sharing the spatial overlap.
inline double opl_input_correlation(const BipolarKernel& ki, double xi, double yi,
                                    const BipolarKernel& kj, double xj, double yj,
                                    double sigma_s, double tau_b, double t, double t_prime,
                                    double pixel_mm, double dt_ms) {
    const bool swap = t_prime < t;
    const double lag = swap ? t - t_prime : t_prime - t;
    const BipolarKernel& ka = swap ? kj : ki;
    const BipolarKernel& kb = swap ? ki : kj;
    const double overlap = swap ? spatial_overlap(kj, xj, yj, ki, xi, yi, pixel_mm)
                                : spatial_overlap(ki, xi, yi, kj, xj, yj, pixel_mm);
    if (overlap == 0.0) return 0.0;
    double temporal = 0.0;
    const double extent = ka.temporal.extent_ms;
    const int n = int(std::ceil(extent / dt_ms));
    const double inv_tau = 1.0 / tau_b;
    for (int k = 0; k < n; ++k) {
        const double u = (k + 0.5) * dt_ms;
        const double f = ka.temporal(u), fd = ka.temporal.derivative(u);
        const double g = kb.temporal(u + lag), gd = kb.temporal.derivative(u + lag);
        temporal += inv_tau * inv_tau * f * g + inv_tau * f * gd + inv_tau * fd * g + fd * gd;
    }
    temporal *= dt_ms;
    return sigma_s * sigma_s * ka.gain_mv * kb.gain_mv * overlap * temporal;
}

/// Full N x N forcing correlation matrix: only the B block is nonzero.
inline Eigen::MatrixXd input_correlation_matrix(const std::vector<BipolarKernel>& kernels,
                                                const LayerLayout& lay,
                                                const CellParameters& par, double sigma_s,
                                                double t, double t_prime, double pixel_mm,
                                                double dt_ms) {
    const int n = lay.state_dim();
    const int nb = lay.n_b();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < nb; ++i) {
        auto [xi, yi] = lay.position_mm(Layer::B, i + 1);
        for (int j = 0; j < nb; ++j) {
            auto [xj, yj] = lay.position_mm(Layer::B, j + 1);
            c(i, j) = opl_input_correlation(kernels[i], xi, yi, kernels[j], xj, yj, sigma_s,
                                            par.tau_b[i], t, t_prime, pixel_mm, dt_ms);
        }
    }
    return c;
}

// --- voltage correlations ----------------------------------------------------

/// Closed-form stationary covariance under per-coordinate white-noise forcing
/// of intensity sigma_s, via the spectral decomposition with projectors
/// Pr_a = v_a w~_a:
/// C(t, t') = -sigma^2 sum_b e^{lambda_b (t'-t)}
///            (sum_a Pr_a / (lambda_a + lambda_b)) Pr_b^T,
/// valid for t' >= t (other order by transpose). Reduces entrywise to the
/// symmetric-operator formula when L = L^T.
class WhiteNoiseCorrelation {
public:
    WhiteNoiseCorrelation(SpectralData sd, double sigma_s, double imag_tol = 1e-8)
        : sd_(std::move(sd)), sigma_s_(sigma_s), imag_tol_(imag_tol) {
        if (!sd_.stable)
            throw regime_error("white-noise correlation formula requires a stable spectrum");
        const int n = sd_.dim();
        projectors_.reserve(n);
        for (int a = 0; a < n; ++a)
            projectors_.push_back(sd_.right.col(a) * sd_.left.row(a));
        // sum_b Pr_b / (lambda_a + lambda_b), precomputed per a
        tail_.assign(n, Eigen::MatrixXcd::Zero(n, n));
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const std::complex<double> den = sd_.eigenvalues[a] + sd_.eigenvalues[b];
                if (std::abs(den) < 1e-10)
                    throw accuracy_error("marginal mode pair: |lambda_a + lambda_b| < 1e-10, "
                                         "the closed form diverges");
                tail_[a] += projectors_[b] / den;
            }
    }

    /// Stationary by construction: depends only on t' - t.
    Eigen::MatrixXd operator()(double t, double t_prime) const {
        if (t_prime < t) return (*this)(t_prime, t).transpose();
        const double lag = t_prime - t;
        const int n = sd_.dim();
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
        for (int a = 0; a < n; ++a)
            acc += std::exp(sd_.eigenvalues[a] * lag) *
                   (tail_[a] * projectors_[a].transpose());
        acc *= -sigma_s_ * sigma_s_;
        const double scale = std::max(acc.real().cwiseAbs().maxCoeff(), 1e-300);
        if (acc.imag().cwiseAbs().maxCoeff() > imag_tol_ * std::max(scale, 1.0))
            throw accuracy_error("correlation matrix has excessive imaginary residue");
        return acc.real();
    }

    double variance(int alpha) const { return (*this)(0.0, 0.0)(alpha, alpha); }

private:
    SpectralData sd_;
    double sigma_s_, imag_tol_;
    std::vector<Eigen::MatrixXcd> projectors_;
    std::vector<Eigen::MatrixXcd> tail_;
};

/// Symmetric-operator specialization: for L = L^T with eigenvalues -s_b and
/// orthonormal eigenvectors P, C_{a2 a1}(dt) = (sigma^2/2) sum_b
/// P_{a2 b} P_{a1 b} e^{-s_b dt} / s_b.
inline Eigen::MatrixXd symmetric_voltage_correlation(const Eigen::MatrixXd& l, double sigma_s,
                                                     double lag) {
    if ((l - l.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(l.norm(), 1.0))
        throw config_error("symmetric correlation formula requires L = L^T");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    if ((es.eigenvalues().array() >= 0).any())
        throw regime_error("symmetric correlation formula requires a stable spectrum");
    const int n = int(l.rows());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (int b = 0; b < n; ++b) {
        const double s = -es.eigenvalues()[b];
        c += (es.eigenvectors().col(b) * es.eigenvectors().col(b).transpose()) *
             (std::exp(-s * std::abs(lag)) / s);
    }
    return 0.5 * sigma_s * sigma_s * c;
}

/// General (non-white) stimulus-induced correlation: nested quadrature of
/// e^{L(t-s)} C_F(s,s') e^{L^T(t'-s')} over the past, with the infinite tail
/// truncated once the propagator weight falls below `tail_cut` of its peak.
inline Eigen::MatrixXd general_voltage_correlation(
    const Eigen::MatrixXd& l,
    const std::function<Eigen::MatrixXd(double, double)>& forcing_correlation, double t,
    double t_prime, double dt_ms, double tail_cut = 1e-12) {
    SpectralData sd = eigendecompose(l);
    if (!sd.stable) throw regime_error("general correlation requires a stable spectrum");
    const double decay = -sd.eigenvalues.real().maxCoeff(); // slowest decay rate
    const double tail_ms = std::log(1.0 / tail_cut) / decay;
    const int n = int(l.rows());
    const int ns = int(std::ceil(tail_ms / dt_ms));
    // propagator samples e^{L k dt}
    std::vector<Eigen::MatrixXd> prop(ns + 1);
    const Eigen::MatrixXd step = (l * dt_ms).exp();
    prop[0] = Eigen::MatrixXd::Identity(n, n);
    for (int k = 1; k <= ns; ++k) prop[k] = step * prop[k - 1];
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a <= ns; ++a) {
        const double s = t - a * dt_ms;
        const double wa = (a == 0 || a == ns) ? 0.5 : 1.0;
        for (int b = 0; b <= ns; ++b) {
            const double sp = t_prime - b * dt_ms;
            const double wb = (b == 0 || b == ns) ? 0.5 : 1.0;
            const Eigen::MatrixXd cf = forcing_correlation(s, sp);
            if (cf.cwiseAbs().maxCoeff() == 0.0) continue;
            acc += wa * wb * prop[a] * cf * prop[b].transpose();
        }
    }
    return acc * dt_ms * dt_ms;
}

// --- spike statistics --------------------------------------------------------

/// Firing rate of an LNP cell whose voltage is Gaussian with mean m and
/// variance sigma_net^2: the intrinsic and network noises add in variance.
inline double firing_rate(double mean_drive, double theta_g, double sigma_g,
                          double sigma_net) {
    return detail::norm_cdf((mean_drive - theta_g) /
                            std::sqrt(sigma_g * sigma_g + sigma_net * sigma_net));
}

/// 2x2 voltage covariance with its closed-form eigendecomposition: C = R
/// diag(mu1, mu2) R^T with R the rotation by phi and mu1 >= mu2.
struct PairwiseGaussian {
    double var1 = 1, var2 = 1, cross = 0;
    double mu1 = 1, mu2 = 1, phi = 0;

    PairwiseGaussian(double v1, double v2, double c) : var1(v1), var2(v2), cross(c) {
        const double tr = v1 + v2;
        const double disc = std::sqrt((v1 - v2) * (v1 - v2) + 4 * c * c);
        mu1 = 0.5 * (tr + disc);
        mu2 = 0.5 * (tr - disc);
        if (mu2 < -1e-12 * std::max(1.0, tr))
            throw config_error("pairwise covariance is not positive semidefinite");
        mu2 = std::max(mu2, 0.0);
        // eigenvector of mu1 fixes the rotation angle
        phi = (c == 0.0 && v1 >= v2) ? 0.0 : std::atan2(mu1 - v1, c);
        if (c == 0.0 && v1 < v2) phi = M_PI / 2;
    }

    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d m;
        m << var1, cross, cross, var2;
        return m;
    }
};

namespace detail {
/// Gauss-Hermite rule for the standard normal weight (Golub-Welsch on the
/// probabilists' recurrence): E[g(Z)] ~= sum w_i g(x_i).
inline void gauss_hermite_normal(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        j(k, k - 1) = j(k - 1, k) = std::sqrt(double(k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    nodes = es.eigenvalues();
    weights.resize(order);
    for (int k = 0; k < order; ++k)
        weights[k] = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
}
} // namespace detail

/// Joint spike probability of two LNP cells with jointly Gaussian voltages:
/// 2-D expectation over the rotated standard Gaussian, by tensor Gauss-Hermite
/// quadrature.
inline double pairwise_spike_probability(const PairwiseGaussian& pg, double m1, double m2,
                                         double theta_g, double sigma_g, int gh_order = 64) {
    Eigen::VectorXd x, w;
    detail::gauss_hermite_normal(gh_order, x, w);
    const double c = std::cos(pg.phi), s = std::sin(pg.phi);
    const double r1 = std::sqrt(pg.mu1), r2 = std::sqrt(pg.mu2);
    double acc = 0.0;
    for (int i = 0; i < gh_order; ++i) {
        double inner = 0.0;
        for (int j = 0; j < gh_order; ++j) {
            const double v1 = r1 * c * x[i] - r2 * s * x[j] + m1 - theta_g;
            const double v2 = r1 * s * x[i] + r2 * c * x[j] + m2 - theta_g;
            inner += w[j] * detail::norm_cdf(v1 / sigma_g) * detail::norm_cdf(v2 / sigma_g);
        }
        acc += w[i] * inner;
    }
    return acc;
}

/// Monte Carlo cross-check of the pairwise integral (used for extreme
/// correlations where quadrature degrades).
inline double pairwise_spike_probability_mc(const PairwiseGaussian& pg, double m1, double m2,
                                            double theta_g, double sigma_g,
                                            std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const double c = std::cos(pg.phi), s = std::sin(pg.phi);
    const double r1 = std::sqrt(pg.mu1), r2 = std::sqrt(pg.mu2);
    double acc = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double y1 = gauss(rng), y2 = gauss(rng);
        const double v1 = r1 * c * y1 - r2 * s * y2 + m1 - theta_g;
        const double v2 = r1 * s * y1 + r2 * c * y2 + m2 - theta_g;
        acc += detail::norm_cdf(v1 / sigma_g) * detail::norm_cdf(v2 / sigma_g);
    }
    return acc / double(samples);
}

// --- empirical estimators ----------------------------------------------------

struct EstimateWithError {
    double value = 0;
    double std_error = 0;
};

namespace detail {
inline EstimateWithError jackknife(const std::vector<double>& per_trial) {
    const std::size_t n = per_trial.size();
    EstimateWithError e;
    double sum = 0;
    for (double v : per_trial) sum += v;
    e.value = sum / double(n);
    if (n < 2) return e;
    double ss = 0;
    for (double v : per_trial) {
        const double loo = (sum - v) / double(n - 1);
        ss += (loo - e.value) * (loo - e.value);
    }
    e.std_error = std::sqrt(ss * double(n - 1) / double(n));
    return e;
}
} // namespace detail

struct SpikeStatistics {
    std::vector<EstimateWithError> rates; // per neuron, spikes per bin
    // lagged centered pairwise correlations, keyed by (n1, n2, lag in bins)
    struct PairCorrelation {
        int neuron1, neuron2, lag_bins;
        EstimateWithError estimate;
    };
    std::vector<PairCorrelation> correlations;
};

/// Trial-averaged rates and lagged centered pair correlations with jackknife
/// standard errors. Requires at least 2 trials for error bars.
inline SpikeStatistics empirical_spike_statistics(const SpikeRaster& raster,
                                                  const std::vector<int>& lags_bins = {0}) {
    if (raster.n_trials == 0 || raster.n_bins == 0)
        throw accuracy_error("empty raster: nothing to estimate");
    if (raster.n_trials < 2)
        throw accuracy_error("at least 2 trials are required for standard errors");
    SpikeStatistics st;
    std::vector<double> mean_rate(raster.n_neurons, 0.0);
    for (int n = 0; n < raster.n_neurons; ++n) {
        std::vector<double> per_trial(raster.n_trials);
        for (int tr = 0; tr < raster.n_trials; ++tr) {
            double s = 0;
            for (int b = 0; b < raster.n_bins; ++b) s += raster.at(tr, n, b);
            per_trial[tr] = s / raster.n_bins;
        }
        st.rates.push_back(detail::jackknife(per_trial));
        mean_rate[n] = st.rates.back().value;
    }
    for (int n1 = 0; n1 < raster.n_neurons; ++n1)
        for (int n2 = n1; n2 < raster.n_neurons; ++n2)
            for (int lag : lags_bins) {
                std::vector<double> per_trial(raster.n_trials);
                for (int tr = 0; tr < raster.n_trials; ++tr) {
                    double s = 0;
                    int count = 0;
                    for (int b = 0; b + lag < raster.n_bins; ++b) {
                        s += (raster.at(tr, n1, b) - mean_rate[n1]) *
                             (raster.at(tr, n2, b + lag) - mean_rate[n2]);
                        ++count;
                    }
                    per_trial[tr] = count ? s / count : 0.0;
                }
                st.correlations.push_back({n1, n2, lag, detail::jackknife(per_trial)});
            }
    return st;
}

} // namespace retinasim
