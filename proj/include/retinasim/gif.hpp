#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "retinasim/integrate.hpp"
#include "retinasim/mathutil.hpp"
#include "retinasim/statistics.hpp"

namespace retinasim {

/// Post-synaptic conductance kernel P(t) e^{-t/tau} H(t); degree 0 is the
/// pure exponential, degree 1 the (t/tau) e^{-t/tau} alpha function.
struct AlphaKernel {
    double tau_ms = 10.0;
    int degree = 0; // 0 or 1

    double operator()(double t_ms) const {
        if (t_ms < 0) return 0.0;
        const double e = std::exp(-t_ms / tau_ms);
        return degree == 0 ? e : (t_ms / tau_ms) * e;
    }

    /// Total mass of the kernel sampled at bin multiples (for tail bounds).
    double sampled_mass(double bin_ms) const {
        const double q = std::exp(-bin_ms / tau_ms);
        if (degree == 0) return 1.0 / (1.0 - q);
        // sum m r q^m with r = bin/tau
        const double r = bin_ms / tau_ms;
        return r * q / ((1.0 - q) * (1.0 - q));
    }

    /// Smallest depth D such that the sampled tail mass beyond D bins is
    /// below eps_mem of the total (exponential tail makes this finite).
    int memory_depth_bins(double bin_ms, double eps_mem) const {
        const double total = sampled_mass(bin_ms);
        double tail = total;
        int d = 0;
        while (tail > eps_mem * total) {
            tail -= (*this)(d * bin_ms);
            ++d;
            if (d > 1'000'000)
                throw accuracy_error("alpha-kernel memory depth did not converge");
        }
        return d;
    }
};

/// Spiking network with history-dependent conductances: sub-threshold
/// dynamics C_k dV_k/dt + g_k(t, omega) V_k = i_k(t, omega), spike-and-reset
/// at the threshold. Effective weights W_kj = G_kj E_j.
struct GifNetwork {
    int n_neurons = 0;
    Eigen::VectorXd capacitance;   // C_k
    Eigen::VectorXd leak_g;        // g_L per neuron
    Eigen::VectorXd leak_reversal; // E_L per neuron
    double threshold = 1.0;
    double reset = 0.0;
    Eigen::MatrixXd g_max;      // G_kj >= 0
    Eigen::MatrixXd reversal;   // E_kj per synapse (sign sets excitation/inhibition)
    Eigen::MatrixXd tau_alpha;  // tau_kj
    int alpha_degree = 0;
    double sigma_b = 0.0; // current noise intensity
    double bin_ms = 1.0;
    double eps_mem = 1e-6;

    static GifNetwork uniform(int n, double cap, double gl, double el) {
        GifNetwork net;
        net.n_neurons = n;
        net.capacitance = Eigen::VectorXd::Constant(n, cap);
        net.leak_g = Eigen::VectorXd::Constant(n, gl);
        net.leak_reversal = Eigen::VectorXd::Constant(n, el);
        net.g_max = Eigen::MatrixXd::Zero(n, n);
        net.reversal = Eigen::MatrixXd::Zero(n, n);
        net.tau_alpha = Eigen::MatrixXd::Constant(n, n, 10.0);
        return net;
    }

    void validate() const {
        if ((g_max.array() < 0).any())
            throw config_error("maximal conductances G_kj must be nonnegative");
        if ((capacitance.array() <= 0).any() || (leak_g.array() <= 0).any())
            throw config_error("capacitances and leak conductances must be positive");
        if ((tau_alpha.array() <= 0).any())
            throw config_error("alpha-kernel time constants must be positive");
        const double tau_min = tau_alpha.minCoeff();
        if (bin_ms > tau_min / 10.0)
            throw config_error("bin width must be at most min tau_kj / 10");
    }

    double effective_weight(int k, int j) const { return g_max(k, j) * reversal(k, j); }

    int memory_depth_bins() const {
        int d = 1;
        for (int k = 0; k < n_neurons; ++k)
            for (int j = 0; j < n_neurons; ++j)
                if (g_max(k, j) > 0)
                    d = std::max(d, AlphaKernel{tau_alpha(k, j), alpha_degree}
                                        .memory_depth_bins(bin_ms, eps_mem));
        return d;
    }
};

/// alpha_kj(t, omega) = sum_{n <= t} alpha_kj(t - n) omega_j(n) over a
/// truncated history window of at least the memory depth D.
inline double alpha_trace(const SpikeRaster& raster, int trial, int pre_j, int t_bin,
                          const AlphaKernel& kernel, double bin_ms, int depth_bins) {
    if (t_bin >= depth_bins && raster.n_bins < depth_bins)
        throw accuracy_error("spike window shorter than the alpha-kernel memory depth");
    double acc = 0.0;
    const int m_max = std::min(t_bin, depth_bins - 1);
    for (int m = 0; m <= m_max; ++m)
        if (raster.at(trial, pre_j, t_bin - m)) acc += kernel(m * bin_ms);
    return acc;
}

struct GifRun {
    SpikeRaster raster;                   // all trials
    std::vector<Eigen::MatrixXd> voltages; // per trial, n_neurons x n_bins
};

/// Bin-discretized gIF simulation: conductances frozen within a bin
/// (exponential Euler), spike-and-reset on threshold crossing, per-trial
/// reproducible noise streams.
inline GifRun simulate_gif(const GifNetwork& net,
                           const std::function<double(int, double)>& stimulus, // (k, t_ms)
                           double horizon_ms, int trials, std::uint64_t seed,
                           int depth_override = 0) {
    net.validate();
    const int n = net.n_neurons;
    const int n_bins = int(std::round(horizon_ms / net.bin_ms));
    const int depth = depth_override > 0 ? depth_override : net.memory_depth_bins();
    GifRun run;
    run.raster = SpikeRaster::zeros(trials, n, n_bins, net.bin_ms);
    run.voltages.resize(trials);

    // per-synapse alpha tables sampled at bin lags
    std::vector<Eigen::VectorXd> alpha_table(std::size_t(n) * n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
            AlphaKernel ak{net.tau_alpha(k, j), net.alpha_degree};
            Eigen::VectorXd tab(depth);
            for (int m = 0; m < depth; ++m) tab[m] = ak(m * net.bin_ms);
            alpha_table[std::size_t(k) * n + j] = tab;
        }

    for (int trial = 0; trial < trials; ++trial) {
        std::seed_seq sq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(trial)};
        std::mt19937_64 rng(sq);
        std::normal_distribution<double> gauss;
        Eigen::VectorXd v = Eigen::VectorXd::Constant(n, net.reset);
        Eigen::MatrixXd& volt = run.voltages[trial];
        volt.resize(n, n_bins);
        std::vector<std::vector<int>> spike_times(n); // recent spike bins per neuron
        for (int b = 0; b < n_bins; ++b) {
            const double t = b * net.bin_ms;
            // alpha traces of every presynaptic neuron, per synapse
            for (int k = 0; k < n; ++k) {
                double g = net.leak_g[k];
                double cur = net.leak_g[k] * net.leak_reversal[k] + stimulus(k, t);
                for (int j = 0; j < n; ++j) {
                    if (net.g_max(k, j) == 0) continue;
                    const Eigen::VectorXd& tab = alpha_table[std::size_t(k) * n + j];
                    double a = 0.0;
                    for (auto it = spike_times[j].rbegin(); it != spike_times[j].rend(); ++it) {
                        const int m = b - *it;
                        if (m >= depth) break;
                        a += tab[m];
                    }
                    g += net.g_max(k, j) * a;
                    cur += net.effective_weight(k, j) * a;
                }
                if (!(g > 0) || !std::isfinite(g))
                    throw accuracy_error("conductance blow-up in gIF simulation");
                if (net.sigma_b != 0.0)
                    cur += net.sigma_b * gauss(rng) / std::sqrt(net.bin_ms);
                const double decay = std::exp(-g * net.bin_ms / net.capacitance[k]);
                v[k] = v[k] * decay + (cur / g) * (1.0 - decay);
                if (!std::isfinite(v[k]))
                    throw accuracy_error("non-finite voltage in gIF simulation");
            }
            for (int k = 0; k < n; ++k) {
                if (v[k] >= net.threshold) {
                    run.raster.at(trial, k, b) = 1;
                    v[k] = net.reset;
                    spike_times[k].push_back(b);
                }
                volt(k, b) = v[k];
            }
        }
    }
    return run;
}

// --- observables and linear response -----------------------------------------

/// A function of (time bin, raster, trial) depending only on spikes at bins
/// <= t (causality).
using Observable = std::function<double(int, const SpikeRaster&, int)>;

inline Observable spike_indicator(int neuron) {
    return [neuron](int t, const SpikeRaster& r, int trial) {
        return double(r.at(trial, neuron, t));
    };
}

/// Lagged pair product with the spontaneous means subtracted.
inline Observable pair_product(int neuron1, int neuron2, int lag_bins, double mean1,
                               double mean2) {
    return [=](int t, const SpikeRaster& r, int trial) {
        const int t0 = t - lag_bins;
        if (t0 < 0) return 0.0;
        return (r.at(trial, neuron1, t0) - mean1) * (r.at(trial, neuron2, t) - mean2);
    };
}

struct DeltaTrace {
    Eigen::VectorXd values;     // delta mu[f](t) per bin
    Eigen::VectorXd std_errors; // jackknife over trials
    double spontaneous_mean = 0;
    double spontaneous_se = 0;
};

/// Stationary mean of an observable over one long spontaneous run, with
/// burn-in discard and a blocked standard error.
inline std::pair<double, double> spontaneous_mean(const Observable& f,
                                                  const SpikeRaster& spont, int burn_in_bins,
                                                  int n_blocks = 20) {
    const int n_bins = spont.n_bins;
    if (burn_in_bins >= n_bins) throw config_error("burn-in exceeds the spontaneous run");
    const int usable = n_bins - burn_in_bins;
    const int block = std::max(1, usable / n_blocks);
    std::vector<double> block_means;
    for (int b0 = burn_in_bins; b0 + block <= n_bins; b0 += block) {
        double s = 0;
        for (int b = b0; b < b0 + block; ++b) s += f(b, spont, 0);
        block_means.push_back(s / block);
    }
    const auto est = detail::jackknife(block_means);
    return {est.value, est.std_error};
}

/// delta mu[f](t) = stimulated trial average minus the spontaneous stationary
/// mean, per bin, with jackknife standard errors over trials.
inline DeltaTrace delta_average(const Observable& f, const SpikeRaster& stimulated,
                                const SpikeRaster& spontaneous, int burn_in_bins,
                                double max_spont_se_fraction = 0.0) {
    if (stimulated.n_trials < 2)
        throw accuracy_error("delta_average needs at least 2 stimulated trials");
    DeltaTrace out;
    auto [sp_mean, sp_se] = spontaneous_mean(f, spontaneous, burn_in_bins);
    out.spontaneous_mean = sp_mean;
    out.spontaneous_se = sp_se;
    out.values.resize(stimulated.n_bins);
    out.std_errors.resize(stimulated.n_bins);
    std::vector<double> per_trial(stimulated.n_trials);
    double peak = 0;
    for (int b = 0; b < stimulated.n_bins; ++b) {
        for (int tr = 0; tr < stimulated.n_trials; ++tr)
            per_trial[tr] = f(b, stimulated, tr);
        const auto est = detail::jackknife(per_trial);
        out.values[b] = est.value - sp_mean;
        out.std_errors[b] = est.std_error;
        peak = std::max(peak, std::abs(out.values[b]));
    }
    if (max_spont_se_fraction > 0 && sp_se > max_spont_se_fraction * std::max(peak, 1e-300))
        throw accuracy_error("spontaneous mean too uncertain relative to the signal; "
                             "lengthen the spontaneous run");
    return out;
}

// --- kernel estimation -------------------------------------------------------

struct LinearResponseEstimate {
    Eigen::VectorXd kernel;      // causal lags 0..D-1, units of (delta mu)/stimulus
    double ridge_lambda = 0;
    double fit_residual = 0;     // relative L2 residual of the fit
    double gram_condition = 0;

    /// Predicted delta mu for a stimulus trace (causal convolution).
    Eigen::VectorXd predict(const Eigen::VectorXd& stimulus) const {
        const int nt = int(stimulus.size());
        Eigen::VectorXd y = Eigen::VectorXd::Zero(nt);
        for (int t = 0; t < nt; ++t)
            for (int l = 0; l < kernel.size() && l <= t; ++l)
                y[t] += kernel[l] * stimulus[t - l];
        return y;
    }
};

/// Ridge-regularized causal deconvolution of delta mu ~= K * S. When
/// `ridge_lambda` is negative the regularization strength is chosen by
/// generalized cross-validation over a log-spaced path.
inline LinearResponseEstimate estimate_response_kernel(const Eigen::VectorXd& delta_mu,
                                                       const Eigen::VectorXd& stimulus,
                                                       int n_lags, double ridge_lambda = -1,
                                                       double gram_condition_max = 1e12) {
    const int nt = int(delta_mu.size());
    if (stimulus.size() != nt) throw config_error("trace lengths differ");
    if (n_lags <= 0 || n_lags > nt) throw config_error("bad lag count");
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(nt, n_lags);
    for (int t = 0; t < nt; ++t)
        for (int l = 0; l < n_lags && l <= t; ++l) x(t, l) = stimulus[t - l];

    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& d = svd.singularValues();
    if (!(d[0] > 0))
        throw accuracy_error("stimulus lacks spectral content (all-zero design); "
                             "use a richer probe stimulus");
    const double cond = d[0] / std::max(d[d.size() - 1], 1e-300);
    if (cond > gram_condition_max)
        throw accuracy_error("stimulus lacks spectral content (design condition " +
                             csv::format(cond) + "); use a richer probe stimulus");

    const Eigen::VectorXd uty = svd.matrixU().transpose() * delta_mu;
    auto solve_ridge = [&](double lam) {
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(n_lags);
        for (int i = 0; i < d.size(); ++i)
            coef += (d[i] * uty[i] / (d[i] * d[i] + lam)) * svd.matrixV().col(i);
        return coef;
    };
    auto gcv_score = [&](double lam) {
        double rss = delta_mu.squaredNorm() - uty.squaredNorm();
        double trace_h = 0;
        for (int i = 0; i < d.size(); ++i) {
            const double h = d[i] * d[i] / (d[i] * d[i] + lam);
            rss += uty[i] * uty[i] * (1.0 - h) * (1.0 - h);
            trace_h += h;
        }
        const double den = (nt - trace_h);
        return nt * std::max(rss, 0.0) / (den * den);
    };

    LinearResponseEstimate est;
    if (ridge_lambda >= 0) {
        est.ridge_lambda = ridge_lambda;
    } else {
        double best = std::numeric_limits<double>::infinity();
        const double d2max = d[0] * d[0];
        for (int k = -12; k <= 2; ++k) {
            const double lam = d2max * std::pow(10.0, k);
            const double score = gcv_score(lam);
            if (score < best) {
                best = score;
                est.ridge_lambda = lam;
            }
        }
    }
    est.kernel = solve_ridge(est.ridge_lambda);
    est.gram_condition = cond;
    est.fit_residual =
        (x * est.kernel - delta_mu).norm() / std::max(delta_mu.norm(), 1e-300);
    return est;
}

} // namespace retinasim
