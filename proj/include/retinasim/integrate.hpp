#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "retinasim/domain.hpp"
#include "retinasim/mathutil.hpp"
#include "retinasim/stimulus.hpp"
#include "retinasim/transport.hpp"

namespace retinasim {

struct IntegratorConfig {
    double dt_ms = 0.1;         // sample step
    double event_tol_mv = 1e-9; // crossing localization tolerance on the guard
    int max_bisections = 200;
    std::size_t max_visits = 1'000'000; // chattering guard
};

/// Time-dependent stimulus part of the forcing on the full state vector
/// (nonzero only in the B entries for the retina model).
using Forcing = std::function<Eigen::VectorXd(double)>;

inline Forcing zero_forcing(int dim) {
    return [dim](double) { return Eigen::VectorXd::Zero(dim); };
}

/// Forcing that linearly interpolates the sampled OPL input of a DriveTrace
/// into the B entries of a state vector of dimension `dim`.
inline Forcing drive_forcing(const DriveTrace& trace, int dim) {
    const Eigen::MatrixXd opl = trace.opl;
    const double dt = trace.dt_ms;
    const int nb = int(opl.rows()), nt = int(opl.cols());
    return [opl, dt, nb, nt, dim](double t) {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(dim);
        if (t <= 0) {
            f.head(nb) = opl.col(0);
        } else if (t >= (nt - 1) * dt) {
            f.head(nb) = opl.col(nt - 1);
        } else {
            const int k = int(std::floor(t / dt));
            const double a = (t - k * dt) / dt;
            f.head(nb) = (1 - a) * opl.col(k) + a * opl.col(k + 1);
        }
        return f;
    };
}

/// Solution operator of dX/dt = L X + C + F(t) on one rectification domain:
/// X(t) = e^{L (t - t0)} X0 + int e^{L (t - s)} (C + F(s)) ds, with the
/// forcing integral by 4-point Gauss-Legendre panels per sample step.
class DomainPropagator {
public:
    DomainPropagator(const TransportOperator& op, Forcing forcing, double t0,
                     Eigen::VectorXd x0, double dt)
        : op_(op), forcing_(std::move(forcing)), t0_(t0), dt_(dt) {
        grid_times_ = {t0};
        grid_states_ = {std::move(x0)};
        step_exp_ = (op_.matrix * dt_).exp();
        for (int i = 0; i < 4; ++i)
            node_exp_[i] = (op_.matrix * (dt_ * (1.0 - detail::GaussLegendre4::nodes[i]))).exp();
    }

    double t0() const { return t0_; }
    double dt() const { return dt_; }
    const TransportOperator& op() const { return op_; }

    /// State at grid point t0 + k dt, advancing lazily.
    const Eigen::VectorXd& at_grid(std::size_t k) {
        while (grid_states_.size() <= k) advance_one();
        return grid_states_[k];
    }

    /// State at an arbitrary t >= t0 (matrix exponentials recomputed for the
    /// partial step).
    Eigen::VectorXd at(double t) {
        if (t < t0_) throw accuracy_error("propagator queried before its start time");
        const auto k = std::size_t(std::floor((t - t0_ + 1e-12 * dt_) / dt_));
        const Eigen::VectorXd& base = at_grid(k);
        const double tk = t0_ + double(k) * dt_;
        const double h = t - tk;
        if (h <= 1e-14 * dt_) return base;
        return propagate_interval(base, tk, h);
    }

private:
    void advance_one() {
        const double tk = t0_ + double(grid_states_.size() - 1) * dt_;
        Eigen::VectorXd next = step_exp_ * grid_states_.back();
        for (int i = 0; i < 4; ++i) {
            const double s = tk + dt_ * detail::GaussLegendre4::nodes[i];
            next += dt_ * detail::GaussLegendre4::weights[i] *
                    (node_exp_[i] * (op_.constant + forcing_(s)));
        }
        if (!next.allFinite())
            throw accuracy_error("matrix-exponential overflow during in-domain propagation; "
                                 "subdivide the step");
        grid_times_.push_back(tk + dt_);
        grid_states_.push_back(std::move(next));
    }

    Eigen::VectorXd propagate_interval(const Eigen::VectorXd& x, double t_start, double h) const {
        Eigen::VectorXd out = ((op_.matrix * h).exp() * x).eval();
        for (int i = 0; i < 4; ++i) {
            const double c = detail::GaussLegendre4::nodes[i];
            out += h * detail::GaussLegendre4::weights[i] *
                   ((op_.matrix * (h * (1.0 - c))).exp() *
                    (op_.constant + forcing_(t_start + h * c)));
        }
        return out;
    }

    TransportOperator op_;
    Forcing forcing_;
    double t0_, dt_;
    Eigen::MatrixXd step_exp_;
    std::array<Eigen::MatrixXd, 4> node_exp_;
    std::vector<double> grid_times_;
    std::vector<Eigen::VectorXd> grid_states_;
};

struct CrossingEvent {
    double time = 0;            // first instant certified inside the new domain
    std::vector<int> cells;     // guard coordinates within tolerance of threshold
    DomainLabel new_label;
};

/// Scan the propagator's grid over [t0, t_end] for the first domain change,
/// then bisect the bracketing step down to the event tolerance.
inline std::optional<CrossingEvent> detect_crossing(DomainPropagator& prop,
                                                    const LayerLayout& lay,
                                                    const CellParameters& par,
                                                    double t_end,
                                                    const IntegratorConfig& cfg) {
    const DomainLabel current = prop.op().label;
    const int nb = lay.n_b(), na = lay.n_a(), n = lay.state_dim();
    auto guard_gap = [&](const Eigen::VectorXd& x, const DomainLabel& other) {
        // max |V - theta| over coordinates whose label bit changed
        double g = 0.0;
        for (int a = 0; a < nb + na; ++a)
            if (other.rectified[a] != current.rectified[a]) {
                const double th = a < nb ? par.theta_b : par.theta_a;
                g = std::max(g, std::abs(x[a] - th));
            }
        if (par.gain_control)
            for (int i = 0; i < nb; ++i)
                if (other.gain_passing[i] != current.gain_passing[i])
                    g = std::max(g, std::abs(x[n + i] - par.theta_act));
        return g;
    };

    const auto kmax = std::size_t(std::ceil((t_end - prop.t0()) / prop.dt() - 1e-12));
    std::size_t k_hit = 0;
    bool found = false;
    for (std::size_t k = 1; k <= kmax; ++k) {
        const double tk = std::min(prop.t0() + double(k) * prop.dt(), t_end);
        const Eigen::VectorXd x =
            (tk < prop.t0() + double(k) * prop.dt() - 1e-12) ? prop.at(tk) : prop.at_grid(k);
        if (!(classify_domain(x, lay, par) == current)) {
            k_hit = k;
            found = true;
            break;
        }
    }
    if (!found) return std::nullopt;

    double lo = prop.t0() + double(k_hit - 1) * prop.dt();
    double hi = std::min(prop.t0() + double(k_hit) * prop.dt(), t_end);
    Eigen::VectorXd x_hi = prop.at(hi);
    DomainLabel label_hi = classify_domain(x_hi, lay, par);
    int iter = 0;
    while (guard_gap(x_hi, label_hi) > cfg.event_tol_mv) {
        if (++iter > cfg.max_bisections)
            throw accuracy_error("crossing bisection failed to reach the event tolerance");
        const double mid = 0.5 * (lo + hi);
        const Eigen::VectorXd x_mid = prop.at(mid);
        if (classify_domain(x_mid, lay, par) == current) {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x_mid;
            label_hi = classify_domain(x_hi, lay, par);
        }
    }

    CrossingEvent ev;
    ev.time = hi;
    ev.new_label = label_hi;
    for (int a = 0; a < nb + na; ++a)
        if (label_hi.rectified[a] != current.rectified[a]) ev.cells.push_back(a);
    if (par.gain_control)
        for (int i = 0; i < nb; ++i)
            if (label_hi.gain_passing[i] != current.gain_passing[i]) ev.cells.push_back(n + i);
    return ev;
}

// --- trajectories ------------------------------------------------------------

struct DomainVisit {
    DomainLabel label;
    double t_entry = 0, t_exit = 0;
    Eigen::VectorXd state_entry, state_exit;
    Eigen::MatrixXd propagator;       // H step: e^{L (t_exit - t_entry)}
    Eigen::VectorXd forcing_integral; // Phi for this visit
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<DomainVisit> visits;
    Eigen::VectorXd initial_state;

    Eigen::VectorXd final_state() const { return states.back(); }

    /// Entry state of visit k+1 (or the final state for k = last) rebuilt
    /// through the H/Phi recurrence: X = sum_m H_{k,m} Phi_m with
    /// Phi_0 = X(0), evaluated Horner-style.
    Eigen::VectorXd reconstruct_exit(std::size_t k) const {
        Eigen::VectorXd acc = initial_state;
        for (std::size_t j = 0; j <= k; ++j)
            acc = visits[j].propagator * acc + visits[j].forcing_integral;
        return acc;
    }
};

/// Exact piecewise-linear integration: chains in-domain propagation with
/// crossing detection, recording per-visit propagators and forcing integrals.
inline Trajectory integrate_piecewise(const Eigen::VectorXd& x0, const LayerLayout& lay,
                                      const ConnectivityWeights& w, const CellParameters& par,
                                      const Forcing& forcing, double horizon_ms,
                                      const IntegratorConfig& cfg) {
    if (!x0.allFinite()) throw config_error("initial state must be finite");
    Trajectory traj;
    traj.initial_state = x0;
    double t = 0.0;
    Eigen::VectorXd x = x0;
    DomainLabel label = classify_domain(x, lay, par);
    while (t < horizon_ms - 1e-12) {
        if (traj.visits.size() >= cfg.max_visits)
            throw regime_error("domain-visit cap exceeded (chattering) at t = " +
                               csv::format(t) + " ms in domain n = " +
                               std::to_string(label.pack()));
        TransportOperator op = assemble_transport(lay, w, par, label);
        DomainPropagator prop(op, forcing, t, x, cfg.dt_ms);
        auto ev = detect_crossing(prop, lay, par, horizon_ms, cfg);
        const double t_exit = ev ? ev->time : horizon_ms;

        // sample strictly inside the visit
        for (double ts = t; ts < t_exit - 1e-12; ts += cfg.dt_ms) {
            traj.times.push_back(ts);
            traj.states.push_back(prop.at(ts));
        }
        DomainVisit visit;
        visit.label = label;
        visit.t_entry = t;
        visit.t_exit = t_exit;
        visit.state_entry = x;
        visit.state_exit = prop.at(t_exit);
        visit.propagator = (op.matrix * (t_exit - t)).exp();
        visit.forcing_integral = visit.state_exit - visit.propagator * visit.state_entry;
        traj.visits.push_back(visit);

        t = t_exit;
        x = visit.state_exit;
        if (ev) label = ev->new_label;
    }
    traj.times.push_back(horizon_ms);
    traj.states.push_back(x);
    return traj;
}

// --- dense and stochastic reference integration ------------------------------

/// The rectified vector field itself (no domain decomposition): used by the
/// dense-Euler oracle and the SDE drift.
inline Eigen::VectorXd rectified_drift(const Eigen::VectorXd& x, const LayerLayout& lay,
                                       const ConnectivityWeights& w, const CellParameters& par,
                                       const Eigen::VectorXd& stimulus_forcing) {
    const int nb = lay.n_b(), na = lay.n_a(), ng = lay.n_g();
    const int n = nb + na + ng;
    Eigen::VectorXd nb_rect(nb), na_rect(na), nb_tx(nb);
    for (int i = 0; i < nb; ++i)
        nb_rect[i] = x[i] < par.theta_b ? 0.0 : x[i] - par.theta_b;
    for (int i = 0; i < nb; ++i) {
        const double gate = par.gain_control && x[n + i] > par.theta_act ? 0.0 : 1.0;
        nb_tx[i] = nb_rect[i] * gate;
    }
    for (int j = 0; j < na; ++j)
        na_rect[j] = x[nb + j] < par.theta_a ? 0.0 : x[nb + j] - par.theta_a;

    Eigen::VectorXd dx(x.size());
    dx.head(nb) = -par.inv_tau_b_eff(w).cwiseProduct(x.head(nb)) + w.w_ab * na_rect +
                  w.gamma_ab * x.segment(nb, na);
    dx.segment(nb, na) = -par.inv_tau_a_eff(w).cwiseProduct(x.segment(nb, na)) +
                         w.w_ba * nb_tx + w.gamma_ba * x.head(nb);
    dx.segment(nb + na, ng) = -par.tau_g.cwiseInverse().cwiseProduct(x.segment(nb + na, ng)) +
                              w.w_bg * nb_tx + w.w_ag * na_rect;
    if (par.gain_control)
        dx.tail(nb) = -x.tail(nb) / par.tau_act + par.h_b * nb_rect;
    dx += stimulus_forcing;
    return dx;
}

/// Fine-step forward Euler on the rectified vector field.
inline Trajectory integrate_dense_euler(const Eigen::VectorXd& x0, const LayerLayout& lay,
                                        const ConnectivityWeights& w,
                                        const CellParameters& par, const Forcing& forcing,
                                        double horizon_ms, double dt_ms) {
    Trajectory traj;
    traj.initial_state = x0;
    Eigen::VectorXd x = x0;
    const auto nsteps = std::size_t(std::round(horizon_ms / dt_ms));
    for (std::size_t k = 0; k < nsteps; ++k) {
        const double t = double(k) * dt_ms;
        traj.times.push_back(t);
        traj.states.push_back(x);
        x += dt_ms * rectified_drift(x, lay, w, par, forcing(t));
        if (!x.allFinite()) throw accuracy_error("dense Euler integration diverged");
    }
    traj.times.push_back(horizon_ms);
    traj.states.push_back(x);
    return traj;
}

/// Euler-Maruyama with per-step domain reclassification through the drift and
/// additive white noise of per-coordinate intensity `sigma`.
inline Trajectory integrate_sde(const Eigen::VectorXd& x0, const LayerLayout& lay,
                                const ConnectivityWeights& w, const CellParameters& par,
                                const Forcing& forcing, const Eigen::VectorXd& sigma,
                                double horizon_ms, double dt_ms, std::uint64_t seed,
                                std::uint64_t trial) {
    const double tau_min =
        std::min({par.tau_b.size() ? par.tau_b.minCoeff() : 1e30,
                  par.tau_a.size() ? par.tau_a.minCoeff() : 1e30,
                  par.tau_g.size() ? par.tau_g.minCoeff() : 1e30});
    if (dt_ms > tau_min / 20.0)
        throw accuracy_error("SDE step " + csv::format(dt_ms) +
                             " ms too large for fastest time constant " + csv::format(tau_min));
    std::seed_seq sq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(trial),
                     std::uint32_t(trial >> 32)};
    std::mt19937_64 rng(sq);
    std::normal_distribution<double> gauss;
    const double root_dt = std::sqrt(dt_ms);

    Trajectory traj;
    traj.initial_state = x0;
    Eigen::VectorXd x = x0;
    const auto nsteps = std::size_t(std::round(horizon_ms / dt_ms));
    for (std::size_t k = 0; k < nsteps; ++k) {
        const double t = double(k) * dt_ms;
        traj.times.push_back(t);
        traj.states.push_back(x);
        Eigen::VectorXd dx = dt_ms * rectified_drift(x, lay, w, par, forcing(t));
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (sigma[i] != 0.0) dx[i] += sigma[i] * root_dt * gauss(rng);
        x += dx;
        if (!x.allFinite()) throw accuracy_error("SDE integration diverged");
    }
    traj.times.push_back(horizon_ms);
    traj.states.push_back(x);
    return traj;
}

// --- LNP spike generation ----------------------------------------------------

struct SpikeRaster {
    double bin_ms = 1.0;
    int n_neurons = 0, n_bins = 0, n_trials = 0;
    std::vector<std::uint8_t> data; // trial-major, then neuron, then bin

    std::uint8_t& at(int trial, int neuron, int bin) {
        return data[(std::size_t(trial) * n_neurons + neuron) * n_bins + bin];
    }
    std::uint8_t at(int trial, int neuron, int bin) const {
        return data[(std::size_t(trial) * n_neurons + neuron) * n_bins + bin];
    }

    static SpikeRaster zeros(int trials, int neurons, int bins, double bin_ms) {
        SpikeRaster r;
        r.bin_ms = bin_ms;
        r.n_neurons = neurons;
        r.n_bins = bins;
        r.n_trials = trials;
        r.data.assign(std::size_t(trials) * neurons * bins, 0);
        return r;
    }
};

/// Bernoulli spikes from a ganglion-cell voltage trace: per bin n, spike with
/// probability Phi((V(n delta) - theta_G) / sigma_G), independent across bins.
/// `voltages` is n_neurons x n_samples at step trace_dt_ms.
inline SpikeRaster generate_lnp_spikes(const Eigen::MatrixXd& voltages, double trace_dt_ms,
                                       double theta_g, double sigma_g, double bin_ms,
                                       std::uint64_t seed, std::uint64_t trial) {
    const double ratio = bin_ms / trace_dt_ms;
    const bool coarser = std::abs(ratio - std::round(ratio)) < 1e-9 && ratio > 1.0 - 1e-9;
    const bool finer = std::abs(1.0 / ratio - std::round(1.0 / ratio)) < 1e-9;
    if (!coarser && !finer)
        throw config_error("LNP bin width must equal, subdivide, or be a multiple of the "
                           "trace step");
    const int n_neurons = int(voltages.rows());
    const int n_bins = int(std::floor((double(voltages.cols()) - 1) * trace_dt_ms / bin_ms)) + 1;
    SpikeRaster raster = SpikeRaster::zeros(1, n_neurons, n_bins, bin_ms);
    for (int g = 0; g < n_neurons; ++g)
        for (int b = 0; b < n_bins; ++b) {
            const auto idx = std::min<Eigen::Index>(
                Eigen::Index(std::floor(b * bin_ms / trace_dt_ms + 1e-9)), voltages.cols() - 1);
            const double p = detail::norm_cdf((voltages(g, idx) - theta_g) / sigma_g);
            const double u = detail::keyed_uniform(seed, trial, g, b);
            raster.at(0, g, b) = u < p ? 1 : 0;
        }
    return raster;
}

} // namespace retinasim
