// Command-line front end: one subcommand per analysis, CSV/JSON artifacts,
// reproducible given (config, seed).
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "retinasim/config.hpp"
#include "retinasim/exports.hpp"
#include "retinasim/gif.hpp"
#include "retinasim/spectral.hpp"
#include "retinasim/statistics.hpp"

namespace rs = retinasim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunContext {
    rs::ExperimentConfig cfg;
    fs::path out;
    json summary;

    void emit(const std::string& subcommand) {
        rs::write_json_atomic(out / "provenance.json", rs::provenance_record(cfg, subcommand));
        rs::write_json_atomic(out / "summary.json", summary);
    }
};

RunContext make_context(const std::string& config_path, const std::string& out_override,
                        long long seed_override, bool strict) {
    RunContext ctx;
    ctx.cfg = rs::load_config(config_path, strict);
    if (seed_override >= 0) ctx.cfg.seed = std::uint64_t(seed_override);
    ctx.out = out_override.empty() ? ctx.cfg.output_dir : fs::path(out_override);
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw rs::io_error("cannot create output directory " + ctx.out.string());
    return ctx;
}

rs::TransportOperator rest_operator(const rs::ExperimentConfig& cfg, const rs::LayerLayout& lay,
                                    const rs::ConnectivityWeights& w) {
    const auto label = rs::DomainLabel::unpack(
        std::uint64_t(cfg.analysis.value("domain", 0)), std::size_t(lay.n_b() + lay.n_a()),
        cfg.cells.gain_control ? std::size_t(lay.n_b()) : 0);
    return rs::assemble_transport(lay, w, cfg.cells, label);
}

int state_dim(const rs::ExperimentConfig& cfg, const rs::LayerLayout& lay) {
    return cfg.cells.gain_control ? lay.state_dim() + lay.n_b() : lay.state_dim();
}

// --- subcommands -------------------------------------------------------------

void run_spectrum(RunContext& ctx) {
    const rs::LayerLayout lay = ctx.cfg.layout();
    const auto w = ctx.cfg.weights(lay);
    const auto op = rest_operator(ctx.cfg, lay, w);
    const rs::SpectralData sd = rs::eigendecompose(op.matrix);
    std::ostringstream csv;
    csv << "re,im\n";
    for (int k = 0; k < sd.dim(); ++k)
        csv << rs::csv::format(sd.eigenvalues[k].real()) << ","
            << rs::csv::format(sd.eigenvalues[k].imag()) << "\n";
    rs::write_text_atomic(ctx.out / "eigenvalues.csv", csv.str());
    ctx.summary["stable"] = sd.stable;
    ctx.summary["basis_condition"] = sd.basis_condition;
    ctx.summary["dim"] = sd.dim();
}

void run_rf(RunContext& ctx) {
    const rs::LayerLayout lay = ctx.cfg.layout();
    const auto w = ctx.cfg.weights(lay);
    const auto op = rest_operator(ctx.cfg, lay, w);
    const rs::SpectralData sd = rs::eigendecompose(op.matrix);
    const int cell = ctx.cfg.analysis.value("cell", lay.n_b() + lay.n_a());
    const double grid_mm = ctx.cfg.analysis.value("grid_mm", lay.spacing_mm(rs::Layer::B));
    const int half = ctx.cfg.analysis.value("grid_half_points", 5);
    auto [cx, cy] = lay.position_mm(rs::Layer::G, 1);
    Eigen::VectorXd xs(2 * half + 1), ys(2 * half + 1);
    for (int k = -half; k <= half; ++k) {
        xs[k + half] = cx + k * grid_mm;
        ys[k + half] = cy + k * grid_mm;
    }
    const auto rf = rs::rg_receptive_field(cell, sd, ctx.cfg.kernels(lay), lay, xs, ys,
                                           ctx.cfg.horizon_ms, ctx.cfg.integrator.dt_ms,
                                           ctx.cfg.cells);
    rs::write_text_atomic(ctx.out / "kernel.csv", rs::kernel_csv(rf));
    ctx.summary["separability_index"] = rs::separability_index(rf);
    ctx.summary["imag_residue"] = rf.imag_residue;

    if (ctx.cfg.analysis.value("crosscheck", false)) {
        // kernel-formula prediction vs direct piecewise simulation
        const rs::StimulusField field = ctx.cfg.stimulus.build(ctx.cfg.seed);
        const auto drive = rs::compute_drive_traces(field, ctx.cfg.kernels(lay), lay,
                                                    ctx.cfg.cells, ctx.cfg.horizon_ms,
                                                    ctx.cfg.integrator.dt_ms,
                                                    ctx.cfg.stimulus.pixel_mm);
        Eigen::MatrixXd predicted = rs::linear_response_trace(sd, drive, ctx.cfg.cells);
        // the kernel formula describes deviations about the rest state, so start the
        // simulation there and shift the prediction accordingly
        const Eigen::VectorXd rest = op.matrix.fullPivLu().solve(-op.constant);
        predicted.colwise() += rest;
        rs::Trajectory traj = rs::integrate_piecewise(
            rest, lay, w, ctx.cfg.cells, rs::drive_forcing(drive, int(rest.size())),
            ctx.cfg.horizon_ms, ctx.cfg.integrator);
        double num = 0, den = 0;
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            const int col = std::min(int(std::round(traj.times[k] / drive.dt_ms)),
                                     int(predicted.cols()) - 1);
            const double a = traj.states[k][cell], b = predicted(cell, col);
            num += (a - b) * (a - b);
            den += b * b;
        }
        const double rel = std::sqrt(num / std::max(den, 1e-300));
        ctx.summary["crosscheck_rel_l2"] = rel;
        ctx.summary["crosscheck_pass"] = rel < 1e-3;
    }
}

void run_impulse(RunContext& ctx) {
    const rs::LayerLayout lay = ctx.cfg.layout();
    const auto w = ctx.cfg.weights(lay);
    const int cell = ctx.cfg.analysis.value("cell", lay.n_b() + lay.n_a());
    const double amplitude = ctx.cfg.analysis.value("amplitude", 0.01);
    const double pulse_ms = ctx.cfg.analysis.value("pulse_ms", 1.0);
    const auto ir = rs::impulse_response(cell, lay, w, ctx.cfg.cells, ctx.cfg.kernels(lay),
                                         amplitude, pulse_ms, ctx.cfg.horizon_ms,
                                         ctx.cfg.integrator, ctx.cfg.stimulus.pixel_mm);
    rs::write_text_atomic(ctx.out / "impulse.csv",
                          rs::lag_series_csv(ir.times_ms, ir.response, nullptr, "response_mv"));
    ctx.summary["visit_count"] = ir.visit_count;
}

void run_resonance(RunContext& ctx) {
    const rs::LayerLayout lay = ctx.cfg.layout();
    const auto w = ctx.cfg.weights(lay);
    const auto op = rest_operator(ctx.cfg, lay, w);
    const int cell = ctx.cfg.analysis.value("cell", 0);
    const double f_min = ctx.cfg.analysis.value("f_min_per_ms", 1e-3);
    const double f_max = ctx.cfg.analysis.value("f_max_per_ms", 1.0);
    const int nf = ctx.cfg.analysis.value("n_freqs", 200);
    Eigen::VectorXd probe = Eigen::VectorXd::Ones(op.dim());
    if (ctx.cfg.analysis.contains("probe_cell")) {
        probe.setZero();
        probe[ctx.cfg.analysis["probe_cell"].get<int>()] = 1.0;
    }
    const auto scan = rs::resonance_scan(cell, op.matrix,probe,
                                         Eigen::VectorXd::LinSpaced(nf, f_min, f_max));
    std::ostringstream csv;
    csv << "freq_per_ms,amplitude\n";
    for (Eigen::Index k = 0; k < scan.freqs_per_ms.size(); ++k)
        csv << rs::csv::format(scan.freqs_per_ms[k]) << ","
            << rs::csv::format(scan.amplitudes[k]) << "\n";
    rs::write_text_atomic(ctx.out / "resonance.csv", csv.str());
    json peaks = json::array();
    for (const auto& p : scan.peaks)
        peaks.push_back({{"freq_per_ms", p.freq_per_ms}, {"prominence", p.prominence}});
    ctx.summary["peaks"] = peaks;
}

void run_simulate(RunContext& ctx) {
    const rs::LayerLayout lay = ctx.cfg.layout();
    const auto w = ctx.cfg.weights(lay);
    const rs::StimulusField field = ctx.cfg.stimulus.build(ctx.cfg.seed);
    const auto drive = rs::compute_drive_traces(field, ctx.cfg.kernels(lay), lay, ctx.cfg.cells,
                                                ctx.cfg.horizon_ms, ctx.cfg.integrator.dt_ms,
                                                ctx.cfg.stimulus.pixel_mm);
    const int dim = state_dim(ctx.cfg, lay);
    const auto rest = rest_operator(ctx.cfg, lay, w);
    const Eigen::VectorXd x0 = rs::fixed_point(rest, lay, ctx.cfg.cells).state;
    rs::Trajectory traj =
        rs::integrate_piecewise(x0, lay, w, ctx.cfg.cells, rs::drive_forcing(drive, dim),
                                ctx.cfg.horizon_ms, ctx.cfg.integrator);
    Eigen::VectorXd times(traj.times.size());
    Eigen::MatrixXd states(dim, Eigen::Index(traj.states.size()));
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        times[Eigen::Index(k)] = traj.times[k];
        states.col(Eigen::Index(k)) = traj.states[k];
    }
    rs::write_text_atomic(ctx.out / "trajectory.csv", rs::trajectory_csv(times, states));
    ctx.summary["visit_count"] = traj.visits.size();

    if (ctx.cfg.analysis.value("spikes", false)) {
        // resample ganglion voltages to the uniform bin grid, then LNP spikes
        const int ng = lay.n_g();
        rs::SpikeRaster raster = rs::SpikeRaster::zeros(ctx.cfg.trials, ng, 0, ctx.cfg.bin_ms);
        for (int tr = 0; tr < ctx.cfg.trials; ++tr) {
            Eigen::MatrixXd vg(ng, Eigen::Index(traj.states.size()));
            for (std::size_t k = 0; k < traj.states.size(); ++k)
                vg.col(Eigen::Index(k)) = traj.states[k].segment(lay.n_b() + lay.n_a(), ng);
            rs::SpikeRaster one =
                rs::generate_lnp_spikes(vg, ctx.cfg.integrator.dt_ms, ctx.cfg.cells.theta_g,
                                        ctx.cfg.cells.sigma_g, ctx.cfg.bin_ms, ctx.cfg.seed,
                                        std::uint64_t(tr));
            if (tr == 0) raster = rs::SpikeRaster::zeros(ctx.cfg.trials, ng, one.n_bins,
                                                         ctx.cfg.bin_ms);
            for (int g = 0; g < ng; ++g)
                for (int b = 0; b < one.n_bins; ++b) raster.at(tr, g, b) = one.at(0, g, b);
        }
        rs::write_text_atomic(ctx.out / "raster.csv", rs::raster_csv(raster));
    }
}

void run_sde(RunContext& ctx) {
    const rs::LayerLayout lay = ctx.cfg.layout();
    const auto w = ctx.cfg.weights(lay);
    const int dim = state_dim(ctx.cfg, lay);
    Eigen::VectorXd sigma = Eigen::VectorXd::Zero(dim);
    sigma.head(lay.n_b()).setConstant(ctx.cfg.cells.sigma_b);
    const double burn_in = ctx.cfg.analysis.value("burn_in_ms", 5.0 * ctx.cfg.horizon_ms / 10.0);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    std::size_t count = 0;
    for (int tr = 0; tr < ctx.cfg.trials; ++tr) {
        rs::Trajectory traj =
            rs::integrate_sde(x0, lay, w, ctx.cfg.cells, rs::zero_forcing(dim), sigma,
                              ctx.cfg.horizon_ms, ctx.cfg.sde_dt_ms, ctx.cfg.seed,
                              std::uint64_t(tr));
        if (tr == 0) {
            Eigen::VectorXd times(traj.times.size());
            Eigen::MatrixXd states(dim, Eigen::Index(traj.states.size()));
            for (std::size_t k = 0; k < traj.times.size(); ++k) {
                times[Eigen::Index(k)] = traj.times[k];
                states.col(Eigen::Index(k)) = traj.states[k];
            }
            rs::write_text_atomic(ctx.out / "trajectory_trial0.csv",
                                  rs::trajectory_csv(times, states));
        }
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            if (traj.times[k] < burn_in) continue;
            mean += traj.states[k];
            cov += traj.states[k] * traj.states[k].transpose();
            ++count;
        }
    }
    if (count > 0) {
        mean /= double(count);
        cov = cov / double(count) - mean * mean.transpose();
    }
    rs::csv::write_matrix(ctx.out / "covariance_empirical.csv", cov);
    ctx.summary["samples"] = count;
}

void run_correlations(RunContext& ctx) {
    const rs::LayerLayout lay = ctx.cfg.layout();
    const auto w = ctx.cfg.weights(lay);
    const auto op = rest_operator(ctx.cfg, lay, w);
    const rs::SpectralData sd = rs::eigendecompose(op.matrix);
    rs::WhiteNoiseCorrelation corr(sd, ctx.cfg.cells.sigma_b);
    rs::csv::write_matrix(ctx.out / "covariance.csv", corr(0.0, 0.0));
    const int c1 = ctx.cfg.analysis.value("cell1", 0);
    const int c2 = ctx.cfg.analysis.value("cell2", 0);
    const double lag_max = ctx.cfg.analysis.value("lag_max_ms", 50.0);
    const int nl = ctx.cfg.analysis.value("n_lags", 101);
    Eigen::VectorXd lags = Eigen::VectorXd::LinSpaced(nl, 0.0, lag_max);
    Eigen::VectorXd vals(nl);
    for (int k = 0; k < nl; ++k) vals[k] = corr(0.0, lags[k])(c1, c2);
    rs::write_text_atomic(ctx.out / "correlation_pair.csv",
                          rs::lag_series_csv(lags, vals, nullptr, "correlation"));
    ctx.summary["variance_cell1"] = corr.variance(c1);
}

void run_spike_stats(RunContext& ctx) {
    const rs::LayerLayout lay = ctx.cfg.layout();
    const auto w = ctx.cfg.weights(lay);
    const int dim = state_dim(ctx.cfg, lay);
    const int ng = lay.n_g();
    Eigen::VectorXd sigma = Eigen::VectorXd::Zero(dim);
    sigma.head(lay.n_b()).setConstant(ctx.cfg.cells.sigma_b);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
    rs::SpikeRaster raster = rs::SpikeRaster::zeros(ctx.cfg.trials, ng, 0, ctx.cfg.bin_ms);
    for (int tr = 0; tr < ctx.cfg.trials; ++tr) {
        rs::Trajectory traj =
            rs::integrate_sde(x0, lay, w, ctx.cfg.cells, rs::zero_forcing(dim), sigma,
                              ctx.cfg.horizon_ms, ctx.cfg.sde_dt_ms, ctx.cfg.seed,
                              std::uint64_t(tr));
        Eigen::MatrixXd vg(ng, Eigen::Index(traj.states.size()));
        for (std::size_t k = 0; k < traj.states.size(); ++k)
            vg.col(Eigen::Index(k)) = traj.states[k].segment(lay.n_b() + lay.n_a(), ng);
        rs::SpikeRaster one =
            rs::generate_lnp_spikes(vg, ctx.cfg.sde_dt_ms, ctx.cfg.cells.theta_g,
                                    ctx.cfg.cells.sigma_g, ctx.cfg.bin_ms, ctx.cfg.seed,
                                    std::uint64_t(tr));
        if (tr == 0)
            raster = rs::SpikeRaster::zeros(ctx.cfg.trials, ng, one.n_bins, ctx.cfg.bin_ms);
        for (int g = 0; g < ng; ++g)
            for (int b = 0; b < one.n_bins; ++b) raster.at(tr, g, b) = one.at(0, g, b);
    }
    rs::write_text_atomic(ctx.out / "raster.csv", rs::raster_csv(raster));
    const auto st = rs::empirical_spike_statistics(raster);
    std::ostringstream rates;
    rates << "neuron,rate_per_bin,se\n";
    for (std::size_t n = 0; n < st.rates.size(); ++n)
        rates << n << "," << rs::csv::format(st.rates[n].value) << ","
              << rs::csv::format(st.rates[n].std_error) << "\n";
    rs::write_text_atomic(ctx.out / "rates.csv", rates.str());
    std::ostringstream pc;
    pc << "neuron1,neuron2,lag_bins,correlation,se\n";
    for (const auto& c : st.correlations)
        pc << c.neuron1 << "," << c.neuron2 << "," << c.lag_bins << ","
           << rs::csv::format(c.estimate.value) << "," << rs::csv::format(c.estimate.std_error)
           << "\n";
    rs::write_text_atomic(ctx.out / "pair_correlations.csv", pc.str());
    ctx.summary["n_trials"] = raster.n_trials;
}

std::function<double(int, double)> gif_stimulus_fn(const json& spec, int n_neurons) {
    const std::string type = spec.value("type", "none");
    const double amp = spec.value("amplitude", 0.0);
    if (type == "none") return [](int, double) { return 0.0; };
    if (type == "constant") {
        std::vector<int> neurons = spec.value("neurons", std::vector<int>{});
        const double t0 = spec.value("t0_ms", 0.0);
        const double t1 = spec.value("t1_ms", 1e30);
        std::vector<char> mask(std::size_t(n_neurons), neurons.empty() ? 1 : 0);
        for (int k : neurons)
            if (k >= 0 && k < n_neurons) mask[std::size_t(k)] = 1;
        return [=](int k, double t) {
            return (mask[std::size_t(k)] && t >= t0 && t < t1) ? amp : 0.0;
        };
    }
    if (type == "moving_bar") {
        // bar sweeping around the ring at constant speed (neurons per ms)
        const double speed = spec.value("speed_neurons_per_ms", 0.05);
        const double width = spec.value("width_neurons", 1.5);
        const double t0 = spec.value("t0_ms", 0.0);
        return [=](int k, double t) {
            if (t < t0) return 0.0;
            double d = std::fmod(std::abs(double(k) - speed * (t - t0)), double(n_neurons));
            d = std::min(d, double(n_neurons) - d);
            return amp * std::exp(-0.5 * d * d / (width * width));
        };
    }
    throw rs::config_error("unknown gif stimulus type '" + type + "'");
}

void run_gif_sim(RunContext& ctx) {
    if (!ctx.cfg.gif) throw rs::config_error("gif-sim requires a gif block in the config");
    const rs::GifNetwork& net = *ctx.cfg.gif;
    const auto stim = gif_stimulus_fn(ctx.cfg.gif_stimulus, net.n_neurons);
    const rs::GifRun run = rs::simulate_gif(net, stim, ctx.cfg.horizon_ms, ctx.cfg.trials,
                                            ctx.cfg.seed);
    rs::write_text_atomic(ctx.out / "raster.csv", rs::raster_csv(run.raster));
    const Eigen::MatrixXd& v0 = run.voltages[0];
    Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(v0.cols(), 0.0,
                                                       (double(v0.cols()) - 1) * net.bin_ms);
    rs::write_text_atomic(ctx.out / "voltages_trial0.csv", rs::trajectory_csv(times, v0));
    json rates = json::array();
    for (int k = 0; k < net.n_neurons; ++k) {
        double s = 0;
        for (int tr = 0; tr < run.raster.n_trials; ++tr)
            for (int b = 0; b < run.raster.n_bins; ++b) s += run.raster.at(tr, k, b);
        rates.push_back(s / double(run.raster.n_trials * run.raster.n_bins));
    }
    ctx.summary["rates_per_bin"] = rates;
    ctx.summary["memory_depth_bins"] = net.memory_depth_bins();
}

void run_linear_response(RunContext& ctx) {
    if (!ctx.cfg.gif)
        throw rs::config_error("linear-response requires a gif block in the config");
    const rs::GifNetwork& net = *ctx.cfg.gif;
    const int neuron = ctx.cfg.analysis.value("neuron", 0);
    const int n_lags = ctx.cfg.analysis.value("n_lags", 50);
    const double spont_horizon =
        ctx.cfg.analysis.value("spontaneous_horizon_ms", 20.0 * ctx.cfg.horizon_ms);
    const int burn_in_bins = ctx.cfg.analysis.value("burn_in_bins", 200);

    const auto stim = gif_stimulus_fn(ctx.cfg.gif_stimulus, net.n_neurons);
    const rs::GifRun stimulated = rs::simulate_gif(net, stim, ctx.cfg.horizon_ms,
                                                   ctx.cfg.trials, ctx.cfg.seed);
    const rs::GifRun spont = rs::simulate_gif(
        net, [](int, double) { return 0.0; }, spont_horizon, 1, ctx.cfg.seed + 1);

    const auto f = rs::spike_indicator(neuron);
    const rs::DeltaTrace dm =
        rs::delta_average(f, stimulated.raster, spont.raster, burn_in_bins);
    Eigen::VectorXd lags = Eigen::VectorXd::LinSpaced(dm.values.size(), 0.0,
                                                      (double(dm.values.size()) - 1) * net.bin_ms);
    rs::write_text_atomic(ctx.out / "delta_mu.csv",
                          rs::lag_series_csv(lags, dm.values, &dm.std_errors, "delta_mu"));

    Eigen::VectorXd s(dm.values.size());
    for (Eigen::Index b = 0; b < s.size(); ++b) s[b] = stim(neuron, double(b) * net.bin_ms);
    const auto est = rs::estimate_response_kernel(dm.values, s, n_lags);
    Eigen::VectorXd klags =
        Eigen::VectorXd::LinSpaced(n_lags, 0.0, (n_lags - 1) * net.bin_ms);
    rs::write_text_atomic(ctx.out / "kernel.csv",
                          rs::lag_series_csv(klags, est.kernel, nullptr, "kernel"));
    ctx.summary["ridge_lambda"] = est.ridge_lambda;
    ctx.summary["fit_residual"] = est.fit_residual;
    ctx.summary["gram_condition"] = est.gram_condition;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layered-retina model toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    long long seed_override = -1;
    bool strict = false;

    const std::vector<std::pair<std::string, void (*)(RunContext&)>> subcommands = {
        {"spectrum", run_spectrum},   {"rf", run_rf},
        {"impulse", run_impulse},     {"resonance", run_resonance},
        {"simulate", run_simulate},   {"sde", run_sde},
        {"correlations", run_correlations}, {"spike-stats", run_spike_stats},
        {"gif-sim", run_gif_sim},     {"linear-response", run_linear_response}};

    for (const auto& [name, fn] : subcommands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "configuration file")->required();
        sub->add_option("--seed", seed_override, "override the master seed");
        sub->add_option("--out", out_override, "override the output directory");
        sub->add_flag("--strict", strict, "treat accuracy warnings and unknown keys as errors");
        auto run = fn; // capture by value for the callback
        std::string sub_name = name;
        sub->callback([&, run, sub_name] {
            RunContext ctx = make_context(config_path, out_override, seed_override, strict);
            run(ctx);
            ctx.emit(sub_name);
            std::cout << sub_name << ": ok -> " << ctx.out.string() << "\n";
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const rs::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rs::config_error::exit_code;
    } catch (const rs::accuracy_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rs::accuracy_error::exit_code;
    } catch (const rs::regime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rs::regime_error::exit_code;
    } catch (const rs::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rs::io_error::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
