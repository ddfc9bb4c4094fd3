#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "retinasim/connectivity.hpp"
#include "retinasim/errors.hpp"
#include "retinasim/gif.hpp"
#include "retinasim/integrate.hpp"
#include "retinasim/layout.hpp"
#include "retinasim/stimulus.hpp"

namespace retinasim {

namespace detail {

/// Accumulates validation problems so a bad config reports every issue at
/// once instead of failing on the first.
struct ConfigErrors {
    std::vector<std::string> messages;
    void add(const std::string& where, const std::string& what) {
        messages.push_back(where + ": " + what);
    }
    void raise_if_any() const {
        if (messages.empty()) return;
        std::string joined = "configuration invalid (" +
                             std::to_string(messages.size()) + " problem(s)):";
        for (const auto& m : messages) joined += "\n  - " + m;
        throw config_error(joined);
    }
};

inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                       const std::string& where, ConfigErrors& errs, bool strict) {
    if (!strict || !obj.is_object()) return;
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) errs.add(where, "unknown key '" + key + "'");
}

template <typename T>
T get_or(const nlohmann::json& obj, const std::string& key, T fallback,
         const std::string& where, ConfigErrors& errs) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        errs.add(where + "." + key, e.what());
        return fallback;
    }
}

/// FNV-1a over the canonical (sorted-key) dump; stable across runs, good
/// enough to fingerprint a config in provenance records.
inline std::uint64_t fingerprint(const nlohmann::json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : j.dump()) {
        h ^= std::uint8_t(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

struct StimulusConfig {
    std::string type = "none"; // none | flash | moving_bar | chirp | sine | frames
    double contrast = 1.0;
    double t0_ms = 0.0, t1_ms = 100.0;          // flash / chirp window
    double width_mm = 0.2, speed_mm_per_ms = 0; // moving bar
    double x0_mm = 0.0;
    double f0_per_ms = 0.001, f1_per_ms = 0.05; // chirp sweep / sine frequency
    std::filesystem::path frames_path;
    double pixel_mm = 0.05; // quadrature pitch, also the noise pixel pitch
    double noise_sigma_s = 0.0;
    double noise_frame_ms = 1.0;

    StimulusField build(std::uint64_t seed) const {
        StimulusField f;
        if (type == "none")
            f = StimulusField();
        else if (type == "flash")
            f = full_field_flash(contrast, t0_ms, t1_ms);
        else if (type == "moving_bar")
            f = moving_bar(contrast, width_mm, speed_mm_per_ms, x0_mm);
        else if (type == "chirp")
            f = chirp(contrast, f0_per_ms, f1_per_ms, t0_ms, t1_ms);
        else if (type == "sine")
            f = full_field_sine(contrast, f0_per_ms);
        else if (type == "frames")
            f = frame_stimulus(read_frame_sequence(frames_path));
        else
            throw config_error("unknown stimulus type '" + type + "'");
        if (noise_sigma_s != 0.0)
            f.with_noise(noise_sigma_s, pixel_mm, noise_frame_ms, seed);
        return f;
    }
};

struct ExperimentConfig {
    // network
    double edge_length_mm = 1.0;
    std::array<double, 3> spacing_mm = {1.0, 1.0, 1.0};
    CellParameters cells;       // sized after layout() is known
    nlohmann::json weight_spec; // per-block profile descriptions
    std::filesystem::path base_dir; // for resolving relative file references

    // drive
    BipolarKernel kernel;
    StimulusConfig stimulus;

    // integration
    IntegratorConfig integrator;
    double horizon_ms = 200.0;
    int trials = 1;
    double bin_ms = 1.0;
    double sde_dt_ms = 0.01;

    // gIF block (used by gif-sim / linear-response)
    std::optional<GifNetwork> gif;
    nlohmann::json gif_stimulus; // amplitude / per-neuron current description

    nlohmann::json analysis; // free-form per-subcommand knobs
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";
    bool strict = false;

    nlohmann::json raw; // the parsed file, echoed into provenance

    LayerLayout layout() const { return LayerLayout(edge_length_mm, spacing_mm); }

    ConnectivityWeights weights(const LayerLayout& lay) const;
    std::vector<BipolarKernel> kernels(const LayerLayout& lay) const {
        return std::vector<BipolarKernel>(std::size_t(lay.n_b()), kernel);
    }

    std::uint64_t fingerprint() const { return detail::fingerprint(raw); }
};

inline Eigen::MatrixXd build_weight_block(const nlohmann::json& spec, const LayerLayout& lay,
                                          Layer post, Layer pre,
                                          const std::filesystem::path& base_dir) {
    const std::string profile = spec.value("profile", "zero");
    const int np = lay.cell_count(post), nq = lay.cell_count(pre);
    if (profile == "zero") return Eigen::MatrixXd::Zero(np, nq);
    if (profile == "one_to_one")
        return one_to_one_profile(np, nq, spec.value("w0", 0.0));
    if (profile == "gaussian")
        return gaussian_profile(lay, post, pre, spec.value("w0", 0.0),
                                spec.value("radius_mm", 0.1));
    if (profile == "file") {
        std::filesystem::path p = spec.value("path", "");
        if (p.is_relative()) p = base_dir / p;
        return matrix_file_profile(p, np, nq);
    }
    throw config_error("unknown connectivity profile '" + profile + "'");
}

inline ConnectivityWeights ExperimentConfig::weights(const LayerLayout& lay) const {
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    auto block = [&](const char* key, Layer post, Layer pre) {
        if (weight_spec.contains(key))
            return build_weight_block(weight_spec.at(key), lay, post, pre, base_dir);
        return Eigen::MatrixXd(Eigen::MatrixXd::Zero(lay.cell_count(post), lay.cell_count(pre)));
    };
    w.w_ab = block("w_ab", Layer::B, Layer::A);
    w.w_ba = block("w_ba", Layer::A, Layer::B);
    w.w_bg = block("w_bg", Layer::G, Layer::B);
    w.w_ag = block("w_ag", Layer::G, Layer::A);
    w.gamma_ab = block("gamma_ab", Layer::B, Layer::A);
    w.gamma_ba = block("gamma_ba", Layer::A, Layer::B);
    w.validate();
    return w;
}

inline GifNetwork parse_gif_network(const nlohmann::json& g, const std::filesystem::path& base_dir,
                                    detail::ConfigErrors& errs, bool strict) {
    using detail::get_or;
    detail::check_keys(g,
                       {"n_neurons", "capacitance", "leak_g", "leak_reversal", "threshold",
                        "reset", "sigma_b", "bin_ms", "alpha_degree", "eps_mem", "tau_alpha_ms",
                        "weights"},
                       "gif", errs, strict);
    const int n = get_or(g, "n_neurons", 0, "gif", errs);
    if (n <= 0) {
        errs.add("gif.n_neurons", "must be a positive integer");
        return GifNetwork{};
    }
    GifNetwork net = GifNetwork::uniform(n, get_or(g, "capacitance", 1.0, "gif", errs),
                                         get_or(g, "leak_g", 0.1, "gif", errs),
                                         get_or(g, "leak_reversal", 0.0, "gif", errs));
    net.threshold = get_or(g, "threshold", 1.0, "gif", errs);
    net.reset = get_or(g, "reset", 0.0, "gif", errs);
    net.sigma_b = get_or(g, "sigma_b", 0.0, "gif", errs);
    net.bin_ms = get_or(g, "bin_ms", 1.0, "gif", errs);
    net.alpha_degree = get_or(g, "alpha_degree", 0, "gif", errs);
    net.eps_mem = get_or(g, "eps_mem", 1e-6, "gif", errs);
    net.tau_alpha.setConstant(get_or(g, "tau_alpha_ms", 10.0, "gif", errs));

    if (g.contains("weights")) {
        const auto& w = g.at("weights");
        const std::string profile = w.value("profile", "zero");
        detail::check_keys(w,
                           {"profile", "g_excite", "e_excite", "g_inhibit", "e_inhibit",
                            "g_max_path", "reversal_path"},
                           "gif.weights", errs, strict);
        if (profile == "ring") {
            // nearest-neighbour excitation, second-neighbour inhibition
            const double ge = w.value("g_excite", 0.0), ee = w.value("e_excite", 1.0);
            const double gi = w.value("g_inhibit", 0.0), ei = w.value("e_inhibit", -1.0);
            if (ge < 0 || gi < 0)
                errs.add("gif.weights", "ring conductances must be nonnegative");
            if (ee < 0 || ei > 0)
                errs.add("gif.weights", "excitatory reversal must be >= 0 and inhibitory <= 0");
            for (int k = 0; k < n; ++k) {
                for (int d : {1, n - 1}) {
                    net.g_max(k, (k + d) % n) = ge;
                    net.reversal(k, (k + d) % n) = ee;
                }
                for (int d : {2, n - 2}) {
                    net.g_max(k, (k + d) % n) = gi;
                    net.reversal(k, (k + d) % n) = ei;
                }
            }
        } else if (profile == "file") {
            std::filesystem::path gp = w.value("g_max_path", "");
            std::filesystem::path rp = w.value("reversal_path", "");
            if (gp.is_relative()) gp = base_dir / gp;
            if (rp.is_relative()) rp = base_dir / rp;
            net.g_max = matrix_file_profile(gp, n, n);
            net.reversal = matrix_file_profile(rp, n, n);
        } else if (profile != "zero") {
            errs.add("gif.weights.profile", "unknown profile '" + profile + "'");
        }
    }
    return net;
}

/// Parse and fully validate a configuration file. Reports every validation
/// problem, not just the first.
inline ExperimentConfig load_config(const std::filesystem::path& path, bool strict = false) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true); // allow comments
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config parse failure: ") + e.what());
    }

    using detail::get_or;
    detail::ConfigErrors errs;
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.strict = strict || j.value("strict", false);
    cfg.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    detail::check_keys(j,
                       {"seed", "output_dir", "strict", "network", "kernel", "stimulus",
                        "integrator", "analysis", "gif", "gif_stimulus"},
                       "<root>", errs, cfg.strict);

    cfg.seed = get_or<std::uint64_t>(j, "seed", 1, "<root>", errs);
    cfg.output_dir = std::filesystem::path(
        get_or<std::string>(j, "output_dir", "out", "<root>", errs));

    // --- network -------------------------------------------------------------
    const nlohmann::json net = j.value("network", nlohmann::json::object());
    detail::check_keys(net,
                       {"edge_length_mm", "spacing_b_mm", "spacing_a_mm", "spacing_g_mm",
                        "tau_b_ms", "tau_a_ms", "tau_g_ms", "theta_b_mv", "theta_a_mv",
                        "theta_g_mv", "sigma_g_mv", "sigma_b", "gain_control", "weights"},
                       "network", errs, cfg.strict);
    cfg.edge_length_mm = get_or(net, "edge_length_mm", 1.0, "network", errs);
    cfg.spacing_mm = {get_or(net, "spacing_b_mm", 1.0, "network", errs),
                      get_or(net, "spacing_a_mm", 1.0, "network", errs),
                      get_or(net, "spacing_g_mm", 1.0, "network", errs)};

    std::optional<LayerLayout> lay;
    try {
        lay.emplace(cfg.edge_length_mm, cfg.spacing_mm);
    } catch (const config_error& e) {
        errs.add("network", e.what());
    }

    const double tb = get_or(net, "tau_b_ms", 10.0, "network", errs);
    const double ta = get_or(net, "tau_a_ms", 10.0, "network", errs);
    const double tg = get_or(net, "tau_g_ms", 5.0, "network", errs);
    if (lay) {
        cfg.cells = CellParameters::uniform(*lay, tb, ta, tg);
    }
    cfg.cells.theta_b = get_or(net, "theta_b_mv", 0.0, "network", errs);
    cfg.cells.theta_a = get_or(net, "theta_a_mv", 0.0, "network", errs);
    cfg.cells.theta_g = get_or(net, "theta_g_mv", 0.0, "network", errs);
    cfg.cells.sigma_g = get_or(net, "sigma_g_mv", 1.0, "network", errs);
    cfg.cells.sigma_b = get_or(net, "sigma_b", 0.0, "network", errs);
    if (net.contains("gain_control")) {
        const auto& gc = net.at("gain_control");
        detail::check_keys(gc, {"enabled", "tau_act_ms", "h_b", "theta_act"}, "network.gain_control",
                           errs, cfg.strict);
        cfg.cells.gain_control = get_or(gc, "enabled", true, "network.gain_control", errs);
        cfg.cells.tau_act = get_or(gc, "tau_act_ms", 100.0, "network.gain_control", errs);
        cfg.cells.h_b = get_or(gc, "h_b", 0.0, "network.gain_control", errs);
        cfg.cells.theta_act = get_or(gc, "theta_act", 2.0 / 3.0, "network.gain_control", errs);
    }
    try {
        if (lay) cfg.cells.validate();
    } catch (const config_error& e) {
        errs.add("network", e.what());
    }

    cfg.weight_spec = net.value("weights", nlohmann::json::object());
    if (lay) {
        try {
            cfg.weights(*lay); // full sign/shape validation up front
        } catch (const std::exception& e) {
            errs.add("network.weights", e.what());
        }
    }

    // --- bipolar kernel ------------------------------------------------------
    const nlohmann::json kj = j.value("kernel", nlohmann::json::object());
    detail::check_keys(kj, {"gain_mv", "spatial", "temporal"}, "kernel", errs, cfg.strict);
    cfg.kernel.gain_mv = get_or(kj, "gain_mv", 1.0, "kernel", errs);
    const nlohmann::json sj = kj.value("spatial", nlohmann::json::object());
    detail::check_keys(sj, {"center_amp", "center_sigma_mm", "surround_amp", "surround_sigma_mm"},
                       "kernel.spatial", errs, cfg.strict);
    cfg.kernel.spatial.center_amp = get_or(sj, "center_amp", 1.0, "kernel.spatial", errs);
    cfg.kernel.spatial.center_sigma_mm =
        get_or(sj, "center_sigma_mm", 0.1, "kernel.spatial", errs);
    cfg.kernel.spatial.surround_amp = get_or(sj, "surround_amp", 0.0, "kernel.spatial", errs);
    cfg.kernel.spatial.surround_sigma_mm =
        get_or(sj, "surround_sigma_mm", 0.3, "kernel.spatial", errs);
    if (!(cfg.kernel.spatial.center_sigma_mm > 0) || !(cfg.kernel.spatial.surround_sigma_mm > 0))
        errs.add("kernel.spatial", "sigmas must be positive");
    const nlohmann::json tj = kj.value("temporal", nlohmann::json::object());
    detail::check_keys(tj, {"a1", "tau1_ms", "a2", "tau2_ms", "extent_ms"}, "kernel.temporal",
                       errs, cfg.strict);
    cfg.kernel.temporal.a1 = get_or(tj, "a1", 1.0, "kernel.temporal", errs);
    cfg.kernel.temporal.tau1_ms = get_or(tj, "tau1_ms", 10.0, "kernel.temporal", errs);
    cfg.kernel.temporal.a2 = get_or(tj, "a2", 0.0, "kernel.temporal", errs);
    cfg.kernel.temporal.tau2_ms = get_or(tj, "tau2_ms", 40.0, "kernel.temporal", errs);
    cfg.kernel.temporal.extent_ms = get_or(tj, "extent_ms", 300.0, "kernel.temporal", errs);
    if (!(cfg.kernel.temporal.tau1_ms > 0) || !(cfg.kernel.temporal.tau2_ms > 0))
        errs.add("kernel.temporal", "time constants must be positive");

    // --- stimulus ------------------------------------------------------------
    const nlohmann::json stj = j.value("stimulus", nlohmann::json::object());
    detail::check_keys(stj,
                       {"type", "contrast", "t0_ms", "t1_ms", "width_mm", "speed_mm_per_ms",
                        "x0_mm", "f0_per_ms", "f1_per_ms", "frames_path", "pixel_mm",
                        "noise_sigma_s", "noise_frame_ms"},
                       "stimulus", errs, cfg.strict);
    cfg.stimulus.type = get_or<std::string>(stj, "type", "none", "stimulus", errs);
    cfg.stimulus.contrast = get_or(stj, "contrast", 1.0, "stimulus", errs);
    cfg.stimulus.t0_ms = get_or(stj, "t0_ms", 0.0, "stimulus", errs);
    cfg.stimulus.t1_ms = get_or(stj, "t1_ms", 100.0, "stimulus", errs);
    cfg.stimulus.width_mm = get_or(stj, "width_mm", 0.2, "stimulus", errs);
    cfg.stimulus.speed_mm_per_ms = get_or(stj, "speed_mm_per_ms", 0.0, "stimulus", errs);
    cfg.stimulus.x0_mm = get_or(stj, "x0_mm", 0.0, "stimulus", errs);
    cfg.stimulus.f0_per_ms = get_or(stj, "f0_per_ms", 0.001, "stimulus", errs);
    cfg.stimulus.f1_per_ms = get_or(stj, "f1_per_ms", 0.05, "stimulus", errs);
    cfg.stimulus.pixel_mm = get_or(stj, "pixel_mm", 0.05, "stimulus", errs);
    cfg.stimulus.noise_sigma_s = get_or(stj, "noise_sigma_s", 0.0, "stimulus", errs);
    cfg.stimulus.noise_frame_ms = get_or(stj, "noise_frame_ms", 1.0, "stimulus", errs);
    cfg.cells.sigma_s = cfg.stimulus.noise_sigma_s;
    {
        std::filesystem::path fp = get_or<std::string>(stj, "frames_path", "", "stimulus", errs);
        if (!fp.empty() && fp.is_relative()) fp = cfg.base_dir / fp;
        cfg.stimulus.frames_path = fp;
        static const std::set<std::string> known_types = {"none",  "flash", "moving_bar",
                                                          "chirp", "sine",  "frames"};
        if (!known_types.count(cfg.stimulus.type))
            errs.add("stimulus.type", "unknown stimulus type '" + cfg.stimulus.type + "'");
        if (cfg.stimulus.type == "frames" && !std::filesystem::exists(cfg.stimulus.frames_path))
            errs.add("stimulus.frames_path",
                     "file not found: " + cfg.stimulus.frames_path.string());
        if (!(cfg.stimulus.pixel_mm > 0)) errs.add("stimulus.pixel_mm", "must be positive");
    }

    // --- integrator ----------------------------------------------------------
    const nlohmann::json ij = j.value("integrator", nlohmann::json::object());
    detail::check_keys(ij,
                       {"dt_ms", "event_tol_mv", "max_bisections", "max_visits", "horizon_ms",
                        "trials", "bin_ms", "sde_dt_ms"},
                       "integrator", errs, cfg.strict);
    cfg.integrator.dt_ms = get_or(ij, "dt_ms", 0.1, "integrator", errs);
    cfg.integrator.event_tol_mv = get_or(ij, "event_tol_mv", 1e-9, "integrator", errs);
    cfg.integrator.max_bisections = get_or(ij, "max_bisections", 200, "integrator", errs);
    cfg.integrator.max_visits = get_or<long>(ij, "max_visits", 1000000, "integrator", errs);
    cfg.horizon_ms = get_or(ij, "horizon_ms", 200.0, "integrator", errs);
    cfg.trials = get_or(ij, "trials", 1, "integrator", errs);
    cfg.bin_ms = get_or(ij, "bin_ms", 1.0, "integrator", errs);
    cfg.sde_dt_ms = get_or(ij, "sde_dt_ms", 0.01, "integrator", errs);
    if (!(cfg.integrator.dt_ms > 0)) errs.add("integrator.dt_ms", "must be positive");
    if (!(cfg.horizon_ms > 0)) errs.add("integrator.horizon_ms", "must be positive");
    if (cfg.trials < 1) errs.add("integrator.trials", "must be at least 1");

    // --- gIF -----------------------------------------------------------------
    if (j.contains("gif")) {
        GifNetwork g = parse_gif_network(j.at("gif"), cfg.base_dir, errs, cfg.strict);
        try {
            if (errs.messages.empty()) g.validate();
        } catch (const config_error& e) {
            errs.add("gif", e.what());
        }
        cfg.gif = std::move(g);
    }
    cfg.gif_stimulus = j.value("gif_stimulus", nlohmann::json::object());

    cfg.analysis = j.value("analysis", nlohmann::json::object());

    errs.raise_if_any();
    return cfg;
}

/// Provenance record: everything needed to reproduce the run byte-for-byte.
inline nlohmann::json provenance_record(const ExperimentConfig& cfg,
                                        const std::string& subcommand) {
    nlohmann::json p;
    p["tool"] = "retinasim";
    p["version"] = "1.0.0";
    p["subcommand"] = subcommand;
    p["seed"] = cfg.seed;
    p["config_fingerprint"] = cfg.fingerprint();
    p["strict"] = cfg.strict;
    p["config"] = cfg.raw;
    return p;
}

} // namespace retinasim
