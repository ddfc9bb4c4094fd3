#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <utility>
#include <vector>

#include "retinasim/errors.hpp"
#include "retinasim/layout.hpp"

namespace retinasim {

// --- deterministic per-query noise ------------------------------------------

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

/// Standard normal deviate that is a pure function of its key, so repeated
/// evaluation at the same (seed, trial, cell) is bit-identical.
inline double keyed_gaussian(std::uint64_t seed, std::uint64_t trial, std::int64_t a,
                             std::int64_t b, std::int64_t c) {
    std::uint64_t h = splitmix64(seed);
    h = hash_combine(h, trial);
    h = hash_combine(h, std::uint64_t(a));
    h = hash_combine(h, std::uint64_t(b));
    h = hash_combine(h, std::uint64_t(c));
    const std::uint64_t u1 = splitmix64(h);
    const std::uint64_t u2 = splitmix64(u1);
    // Box-Muller on two (0,1] uniforms
    const double x1 = (double(u1 >> 11) + 1.0) * 0x1.0p-53;
    const double x2 = double(u2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(x1)) * std::cos(2.0 * M_PI * x2);
}
} // namespace detail

// --- stimulus fields ---------------------------------------------------------

/// Spatio-temporal contrast field S(x mm, y mm, t ms) in [-1, 1], made of a
/// deterministic part plus optional spatio-temporal white noise of intensity
/// sigma_s, discretized per (pixel, frame) and scaled by
/// 1/sqrt(pixel area * frame period) so the continuum delta-correlation
/// normalization is approached under refinement.
class StimulusField {
public:
    using Evaluator = std::function<double(double, double, double)>;

    StimulusField() : det_([](double, double, double) { return 0.0; }) {}
    explicit StimulusField(Evaluator det) : det_(std::move(det)) {}

    StimulusField& with_noise(double sigma_s, double pixel_mm, double frame_ms,
                              std::uint64_t seed) {
        if (!(pixel_mm > 0) || !(frame_ms > 0))
            throw config_error("noise discretization pitches must be positive");
        sigma_s_ = sigma_s;
        pixel_mm_ = pixel_mm;
        frame_ms_ = frame_ms;
        seed_ = seed;
        return *this;
    }

    double deterministic(double x, double y, double t) const { return det_(x, y, t); }
    double sigma_s() const { return sigma_s_; }

    double operator()(double x, double y, double t, std::uint64_t trial = 0) const {
        double v = det_(x, y, t);
        if (sigma_s_ != 0.0) {
            const auto ix = std::int64_t(std::floor(x / pixel_mm_));
            const auto iy = std::int64_t(std::floor(y / pixel_mm_));
            const auto k = std::int64_t(std::floor(t / frame_ms_));
            v += sigma_s_ * detail::keyed_gaussian(seed_, trial, ix, iy, k) /
                 std::sqrt(pixel_mm_ * pixel_mm_ * frame_ms_);
        }
        return v;
    }

private:
    Evaluator det_;
    double sigma_s_ = 0.0, pixel_mm_ = 1.0, frame_ms_ = 1.0;
    std::uint64_t seed_ = 0;
};

/// Uniform flash of contrast c on [t0, t1).
inline StimulusField full_field_flash(double contrast, double t0_ms, double t1_ms) {
    return StimulusField([=](double, double, double t) {
        return (t >= t0_ms && t < t1_ms) ? contrast : 0.0;
    });
}

/// Bar of Gaussian cross-section moving along x: S(x, y, t) = f(x - v t).
inline StimulusField moving_bar(double contrast, double width_mm, double speed_mm_per_ms,
                                double x0_mm) {
    return StimulusField([=](double x, double, double t) {
        const double u = (x - x0_mm - speed_mm_per_ms * t) / width_mm;
        return contrast * std::exp(-0.5 * u * u);
    });
}

/// Full-field sinusoid with linearly swept frequency on [t0, t1).
inline StimulusField chirp(double contrast, double f0_per_ms, double f1_per_ms,
                           double t0_ms, double t1_ms) {
    return StimulusField([=](double, double, double t) {
        if (t < t0_ms || t >= t1_ms) return 0.0;
        const double u = t - t0_ms;
        const double rate = (f1_per_ms - f0_per_ms) / (t1_ms - t0_ms);
        return contrast * std::sin(2.0 * M_PI * (f0_per_ms * u + 0.5 * rate * u * u));
    });
}

/// Full-field sinusoid at a fixed frequency (cycles per ms).
inline StimulusField full_field_sine(double contrast, double freq_per_ms) {
    return StimulusField([=](double, double, double t) {
        return contrast * std::sin(2.0 * M_PI * freq_per_ms * t);
    });
}

// --- frame-sequence files ----------------------------------------------------

struct FrameSequence {
    int width = 0, height = 0, frames = 0;
    double pixel_mm = 0, period_ms = 0;
    std::vector<float> data; // row-major per frame

    double sample(double x, double y, double t) const {
        const int k = int(std::floor(t / period_ms));
        const int ix = int(std::floor(x / pixel_mm));
        const int iy = int(std::floor(y / pixel_mm));
        if (k < 0 || k >= frames || ix < 0 || ix >= width || iy < 0 || iy >= height)
            return 0.0; // zero padding outside the recorded volume
        return data[std::size_t(k) * width * height + std::size_t(iy) * width + ix];
    }
};

/// File layout: one text header line "width,height,frames,pixel_mm,period_ms"
/// followed by raw little-endian float32 frames, row-major.
inline void write_frame_sequence(const std::filesystem::path& path, const FrameSequence& fs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << fs.width << "," << fs.height << "," << fs.frames << "," << fs.pixel_mm << ","
        << fs.period_ms << "\n";
    out.write(reinterpret_cast<const char*>(fs.data.data()),
              std::streamsize(fs.data.size() * sizeof(float)));
    if (!out) throw io_error("write failed: " + path.string());
}

inline FrameSequence read_frame_sequence(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path.string());
    FrameSequence fs;
    std::string header;
    if (!std::getline(in, header)) throw io_error("missing header in " + path.string());
    char c1, c2, c3, c4;
    std::istringstream hs(header);
    if (!(hs >> fs.width >> c1 >> fs.height >> c2 >> fs.frames >> c3 >> fs.pixel_mm >> c4 >>
          fs.period_ms) ||
        fs.width <= 0 || fs.height <= 0 || fs.frames <= 0 || fs.pixel_mm <= 0 ||
        fs.period_ms <= 0)
        throw io_error("bad frame-sequence header in " + path.string());
    fs.data.resize(std::size_t(fs.width) * fs.height * fs.frames);
    in.read(reinterpret_cast<char*>(fs.data.data()),
            std::streamsize(fs.data.size() * sizeof(float)));
    if (in.gcount() != std::streamsize(fs.data.size() * sizeof(float)))
        throw io_error("truncated frame data in " + path.string());
    return fs;
}

inline StimulusField frame_stimulus(FrameSequence fs) {
    auto shared = std::make_shared<FrameSequence>(std::move(fs));
    return StimulusField(
        [shared](double x, double y, double t) { return shared->sample(x, y, t); });
}

// --- bipolar receptive-field kernels -----------------------------------------

/// Difference-of-Gaussians spatial profile, centred at the owning cell.
struct SpatialDoG {
    double center_amp = 1.0, center_sigma_mm = 0.1;
    double surround_amp = 0.0, surround_sigma_mm = 0.3;

    double operator()(double dx, double dy) const {
        const double r2 = dx * dx + dy * dy;
        return center_amp * std::exp(-r2 / (2 * center_sigma_mm * center_sigma_mm)) -
               surround_amp * std::exp(-r2 / (2 * surround_sigma_mm * surround_sigma_mm));
    }
    /// Kernel truncated to zero beyond this radius.
    double truncation_radius_mm() const { return 3.0 * surround_sigma_mm; }
};

/// Biphasic temporal profile: difference of two gamma lobes, each normalized
/// to unit time integral. Vanishes at t = 0 as the OPL input formula requires.
struct BiphasicTemporal {
    double a1 = 1.0, tau1_ms = 10.0;
    double a2 = 0.0, tau2_ms = 40.0;
    double extent_ms = 300.0; // truncation horizon

    double operator()(double t) const {
        if (t < 0 || t > extent_ms) return 0.0;
        return a1 * t / (tau1_ms * tau1_ms) * std::exp(-t / tau1_ms) -
               a2 * t / (tau2_ms * tau2_ms) * std::exp(-t / tau2_ms);
    }
    double derivative(double t) const {
        if (t < 0 || t > extent_ms) return 0.0;
        return a1 / (tau1_ms * tau1_ms) * (1.0 - t / tau1_ms) * std::exp(-t / tau1_ms) -
               a2 / (tau2_ms * tau2_ms) * (1.0 - t / tau2_ms) * std::exp(-t / tau2_ms);
    }
};

/// Separable space-time kernel K_B(x, y, t) = K_S(x, y) * K_T(t) with
/// K_B(x, y, 0) = 0 and finite support after truncation.
struct BipolarKernel {
    SpatialDoG spatial;
    BiphasicTemporal temporal;
    double gain_mv = 1.0; // contrast-to-mV gain; configuration-mandatory
    bool separable = true;

    double operator()(double dx, double dy, double t) const {
        return gain_mv * spatial(dx, dy) * temporal(t);
    }
};

// --- drive computation -------------------------------------------------------

/// Per-B-cell drive and OPL-input time series on the simulation grid.
struct DriveTrace {
    double dt_ms = 0;
    Eigen::VectorXd times;  // sample instants
    Eigen::MatrixXd drive;  // n_cells x n_samples, V_drive in mV
    Eigen::MatrixXd opl;    // F_B = V_drive / tau_B + dV_drive/dt
};

/// Spatial inner product of the kernel with the stimulus at one instant:
/// midpoint tensor-grid quadrature at pitch `pixel_mm`, kernel truncated at
/// 3 sigma_surround.
inline double spatial_projection(const StimulusField& field, const BipolarKernel& kernel,
                                 double cx_mm, double cy_mm, double t_ms, double pixel_mm,
                                 std::uint64_t trial = 0) {
    const double r = kernel.spatial.truncation_radius_mm();
    const int half = std::max(1, int(std::ceil(r / pixel_mm)));
    double acc = 0.0;
    for (int i = -half; i < half; ++i) {
        const double x = cx_mm + (i + 0.5) * pixel_mm;
        for (int j = -half; j < half; ++j) {
            const double y = cy_mm + (j + 0.5) * pixel_mm;
            acc += kernel.spatial(x - cx_mm, y - cy_mm) * field(x, y, t_ms, trial);
        }
    }
    return acc * pixel_mm * pixel_mm;
}

/// V_drive(t) = [K_B *_{x,y,t} S](t): spatial quadrature as above, then the
/// causal time integral by the trapezoid rule on the sample grid.
inline Eigen::VectorXd compute_drive(const StimulusField& field, const BipolarKernel& kernel,
                                     double cx_mm, double cy_mm, double horizon_ms,
                                     double dt_ms, double pixel_mm, std::uint64_t trial = 0) {
    if (!(dt_ms > 0) || !(horizon_ms > 0))
        throw config_error("drive grid must have positive step and horizon");
    const int nt = int(std::round(horizon_ms / dt_ms)) + 1;
    // spatial projection once per sample instant
    Eigen::VectorXd proj(nt);
    for (int k = 0; k < nt; ++k)
        proj[k] = spatial_projection(field, kernel, cx_mm, cy_mm, k * dt_ms, pixel_mm, trial);
    const int lag_max = std::min(nt - 1, int(std::ceil(kernel.temporal.extent_ms / dt_ms)));
    Eigen::VectorXd kt(lag_max + 1);
    for (int m = 0; m <= lag_max; ++m) kt[m] = kernel.temporal(m * dt_ms);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(nt);
    // trapezoid over the whole kernel support with the stimulus zero-padded
    // before onset, so the weights are translation-invariant on the grid
    for (int k = 0; k < nt; ++k) {
        double acc = 0.0;
        const int mmax = std::min(k, lag_max);
        for (int m = 0; m <= mmax; ++m) {
            const double w = (m == 0 || m == lag_max) ? 0.5 : 1.0;
            acc += w * kt[m] * proj[k - m];
        }
        v[k] = kernel.gain_mv * acc * dt_ms;
    }
    return v;
}

/// F_B = V_drive / tau_B + dV_drive/dt, central differences inside, one-sided
/// at the ends.
inline Eigen::VectorXd compute_opl_input(const Eigen::VectorXd& drive, double tau_b_ms,
                                         double dt_ms) {
    const int n = int(drive.size());
    if (n < 3) throw accuracy_error("drive trace too short for the differentiation stencil");
    Eigen::VectorXd f(n);
    f[0] = drive[0] / tau_b_ms + (drive[1] - drive[0]) / dt_ms;
    for (int k = 1; k + 1 < n; ++k)
        f[k] = drive[k] / tau_b_ms + (drive[k + 1] - drive[k - 1]) / (2 * dt_ms);
    f[n - 1] = drive[n - 1] / tau_b_ms + (drive[n - 1] - drive[n - 2]) / dt_ms;
    return f;
}

/// Assemble drive and OPL input for every B cell of a layout.
template <typename Layout, typename Params>
DriveTrace compute_drive_traces(const StimulusField& field,
                                const std::vector<BipolarKernel>& kernels,
                                const Layout& lay, const Params& par, double horizon_ms,
                                double dt_ms, double pixel_mm, std::uint64_t trial = 0) {
    const int nb = lay.n_b();
    if (int(kernels.size()) != nb)
        throw config_error("kernel count does not match B layer size");
    const int nt = int(std::round(horizon_ms / dt_ms)) + 1;
    DriveTrace tr;
    tr.dt_ms = dt_ms;
    tr.times = Eigen::VectorXd::LinSpaced(nt, 0.0, (nt - 1) * dt_ms);
    tr.drive.resize(nb, nt);
    tr.opl.resize(nb, nt);
    for (int i = 0; i < nb; ++i) {
        auto [cx, cy] = lay.position_mm(Layer::B, i + 1);
        tr.drive.row(i) =
            compute_drive(field, kernels[i], cx, cy, horizon_ms, dt_ms, pixel_mm, trial)
                .transpose();
        tr.opl.row(i) =
            compute_opl_input(tr.drive.row(i).transpose(), par.tau_b[i], dt_ms).transpose();
    }
    return tr;
}

} // namespace retinasim
