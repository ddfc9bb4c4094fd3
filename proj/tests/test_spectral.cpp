#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "retinasim/spectral.hpp"

using namespace retinasim;

namespace {
LayerLayout tiny() { return LayerLayout(1.0, {1.0, 1.0, 1.0}); } // 1 B, 1 A, 1 G

BipolarKernel test_kernel() {
    BipolarKernel k;
    k.spatial = {1.0, 0.05, 0.5, 0.15};
    k.temporal = {1.0, 8.0, 0.7, 30.0, 300.0};
    k.gain_mv = 10.0;
    return k;
}

bool has_eigenvalue(const SpectralData& sd, std::complex<double> lam, double tol = 1e-10) {
    for (int i = 0; i < sd.dim(); ++i)
        if (std::abs(sd.eigenvalues[i] - lam) < tol) return true;
    return false;
}
} // namespace

TEST_CASE("uncoupled operator has eigenvalues -1/tau") {
    const LayerLayout lay = tiny();
    const ConnectivityWeights w = ConnectivityWeights::zero(lay);
    const CellParameters par = CellParameters::uniform(lay, 2.0, 3.0, 5.0);
    const auto op = assemble_transport(lay, w, par, DomainLabel::unpack(0, 2));
    const SpectralData sd = eigendecompose(op);
    CHECK(sd.stable);
    CHECK(has_eigenvalue(sd, {-0.5, 0.0}));
    CHECK(has_eigenvalue(sd, {-1.0 / 3.0, 0.0}));
    CHECK(has_eigenvalue(sd, {-0.2, 0.0}));
    CHECK(sd.basis_condition == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("the two-cell loop has the complex pair -1 +/- i") {
    const LayerLayout lay = tiny();
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    w.w_ab(0, 0) = -1.0;
    w.w_ba(0, 0) = 1.0;
    const CellParameters par = CellParameters::uniform(lay, 1.0, 1.0, 1.0);
    const SpectralData sd = eigendecompose(assemble_transport(lay, w, par,
                                                              DomainLabel::unpack(0, 2)));
    CHECK(has_eigenvalue(sd, {-1.0, 1.0}));
    CHECK(has_eigenvalue(sd, {-1.0, -1.0}));
    CHECK(sd.stable);
}

TEST_CASE("a rectified cell contributes eigenvalue -1/tau with canonical eigenvector") {
    const LayerLayout lay = tiny();
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    w.w_ab(0, 0) = -0.7;
    w.w_ba(0, 0) = 0.9;
    const CellParameters par = CellParameters::uniform(lay, 2.0, 3.0, 5.0);
    // A rectified: its outgoing column is projected away, decoupling it
    const SpectralData sd = eigendecompose(assemble_transport(lay, w, par,
                                                              DomainLabel::unpack(2, 2)));
    REQUIRE(has_eigenvalue(sd, {-1.0 / 3.0, 0.0}));
    int idx = 0;
    for (int i = 0; i < sd.dim(); ++i)
        if (std::abs(sd.eigenvalues[i] - std::complex<double>(-1.0 / 3.0, 0)) < 1e-10) idx = i;
    Eigen::VectorXcd v = sd.right.col(idx);
    v /= v[1]; // canonical direction e_A
    CHECK(std::abs(v[0]) < 1e-10);
    CHECK(std::abs(v[2]) < 1e-10);
}

TEST_CASE("near-defective operators are rejected with the conditioning hint") {
    Eigen::Matrix2d jordan;
    jordan << -1.0, 1.0, 0.0, -1.0;
    CHECK_THROWS_WITH_AS(eigendecompose(jordan), doctest::Contains("Schur"), accuracy_error);
}

TEST_CASE("exponential convolution is exact per panel across both branches") {
    // samples of a globally linear signal interpolate exactly, so results at
    // common instants must agree between different sample steps bit-tightly
    auto linear = [](double t) { return 0.3 + 0.8 * t; };
    for (std::complex<double> lam : {std::complex<double>(-0.3, 0.7),
                                     std::complex<double>(1e-6, 0.0),
                                     std::complex<double>(0.0, 0.0)}) {
        Eigen::VectorXd coarse(21), fine(101);
        for (int k = 0; k <= 20; ++k) coarse[k] = linear(0.5 * k);
        for (int k = 0; k <= 100; ++k) fine[k] = linear(0.1 * k);
        const Eigen::VectorXcd yc = detail::conv_exp_sampled(lam, coarse, 0.5);
        const Eigen::VectorXcd yf = detail::conv_exp_sampled(lam, fine, 0.1);
        for (int k = 0; k <= 20; ++k)
            CHECK(std::abs(yc[k] - yf[5 * k]) < 1e-10);
    }
}

TEST_CASE("exponential convolution of a sinusoid matches the closed form") {
    const double lam = -0.4, omega = 1.1, dt = 0.01;
    const int n = 1000;
    Eigen::VectorXd s(n);
    for (int k = 0; k < n; ++k) s[k] = std::sin(omega * k * dt);
    const Eigen::VectorXcd y = detail::conv_exp_sampled({lam, 0.0}, s, dt);
    const double denom = lam * lam + omega * omega;
    for (int k = 100; k < n; k += 137) {
        const double t = k * dt;
        const double expect =
            (omega * std::exp(lam * t) - lam * std::sin(omega * t) - omega * std::cos(omega * t)) /
            denom;
        CHECK(std::abs(y[k] - expect) < 1e-4); // interpolation error O(dt^2)
    }
}

TEST_CASE("one-to-one feedforward receptive field: separable, with known closed form") {
    const LayerLayout lay = tiny();
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    const double wbg = 1.3;
    w.w_bg(0, 0) = wbg;
    const CellParameters par = CellParameters::uniform(lay, 2.0, 3.0, 5.0);
    const SpectralData sd = eigendecompose(assemble_transport(lay, w, par,
                                                              DomainLabel::unpack(0, 2)));
    const std::vector<BipolarKernel> kernels(1, test_kernel());
    const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(9, 0.6, 1.4);
    const Eigen::VectorXd ys = Eigen::VectorXd::LinSpaced(1, 1.0, 1.0);
    const double dt = 0.5, horizon = 150.0;
    const int g_index = lay.n_b() + lay.n_a(); // the single G cell
    const auto rf = rg_receptive_field(g_index, sd, kernels, lay, xs, ys, horizon, dt, par);
    CHECK(rf.imag_residue < 1e-8);
    CHECK(separability_index(rf) < 1e-8);
    // K_G(x, t) = w_bg K_S(x - c) [e^{-t/tau_G} * gain K_T](t)
    const int nt = int(rf.times_ms.size());
    Eigen::VectorXd ktemp(nt);
    const BipolarKernel k = test_kernel();
    for (int m = 0; m < nt; ++m) ktemp[m] = k.gain_mv * k.temporal(m * dt);
    const Eigen::VectorXcd conv = detail::conv_exp_sampled({-0.2, 0.0}, ktemp, dt);
    auto [cx, cy] = lay.position_mm(Layer::B, 1);
    for (int ix = 0; ix < xs.size(); ix += 2)
        for (int m = 0; m < nt; m += 40) {
            const double expect = wbg * k.spatial(xs[ix] - cx, 1.0 - cy) * conv[m].real();
            CHECK(rf.values(ix, m) == doctest::Approx(expect).epsilon(1e-10));
        }
    CHECK(int(rf.modes.size()) == sd.dim());
}

TEST_CASE("receptive field demands stability and a valid cell index") {
    const LayerLayout lay = tiny();
    const ConnectivityWeights w = ConnectivityWeights::zero(lay);
    CellParameters par = CellParameters::uniform(lay, 2.0, 3.0, 5.0);
    SpectralData sd = eigendecompose(assemble_transport(lay, w, par, DomainLabel::unpack(0, 2)));
    const std::vector<BipolarKernel> kernels(1, test_kernel());
    const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(3, 0.5, 1.5);
    CHECK_THROWS_AS(rg_receptive_field(7, sd, kernels, lay, xs, xs, 50.0, 0.5, par),
                    config_error);
    sd.stable = false;
    CHECK_THROWS_AS(rg_receptive_field(2, sd, kernels, lay, xs, xs, 50.0, 0.5, par),
                    regime_error);
}

TEST_CASE("spectral response trace matches the piecewise integrator in the linear regime") {
    const LayerLayout lay(1.0, {0.5, 1.0, 1.0}); // 4 B, 1 A, 1 G
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    for (int b = 0; b < 4; ++b) {
        w.w_ab(b, 0) = -0.4;
        w.w_ba(0, b) = 0.5;
        w.w_bg(0, b) = 0.8;
    }
    w.w_ag(0, 0) = -0.6;
    const CellParameters par = CellParameters::uniform(lay, 10.0, 8.0, 6.0);
    // zero thresholds: the rest state is the origin and deviations obey the
    // rest-domain operator directly, so the propagator is a linear oracle
    const auto op = assemble_transport(lay, w, par, DomainLabel::unpack(0, 5));
    const SpectralData sd = eigendecompose(op);

    const StimulusField bar = moving_bar(1.0, 0.3, 0.01, 0.0);
    const std::vector<BipolarKernel> kernels(4, test_kernel());
    const double dt = 0.1, horizon = 120.0;
    const DriveTrace drive = compute_drive_traces(bar, kernels, lay, par, horizon, dt, 0.02);
    const Eigen::MatrixXd trace = linear_response_trace(sd, drive, par);

    DomainPropagator prop(op, drive_forcing(drive, lay.state_dim()), 0.0,
                          Eigen::VectorXd::Zero(lay.state_dim()), dt);
    double err = 0.0;
    const double scale = trace.cwiseAbs().maxCoeff();
    for (int k = 0; k < trace.cols(); ++k)
        err = std::max(err, (prop.at_grid(std::size_t(k)) - trace.col(k)).cwiseAbs().maxCoeff());
    CHECK(err < 1e-3 * scale);
}

TEST_CASE("impulse response: zero amplitude, linear scaling, and overdrive rejection") {
    const LayerLayout lay = tiny();
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    w.w_bg(0, 0) = 1.0;
    CellParameters par = CellParameters::uniform(lay, 10.0, 8.0, 6.0);
    par.theta_b = -0.5;
    par.theta_a = -0.5;
    const std::vector<BipolarKernel> kernels(1, test_kernel());
    IntegratorConfig cfg;
    cfg.dt_ms = 0.5;
    const int g_index = 2;
    const auto zero = impulse_response(g_index, lay, w, par, kernels, 0.0, 1.0, 80.0, cfg);
    CHECK(zero.response.cwiseAbs().maxCoeff() < 1e-12);
    const auto small = impulse_response(g_index, lay, w, par, kernels, 0.01, 1.0, 80.0, cfg);
    const auto twice = impulse_response(g_index, lay, w, par, kernels, 0.02, 1.0, 80.0, cfg);
    REQUIRE(small.visit_count == 1);
    const double scale = small.response.cwiseAbs().maxCoeff();
    CHECK(scale > 0.0);
    CHECK((twice.response - 2.0 * small.response).cwiseAbs().maxCoeff() < 1e-9 * scale);
    // a pulse strong enough to rectify is refused with a regime error
    CHECK_THROWS_AS(impulse_response(g_index, lay, w, par, kernels, 40.0, 1.0, 80.0, cfg),
                    regime_error);
}

TEST_CASE("separability index distinguishes rank-1 from balanced rank-2 kernels") {
    ReceptiveFieldKernel rf;
    rf.xs_mm = Eigen::VectorXd::LinSpaced(6, 0, 1);
    rf.ys_mm = Eigen::VectorXd::LinSpaced(1, 0, 0);
    rf.times_ms = Eigen::VectorXd::LinSpaced(8, 0, 7);
    Eigen::VectorXd u1(6), u2(6), v1(8), v2(8);
    u1 << 1, 1, 1, 1, 1, 1;
    u2 << 1, -1, 1, -1, 1, -1; // orthogonal to u1, same norm
    v1 << 1, 2, 3, 4, 4, 3, 2, 1;
    v2 << 4, 3, 2, 1, -1, -2, -3, -4;
    v2 -= v1 * (v1.dot(v2) / v1.squaredNorm());
    v2 *= v1.norm() / v2.norm(); // orthogonal to v1, same norm
    rf.values = u1 * v1.transpose();
    CHECK(separability_index(rf) < 1e-14);
    rf.values = u1 * v1.transpose() + u2 * v2.transpose();
    CHECK(separability_index(rf) == doctest::Approx(1.0).epsilon(1e-12));
    rf.values.setZero();
    CHECK_THROWS_AS(separability_index(rf), accuracy_error);
}

TEST_CASE("resonance scan: flat for a pure-decay spectrum, peaked for a damped pair") {
    const Eigen::VectorXd freqs = Eigen::VectorXd::LinSpaced(250, 0.002, 0.5);
    Eigen::Vector2d probe(1.0, 0.0);

    Eigen::Matrix2d decay = Eigen::Vector2d(-0.1, -0.05).asDiagonal();
    const auto flat = resonance_scan(0, decay, probe, freqs);
    CHECK(flat.peaks.empty());
    // DC limit of the amplitude is |L^-1 probe| at the cell
    Eigen::VectorXd dc(1);
    dc << 1e-7;
    CHECK(resonance_scan(0, decay, probe, dc).amplitudes[0] ==
          doctest::Approx(std::abs((decay.inverse() * probe)(0))).epsilon(1e-6));

    const double omega = 1.5;
    Eigen::Matrix2d ring;
    ring << -0.05, -omega, omega, -0.05; // eigenvalues -0.05 +/- 1.5 i
    const auto peaked = resonance_scan(0, ring, probe, freqs);
    REQUIRE(peaked.peaks.size() == 1);
    CHECK(peaked.peaks[0].freq_per_ms ==
          doctest::Approx(omega / (2 * M_PI)).epsilon(0.05));

    Eigen::Matrix2d unstable = Eigen::Vector2d(0.1, -1.0).asDiagonal();
    CHECK_THROWS_AS(resonance_scan(0, unstable, probe, freqs), regime_error);
}
