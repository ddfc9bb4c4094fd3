#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "retinasim/integrate.hpp"
#include "retinasim/transport.hpp"

using namespace retinasim;

namespace {
LayerLayout tiny() { return LayerLayout(1.0, {1.0, 1.0, 1.0}); } // 1 B, 1 A, 1 G

struct Net {
    LayerLayout lay = tiny();
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    CellParameters par = CellParameters::uniform(lay, 1.0, 1.0, 1.0);
};

Net two_cell_example() {
    Net n;
    n.w.w_ab(0, 0) = -1.0;
    n.w.w_ba(0, 0) = 1.0;
    return n;
}
} // namespace

TEST_CASE("two-cell block fill in the rest domain") {
    Net n = two_cell_example();
    const auto op = assemble_transport(n.lay, n.w, n.par, DomainLabel::unpack(0, 2));
    Eigen::Matrix2d expect;
    expect << -1, -1, 1, -1;
    CHECK((op.matrix.topLeftCorner(2, 2) - expect).cwiseAbs().maxCoeff() == 0.0);
    CHECK(op.matrix(2, 2) == -1.0);
    CHECK(op.matrix.row(2).head(2).cwiseAbs().maxCoeff() == 0.0); // no B/A -> G synapses here
    CHECK(op.constant.cwiseAbs().maxCoeff() == 0.0);              // thresholds are zero
}

TEST_CASE("rectifying the A cell zeroes its outgoing column, keeps its leak") {
    Net n = two_cell_example();
    const auto op = assemble_transport(n.lay, n.w, n.par, DomainLabel::unpack(2, 2));
    // only the rectified cell's outgoing column is projected away; its own
    // input row survives, else synaptic input could never un-rectify it
    Eigen::Matrix2d expect;
    expect << -1, 0, 1, -1;
    CHECK((op.matrix.topLeftCorner(2, 2) - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all cells rectified leaves only the leak diagonal") {
    LayerLayout lay(1.0, {0.5, 1.0, 1.0});
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int g = 0; g < lay.n_g(); ++g)
        for (int b = 0; b < lay.n_b(); ++b) w.w_bg(g, b) = u(rng);
    for (int b = 0; b < lay.n_b(); ++b) w.w_ab(b, 0) = -u(rng);
    for (int b = 0; b < lay.n_b(); ++b) w.w_ba(0, b) = u(rng);
    CellParameters par = CellParameters::uniform(lay, 2.0, 3.0, 5.0);
    par.theta_b = 0.0;
    par.theta_a = 0.0;
    const auto all = DomainLabel::unpack((1u << 5) - 1, 5);
    const auto op = assemble_transport(lay, w, par, all);
    Eigen::MatrixXd diag = op.matrix;
    diag.diagonal().setZero();
    CHECK(diag.cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < lay.n_b(); ++i) CHECK(op.matrix(i, i) == -0.5);
    CHECK(op.constant.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("projected columns of rectified cells vanish for every label") {
    LayerLayout lay(1.0, {0.5, 1.0, 1.0}); // 4 B, 1 A, 1 G
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    for (int b = 0; b < 4; ++b) {
        w.w_ab(b, 0) = -u(rng);
        w.w_ba(0, b) = u(rng);
        w.w_bg(0, b) = u(rng);
    }
    w.w_ag(0, 0) = -u(rng);
    CellParameters par = CellParameters::uniform(lay, 2.0, 3.0, 5.0);
    const int nb = lay.n_b(), na = lay.n_a();
    for (std::uint64_t n = 0; n < (1u << 5); ++n) {
        const auto op = assemble_transport(lay, w, par, DomainLabel::unpack(n, 5));
        for (int c = 0; c < nb + na; ++c) {
            if (!((n >> c) & 1)) continue;
            // synaptic column of a rectified cell: zero everywhere off-diagonal
            for (int r = 0; r < op.dim(); ++r)
                if (r != c) CHECK(op.matrix(r, c) == 0.0);
        }
    }
}

TEST_CASE("gap junctions only shorten effective time constants") {
    Net n = two_cell_example();
    CHECK(n.par.inv_tau_b_eff(n.w)[0] == 1.0);
    n.w.gamma_ab(0, 0) = 0.4;
    n.w.gamma_ba(0, 0) = 0.25;
    CHECK(n.par.inv_tau_b_eff(n.w)[0] == doctest::Approx(1.4).epsilon(1e-15));
    CHECK(n.par.inv_tau_a_eff(n.w)[0] == doctest::Approx(1.25).epsilon(1e-15));
    // gap blocks enter the operator un-projected even when the peer is rectified
    const auto op = assemble_transport(n.lay, n.w, n.par, DomainLabel::unpack(2, 2));
    CHECK(op.matrix(0, 1) == 0.4);        // synaptic part zeroed, gap part kept
    CHECK(op.matrix(1, 0) == 1.0 + 0.25); // w_ba + gamma_ba, B not rectified
    CHECK(op.matrix(0, 0) == -1.4);
}

TEST_CASE("sign constraints are validated with coordinates") {
    Net n = two_cell_example();
    n.w.w_ab(0, 0) = 0.5; // must be <= 0
    CHECK_THROWS_WITH_AS(n.w.validate(), doctest::Contains("W_AB"), config_error);
    CHECK_THROWS_WITH_AS(n.w.validate(), doctest::Contains("(0,0)"), config_error);
}

TEST_CASE("fixed point: zero thresholds give the zero rest state in every domain") {
    Net n = two_cell_example();
    for (std::uint64_t lbl = 0; lbl < 4; ++lbl) {
        const auto op = assemble_transport(n.lay, n.w, n.par, DomainLabel::unpack(lbl, 2));
        const auto fp = fixed_point(op, n.lay, n.par);
        CHECK(fp.state.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(fp.residual < 1e-12);
    }
    // and the rest-state fixed point lies in domain 0 (valid configuration)
    const auto op0 = assemble_transport(n.lay, n.w, n.par, DomainLabel::unpack(0, 2));
    CHECK(fixed_point(op0, n.lay, n.par).in_domain);
}

TEST_CASE("fixed point of the two-cell system matches the hand 2x2 inverse") {
    Net n = two_cell_example();
    n.par.theta_b = 0.3;
    n.par.theta_a = -0.2; // nonzero constants C
    const auto op = assemble_transport(n.lay, n.w, n.par, DomainLabel::unpack(0, 2));
    // top-left 2x2 decouples from G; solve [ -1 -1; 1 -1 ] x = -c by hand:
    // inverse of [[-1,-1],[1,-1]] is (1/2)[[-1,1],[-1,-1]]
    const double c1 = op.constant[0], c2 = op.constant[1];
    const double x1 = -0.5 * (-c1 + c2);
    const double x2 = -0.5 * (-c1 - c2);
    const auto fp = fixed_point(op, n.lay, n.par);
    CHECK(fp.state[0] == doctest::Approx(x1).epsilon(1e-12));
    CHECK(fp.state[1] == doctest::Approx(x2).epsilon(1e-12));
    CHECK(fp.residual < 1e-12);
}

TEST_CASE("diagonal operator fixed point is diag(tau) * C") {
    LayerLayout lay = tiny();
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    CellParameters par = CellParameters::uniform(lay, 2.0, 4.0, 8.0);
    par.theta_a = -1.0; // gives B row a nonzero constant through w_ab
    TransportOperator op = assemble_transport(lay, w, par, DomainLabel::unpack(0, 2));
    op.constant << 0.5, -0.25, 0.125; // directly exercise X* = diag(tau) c
    const auto fp = fixed_point(op, lay, par);
    CHECK(fp.state[0] == doctest::Approx(2.0 * 0.5).epsilon(1e-12));
    CHECK(fp.state[1] == doctest::Approx(4.0 * -0.25).epsilon(1e-12));
    CHECK(fp.state[2] == doctest::Approx(8.0 * 0.125).epsilon(1e-12));
}

TEST_CASE("singular operators are rejected") {
    Net n = two_cell_example();
    TransportOperator op = assemble_transport(n.lay, n.w, n.par, DomainLabel::unpack(0, 2));
    op.matrix.setZero();
    CHECK_THROWS_AS(fixed_point(op, n.lay, n.par), accuracy_error);
}

TEST_CASE("L X + C equals the rectified vector field throughout each domain") {
    // the decisive consistency check between the operator assembly and the
    // nonlinear model, with and without gain control, across random states
    LayerLayout lay(1.0, {0.5, 1.0, 1.0});
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.05, 1.0), v(-3.0, 3.0);
    ConnectivityWeights w = ConnectivityWeights::zero(lay);
    for (int b = 0; b < 4; ++b) {
        w.w_ab(b, 0) = -u(rng);
        w.w_ba(0, b) = u(rng);
        w.w_bg(0, b) = u(rng);
        w.gamma_ab(b, 0) = 0.2 * u(rng);
        w.gamma_ba(0, b) = 0.2 * u(rng);
    }
    w.w_ag(0, 0) = -u(rng);
    for (bool gain : {false, true}) {
        CellParameters par = CellParameters::uniform(lay, 2.0, 3.0, 5.0);
        par.theta_b = 0.4;
        par.theta_a = -0.3;
        par.gain_control = gain;
        par.tau_act = 7.0;
        par.h_b = 0.6;
        const int dim = gain ? lay.state_dim() + lay.n_b() : lay.state_dim();
        for (int trial = 0; trial < 200; ++trial) {
            Eigen::VectorXd x(dim);
            for (int i = 0; i < dim; ++i) x[i] = v(rng);
            if (gain) x.tail(lay.n_b()) = x.tail(lay.n_b()).cwiseAbs() / 3.0;
            const DomainLabel label = classify_domain(x, lay, par);
            const auto op = assemble_transport(lay, w, par, label);
            const Eigen::VectorXd lin = op.matrix * x + op.constant;
            const Eigen::VectorXd drift =
                rectified_drift(x, lay, w, par, Eigen::VectorXd::Zero(dim));
            CHECK((lin - drift).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}
