#pragma once

#include <Eigen/Dense>

#include "retinasim/connectivity.hpp"
#include "retinasim/domain.hpp"
#include "retinasim/errors.hpp"
#include "retinasim/layout.hpp"

namespace retinasim {

/// The domain-dependent linear drift: inside domain n the dynamics is
/// dX/dt = L X + C + F(t). State ordering is (V_B, V_A, V_G [, activities]).
///
/// Synaptic blocks are right-multiplied by the projection onto non-rectified
/// (and, for B outputs under gain control, transmitting) cells; gap-junction
/// blocks enter un-projected since electric current is never rectified. The
/// constant C collects the threshold offsets of the active rectifiers, so that
/// L X + C equals the rectified vector field exactly throughout the domain.
struct TransportOperator {
    DomainLabel label;
    Eigen::MatrixXd matrix;   // L^(n)
    Eigen::VectorXd constant; // C^(n)

    int dim() const { return int(matrix.rows()); }
};

inline TransportOperator assemble_transport(const LayerLayout& lay,
                                            const ConnectivityWeights& w,
                                            const CellParameters& par,
                                            const DomainLabel& label) {
    const int nb = lay.n_b(), na = lay.n_a(), ng = lay.n_g();
    if (int(label.rectified.size()) != nb + na)
        throw config_error("domain label width does not match layout");
    if (par.gain_control && int(label.gain_passing.size()) != nb)
        throw config_error("gain bits missing from domain label");
    if (w.w_ab.rows() != nb || w.w_ab.cols() != na || w.w_ba.rows() != na ||
        w.w_ba.cols() != nb || w.w_bg.rows() != ng || w.w_bg.cols() != nb ||
        w.w_ag.rows() != ng || w.w_ag.cols() != na)
        throw config_error("connectivity block dimensions do not match layout");

    // Projections: d_b gates B outputs by rectification, d_b_tx additionally
    // by gain control; d_a gates A outputs.
    Eigen::VectorXd d_b(nb), d_b_tx(nb), d_a(na);
    for (int i = 0; i < nb; ++i) {
        d_b[i] = label.rectified[i] ? 0.0 : 1.0;
        d_b_tx[i] = d_b[i] * (par.gain_control && !label.gain_passing[i] ? 0.0 : 1.0);
    }
    for (int j = 0; j < na; ++j) d_a[j] = label.rectified[nb + j] ? 0.0 : 1.0;

    const int dim = par.gain_control ? nb + na + ng + nb : nb + na + ng;
    TransportOperator op;
    op.label = label;
    op.matrix = Eigen::MatrixXd::Zero(dim, dim);
    op.constant = Eigen::VectorXd::Zero(dim);
    auto& l = op.matrix;

    l.block(0, 0, nb, nb).diagonal() = -par.inv_tau_b_eff(w);
    l.block(0, nb, nb, na) = w.w_ab * d_a.asDiagonal();
    l.block(0, nb, nb, na) += w.gamma_ab;

    l.block(nb, 0, na, nb) = w.w_ba * d_b_tx.asDiagonal();
    l.block(nb, 0, na, nb) += w.gamma_ba;
    l.block(nb, nb, na, na).diagonal() = -par.inv_tau_a_eff(w);

    l.block(nb + na, 0, ng, nb) = w.w_bg * d_b_tx.asDiagonal();
    l.block(nb + na, nb, ng, na) = w.w_ag * d_a.asDiagonal();
    l.block(nb + na, nb + na, ng, ng).diagonal() = -par.tau_g.cwiseInverse();

    op.constant.head(nb) = -par.theta_a * (w.w_ab * d_a.asDiagonal()).rowwise().sum();
    op.constant.segment(nb, na) = -par.theta_b * (w.w_ba * d_b_tx.asDiagonal()).rowwise().sum();
    op.constant.segment(nb + na, ng) =
        -par.theta_b * (w.w_bg * d_b_tx.asDiagonal()).rowwise().sum() -
        par.theta_a * (w.w_ag * d_a.asDiagonal()).rowwise().sum();

    if (par.gain_control) {
        const int off = nb + na + ng;
        // activity rows: d A_i/dt = -A_i/tau_a + h_B N_B(V_B_i)
        l.block(off, 0, nb, nb).diagonal() = par.h_b * d_b;
        l.block(off, off, nb, nb).diagonal().setConstant(-1.0 / par.tau_act);
        op.constant.segment(off, nb) = -par.h_b * par.theta_b * d_b;
    }
    return op;
}

/// Fixed point X* = -L^(-1) C of the stimulus-free dynamics in a domain,
/// plus whether it actually lies in that domain.
struct FixedPoint {
    Eigen::VectorXd state;
    bool in_domain = false;
    double residual = 0.0;
};

inline FixedPoint fixed_point(const TransportOperator& op, const LayerLayout& lay,
                              const CellParameters& par, double rcond_min = 1e-12) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(op.matrix);
    if (!(lu.rcond() > rcond_min))
        throw accuracy_error("transport operator is singular or near-singular "
                             "(reciprocal condition " + csv::format(lu.rcond()) + ")");
    FixedPoint fp;
    fp.state = lu.solve(-op.constant);
    fp.residual = (op.matrix * fp.state + op.constant).lpNorm<Eigen::Infinity>();
    fp.in_domain = classify_domain(fp.state, lay, par) == op.label;
    return fp;
}

} // namespace retinasim
