#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "retinasim/connectivity.hpp"
#include "retinasim/errors.hpp"
#include "retinasim/layout.hpp"

namespace retinasim {

/// Rectification (and optional gain-control) state of the network. Stored as
/// bit vectors: the 2^(N_B+N_A) domains are never enumerated.
///
/// rectified[a] = 1 iff cell a (a < N_B: B cell, else A cell) sits strictly
/// below its threshold. Exact-threshold ties classify as non-rectified, making
/// domains left-open / right-closed. gain_passing[i] = 1 iff B cell i's
/// activity is at or below theta_a (synapse transmitting).
struct DomainLabel {
    std::vector<bool> rectified;    // size N_B + N_A
    std::vector<bool> gain_passing; // size N_B when gain control enabled, else empty

    bool operator==(const DomainLabel&) const = default;

    /// Packed integer n = sum eta_a 2^(a-1), gain bits appended above the
    /// rectification bits. Only valid for small networks.
    std::uint64_t pack() const {
        if (rectified.size() + gain_passing.size() > 63)
            throw config_error("domain label too wide to pack into 64 bits");
        std::uint64_t n = 0;
        std::size_t bit = 0;
        for (bool e : rectified) n |= std::uint64_t(e) << bit++;
        for (bool g : gain_passing) n |= std::uint64_t(!g) << bit++;
        return n;
    }

    static DomainLabel unpack(std::uint64_t n, std::size_t n_rect, std::size_t n_gain = 0) {
        DomainLabel d;
        d.rectified.resize(n_rect);
        d.gain_passing.resize(n_gain);
        std::size_t bit = 0;
        for (std::size_t a = 0; a < n_rect; ++a) d.rectified[a] = (n >> bit++) & 1;
        for (std::size_t a = 0; a < n_gain; ++a) d.gain_passing[a] = !((n >> bit++) & 1);
        return d;
    }
};

/// Classify the full state vector into its rectification domain.
/// state is (V_B, V_A, V_G [, activities]) stacked. RG cells are never
/// rectified. Ties (V exactly equal to threshold) resolve as non-rectified.
inline DomainLabel classify_domain(const Eigen::VectorXd& state, const LayerLayout& lay,
                                   const CellParameters& par) {
    const int nb = lay.n_b(), na = lay.n_a();
    const int n = lay.state_dim();
    const int expected = par.gain_control ? n + nb : n;
    if (state.size() != expected)
        throw config_error("state dimension " + std::to_string(state.size()) +
                           " does not match layout (expected " + std::to_string(expected) + ")");
    DomainLabel d;
    d.rectified.resize(nb + na);
    for (int i = 0; i < nb; ++i) d.rectified[i] = state[i] < par.theta_b;
    for (int j = 0; j < na; ++j) d.rectified[nb + j] = state[nb + j] < par.theta_a;
    if (par.gain_control) {
        d.gain_passing.resize(nb);
        for (int i = 0; i < nb; ++i) d.gain_passing[i] = state[n + i] <= par.theta_act;
    }
    return d;
}

} // namespace retinasim
