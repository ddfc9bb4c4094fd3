#pragma once

#include <array>
#include <cmath>
#include <string>

#include "retinasim/errors.hpp"

namespace retinasim {

enum class Layer { B = 0, A = 1, G = 2 };

inline const char* layer_name(Layer p) {
    switch (p) {
        case Layer::B: return "B";
        case Layer::A: return "A";
        default: return "G";
    }
}

/// Square lattice geometry of the three cell layers. Cells of layer p sit at
/// (i_x * spacing_p, i_y * spacing_p) with i_x, i_y in 1..cells_per_row(p),
/// flattened to a single 1-based index i = i_x + (i_y - 1) * L_p.
class LayerLayout {
public:
    LayerLayout(double edge_length_mm, std::array<double, 3> spacing_mm)
        : edge_(edge_length_mm), spacing_(spacing_mm) {
        if (!(edge_ > 0)) throw config_error("edge length must be positive");
        for (int p = 0; p < 3; ++p) {
            const double d = spacing_[p];
            if (!(d > 0))
                throw config_error(std::string("spacing for layer ") +
                                   layer_name(Layer(p)) + " must be positive");
            const double ratio = edge_ / d;
            const double rounded = std::round(ratio);
            if (std::abs(ratio - rounded) > 1e-9 * ratio || rounded < 1)
                throw config_error(std::string("edge length ") + std::to_string(edge_) +
                                   " mm is not a multiple of layer " + layer_name(Layer(p)) +
                                   " spacing " + std::to_string(d) + " mm");
            per_row_[p] = static_cast<int>(rounded);
        }
    }

    double edge_length_mm() const { return edge_; }
    double spacing_mm(Layer p) const { return spacing_[int(p)]; }
    int cells_per_row(Layer p) const { return per_row_[int(p)]; }
    int cell_count(Layer p) const { return per_row_[int(p)] * per_row_[int(p)]; }

    int n_b() const { return cell_count(Layer::B); }
    int n_a() const { return cell_count(Layer::A); }
    int n_g() const { return cell_count(Layer::G); }
    /// Voltage state dimension N_B + N_A + N_G.
    int state_dim() const { return n_b() + n_a() + n_g(); }

    /// (i_x, i_y) in 1..L_p each -> 1-based flat index.
    int flat_index(Layer p, int ix, int iy) const {
        return ix + (iy - 1) * per_row_[int(p)];
    }
    /// 1-based flat index -> (i_x, i_y).
    std::pair<int, int> grid_index(Layer p, int i) const {
        const int l = per_row_[int(p)];
        const int iy = (i - 1) / l + 1;
        const int ix = i - (iy - 1) * l;
        return {ix, iy};
    }
    /// Cell centre in mm.
    std::pair<double, double> position_mm(Layer p, int i) const {
        auto [ix, iy] = grid_index(p, i);
        return {ix * spacing_[int(p)], iy * spacing_[int(p)]};
    }

private:
    double edge_;
    std::array<double, 3> spacing_;
    std::array<int, 3> per_row_{};
};

} // namespace retinasim
