#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "retinasim/csv.hpp"
#include "retinasim/layout.hpp"

using namespace retinasim;

TEST_CASE("lattice sizes and index map") {
    LayerLayout lay(1.0, {0.5, 1.0, 1.0});
    CHECK(lay.cells_per_row(Layer::B) == 2);
    CHECK(lay.n_b() == 4);
    CHECK(lay.n_a() == 1);
    CHECK(lay.n_g() == 1);
    CHECK(lay.flat_index(Layer::B, 1, 2) == 3);
    CHECK(lay.state_dim() == 6);
}

TEST_CASE("non-divisible spacing is rejected, naming the layer") {
    CHECK_THROWS_WITH_AS(LayerLayout(1.0, {0.3, 1.0, 1.0}),
                         doctest::Contains("layer B"), config_error);
    CHECK_THROWS_WITH_AS(LayerLayout(1.0, {0.5, 0.7, 1.0}),
                         doctest::Contains("layer A"), config_error);
    CHECK_THROWS_AS(LayerLayout(-1.0, {0.5, 0.5, 0.5}), config_error);
}

TEST_CASE("layer counts for a larger retina") {
    LayerLayout lay(3.0, {0.25, 0.5, 1.0});
    CHECK(lay.n_b() == 144);
    CHECK(lay.n_a() == 36);
    CHECK(lay.n_g() == 9);
    CHECK(lay.state_dim() == 189);
}

TEST_CASE("index map is a bijection and positions follow the lattice") {
    LayerLayout lay(2.0, {0.25, 0.5, 1.0});
    for (Layer p : {Layer::B, Layer::A, Layer::G}) {
        const int l = lay.cells_per_row(p);
        std::vector<bool> seen(std::size_t(lay.cell_count(p)) + 1, false);
        for (int iy = 1; iy <= l; ++iy)
            for (int ix = 1; ix <= l; ++ix) {
                const int i = lay.flat_index(p, ix, iy);
                REQUIRE(i >= 1);
                REQUIRE(i <= lay.cell_count(p));
                CHECK(!seen[std::size_t(i)]);
                seen[std::size_t(i)] = true;
                auto [jx, jy] = lay.grid_index(p, i);
                CHECK(jx == ix);
                CHECK(jy == iy);
                auto [x, y] = lay.position_mm(p, i);
                CHECK(x == doctest::Approx(ix * lay.spacing_mm(p)).epsilon(1e-12));
                CHECK(y == doctest::Approx(iy * lay.spacing_mm(p)).epsilon(1e-12));
            }
    }
}

TEST_CASE("matrix files round-trip doubles exactly") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    Eigen::MatrixXd m(5, 3);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = u(rng) * std::pow(10.0, int(rng() % 7) - 3);
    const auto path = std::filesystem::temp_directory_path() / "retinasim_matrix_rt.csv";
    csv::write_matrix(path, m);
    const Eigen::MatrixXd back = csv::read_matrix(path);
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) CHECK(back(r, c) == m(r, c)); // bit-exact
    std::filesystem::remove(path);
}

TEST_CASE("matrix file errors") {
    const auto path = std::filesystem::temp_directory_path() / "retinasim_matrix_bad.csv";
    {
        std::ofstream out(path);
        out << "not,a header\n1,2\n";
    }
    CHECK_THROWS_AS(csv::read_matrix(path), io_error);
    CHECK_THROWS_AS(csv::read_matrix(path.string() + ".does_not_exist"), io_error);
    std::filesystem::remove(path);
}
