#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hydropinn/field.hpp"
#include "hydropinn/rng.hpp"

using namespace hydropinn;

namespace {

Field2D random_field(int rows, int cols, double spacing, Rng& rng) {
    Field2D f(rows, cols, 0.0, spacing);
    for (auto& v : f.v) v = rng.normal();
    return f;
}

}  // namespace

TEST_CASE("grad_central annihilates constants") {
    Field2D f(8, 9, 7.0, 1.0);
    GradPair g = grad_central(f);
    for (double v : g.dx.v) CHECK(v == 0.0);
    for (double v : g.dy.v) CHECK(v == 0.0);
}

TEST_CASE("grad_central is exact on linear fields at interior cells") {
    Field2D f(6, 6, 0.0, 1.0);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) f.at(i, j) = 2.0 * j;
    }
    GradPair g = grad_central(f);
    for (int i = 0; i < 6; ++i) {
        for (int j = 1; j < 5; ++j) {
            CHECK(g.dx.at(i, j) == doctest::Approx(2.0).epsilon(1e-14));
        }
        CHECK(g.dy.at(i, 2) == doctest::Approx(0.0).epsilon(1e-14));
    }
    // Reflective boundary: one-sided half-magnitude estimate.
    CHECK(g.dx.at(3, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.dx.at(3, 5) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("grad_central reproduces quadratic derivative with spacing 0.5") {
    const double dx = 0.5;
    Field2D f(5, 8, 0.0, dx);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 8; ++j) f.at(i, j) = (j * dx) * (j * dx);
    }
    GradPair g = grad_central(f);
    for (int i = 1; i < 4; ++i) {
        for (int j = 1; j < 7; ++j) {
            // Central stencil is exact for quadratics: d/dx x^2 = 2x.
            CHECK(g.dx.at(i, j) ==
                  doctest::Approx(2.0 * (j * dx)).epsilon(1e-10));
        }
    }
}

TEST_CASE("grad_central rejects tiny grids") {
    Field2D f(2, 5, 0.0, 1.0);
    CHECK_THROWS_WITH_AS(grad_central(f), "grid too small for stencil",
                         std::invalid_argument);
}

TEST_CASE("grad_central is linear") {
    Rng rng(11);
    Field2D f = random_field(7, 7, 0.7, rng);
    Field2D g = random_field(7, 7, 0.7, rng);
    const double a = 1.7, b = -0.4;
    Field2D comb(7, 7, 0.0, 0.7);
    for (int k = 0; k < comb.size(); ++k) comb.v[k] = a * f.v[k] + b * g.v[k];
    GradPair gf = grad_central(f);
    GradPair gg = grad_central(g);
    GradPair gc = grad_central(comb);
    for (int k = 0; k < comb.size(); ++k) {
        const double want = a * gf.dx.v[k] + b * gg.dx.v[k];
        CHECK(gc.dx.v[k] == doctest::Approx(want).epsilon(1e-12));
        const double want_y = a * gf.dy.v[k] + b * gg.dy.v[k];
        CHECK(gc.dy.v[k] == doctest::Approx(want_y).epsilon(1e-12));
    }
}

TEST_CASE("divergence of constant and linear fields") {
    Field2D cx(6, 6, 3.0, 1.0), cy(6, 6, -2.0, 1.0);
    Field2D d = divergence(cx, cy);
    for (double v : d.v) CHECK(v == 0.0);

    Field2D fx(6, 6, 0.0, 1.0), fy(6, 6, 0.0, 1.0);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) fx.at(i, j) = static_cast<double>(j);
    }
    d = divergence(fx, fy);
    CHECK(d.at(2, 2) == doctest::Approx(1.0).epsilon(1e-14));

    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) fy.at(i, j) = static_cast<double>(i);
    }
    d = divergence(fx, fy);
    // Two unit divergences sum at interior cells.
    CHECK(d.at(3, 2) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("divergence rejects mismatched grids") {
    Field2D a(6, 6, 0.0, 1.0), b(6, 5, 0.0, 1.0);
    CHECK_THROWS_AS((void)divergence(a, b), std::invalid_argument);
}

TEST_CASE("masked_mean basics and empty-mask convention") {
    Field2D f(4, 4, 3.0, 1.0);
    CHECK(masked_mean(f, full_mask(4, 4)) == 3.0);
    CHECK(masked_mean(f, BitMask2D(4, 4, false)) == 0.0);

    Field2D g(2, 2, 0.0, 1.0);
    g.v = {1.0, 2.0, 3.0, 4.0};
    BitMask2D m(2, 2, false);
    m.set(0, 1, true);  // 2
    m.set(1, 1, true);  // 4
    CHECK(masked_mean(g, m) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("masked_mean over the full mask equals the plain mean") {
    Rng rng(5);
    Field2D f = random_field(9, 6, 1.0, rng);
    CHECK(masked_mean(f, full_mask(9, 6)) ==
          doctest::Approx(f.mean()).epsilon(1e-12));
}

TEST_CASE("interior_mask clears the one-cell border") {
    BitMask2D m(5, 5, true);
    BitMask2D in = interior_mask(m);
    CHECK(in.count() == 9);
    CHECK_FALSE(in.get(0, 0));
    CHECK_FALSE(in.get(4, 2));
    CHECK(in.get(2, 2));
}
