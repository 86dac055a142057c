#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hydropinn/physics.hpp"
#include "hydropinn/rng.hpp"

using namespace hydropinn;

namespace {

BitMask2D interior_only(int rows, int cols) {
    return interior_mask(full_mask(rows, cols));
}

}  // namespace

TEST_CASE("manning velocity: flat surface and dry bed give zero flow") {
    PhysicsConfig cfg;
    Field2D depth(8, 8, 1.0, 1.0);
    Field2D wse(8, 8, 2.0, 1.0);
    VelocityPair vel = manning_velocity(depth, wse, cfg);
    for (double u : vel.u.v) CHECK(u == 0.0);
    for (double v : vel.v.v) CHECK(v == 0.0);

    Field2D dry(8, 8, 0.0, 1.0);
    Field2D sloped(8, 8, 0.0, 1.0);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) sloped.at(i, j) = 0.1 * j;
    }
    vel = manning_velocity(dry, sloped, cfg);
    for (double u : vel.u.v) CHECK(u == 0.0);
    for (double v : vel.v.v) CHECK(v == 0.0);
}

TEST_CASE("manning velocity matches the hand-evaluated sheet-flow formula") {
    PhysicsConfig cfg;  // n = 0.03
    const double dx = 1.0;
    Field2D depth(8, 8, 1.0, dx);
    Field2D wse(8, 8, 0.0, dx);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) wse.at(i, j) = 0.01 * j;  // S_x = +0.01
    }
    VelocityPair vel = manning_velocity(depth, wse, cfg);
    // speed = (1/0.03) * 1 * sqrt(0.01) = 3.3333, directed down-gradient.
    CHECK(vel.u.at(4, 4) == doctest::Approx(-3.3333).epsilon(1e-3));
    CHECK(std::fabs(vel.v.at(4, 4)) < 1e-6);
}

TEST_CASE("manning velocity rejects negative depth") {
    PhysicsConfig cfg;
    Field2D depth(8, 8, -0.5, 1.0);
    Field2D wse(8, 8, 0.0, 1.0);
    CHECK_THROWS_WITH_AS((void)manning_velocity(depth, wse, cfg),
                         "depth must be nonnegative", std::invalid_argument);
}

TEST_CASE("mass conservation loss: zero velocity, empty mask, linear flux") {
    Field2D depth(8, 8, 1.0, 1.0);
    Field2D zero(8, 8, 0.0, 1.0);
    CHECK(mass_conservation_loss(depth, zero, zero, full_mask(8, 8)) == 0.0);
    CHECK(mass_conservation_loss(depth, zero, zero, BitMask2D(8, 8, false)) ==
          0.0);

    Field2D u(8, 8, 0.0, 1.0);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) u.at(i, j) = static_cast<double>(j);
    }
    // depth = 1, flux = (j, 0): divergence exactly 1 at interior cells.
    CHECK(mass_conservation_loss(depth, u, zero, interior_only(8, 8)) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("smoothness loss: hydrostatic pond, constants, linear ramp") {
    Field2D dem(8, 8, 0.0, 1.0);
    Rng rng(3);
    for (auto& z : dem.v) z = rng.uniform(0.0, 0.5);
    Field2D depth(8, 8, 0.0, 1.0);
    for (int k = 0; k < depth.size(); ++k) depth.v[k] = 2.0 - dem.v[k];
    CHECK(wse_smoothness_loss(depth, dem, interior_only(8, 8)) <= 1e-20);

    Field2D cdepth(8, 8, 1.0, 1.0), cdem(8, 8, 4.0, 1.0);
    CHECK(wse_smoothness_loss(cdepth, cdem, full_mask(8, 8)) == 0.0);

    Field2D ramp(8, 8, 0.0, 1.0), zero(8, 8, 0.0, 1.0);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) ramp.at(i, j) = static_cast<double>(j);
    }
    CHECK(wse_smoothness_loss(ramp, zero, interior_only(8, 8)) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("physics loss gating behavior") {
    Rng rng(9);
    Field2D depth(10, 10, 0.0, 1.0), dem(10, 10, 0.0, 1.0);
    for (auto& d : depth.v) d = rng.uniform(0.0, 2.0);
    for (auto& z : dem.v) z = rng.uniform(0.0, 1.0);
    BitMask2D mask = interior_only(10, 10);
    PhysicsConfig cfg;

    SUBCASE("gating none equals the sum of the two residual ops") {
        Field2D wse(10, 10, 0.0, 1.0);
        for (int k = 0; k < wse.size(); ++k) wse.v[k] = depth.v[k] + dem.v[k];
        VelocityPair vel = manning_velocity(depth, wse, cfg);
        const double mass = mass_conservation_loss(depth, vel.u, vel.v, mask);
        const double smooth = wse_smoothness_loss(depth, dem, mask);
        PhysicsBreakdown pb = physics_loss(depth, dem, mask, nullptr, cfg);
        CHECK(pb.mass_loss == doctest::Approx(mass).epsilon(1e-12));
        CHECK(pb.smooth_loss == doctest::Approx(smooth).epsilon(1e-12));
        CHECK(pb.total == pb.mass_loss + pb.smooth_loss);
    }

    SUBCASE("huge variance relaxes the loss to zero") {
        cfg.gating = Gating::inverse_variance;
        Field2D huge(10, 10, 1e18, 1.0);
        PhysicsBreakdown pb = physics_loss(depth, dem, mask, &huge, cfg);
        PhysicsBreakdown raw = physics_loss(depth, dem, mask, nullptr,
                                            PhysicsConfig{});
        CHECK(pb.total <= 1e-15 * std::max(raw.total, 1.0));
    }

    SUBCASE("sigma2 equal to gate_epsilon halves the residuals exactly") {
        PhysicsBreakdown raw = physics_loss(depth, dem, mask, nullptr, cfg);
        cfg.gating = Gating::inverse_variance;
        Field2D s2(10, 10, cfg.gate_epsilon, 1.0);
        PhysicsBreakdown pb = physics_loss(depth, dem, mask, &s2, cfg);
        CHECK(pb.mass_loss == doctest::Approx(0.5 * raw.mass_loss).epsilon(1e-12));
        CHECK(pb.smooth_loss ==
              doctest::Approx(0.5 * raw.smooth_loss).epsilon(1e-12));
    }

    SUBCASE("gating without sigma2 is an error") {
        cfg.gating = Gating::inverse_variance;
        CHECK_THROWS_AS((void)physics_loss(depth, dem, mask, nullptr, cfg),
                        std::invalid_argument);
    }

    SUBCASE("gated total is nonincreasing in any cell's variance") {
        cfg.gating = Gating::inverse_variance;
        Field2D s2(10, 10, 0.7, 1.0);
        PhysicsBreakdown before = physics_loss(depth, dem, mask, &s2, cfg);
        s2.at(5, 5) = 2.9;  // raise one cell
        PhysicsBreakdown after = physics_loss(depth, dem, mask, &s2, cfg);
        CHECK(after.total <= before.total + 1e-15);
    }
}

TEST_CASE("physics residuals are nonnegative on random inputs") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        Field2D depth(9, 9, 0.0, 0.5), dem(9, 9, 0.0, 0.5);
        for (auto& d : depth.v) d = rng.uniform(0.0, 3.0);
        for (auto& z : dem.v) z = rng.normal();
        PhysicsBreakdown pb = physics_loss(depth, dem, interior_only(9, 9),
                                           nullptr, PhysicsConfig{});
        CHECK(pb.mass_loss >= 0.0);
        CHECK(pb.smooth_loss >= 0.0);
        CHECK(pb.total == pb.mass_loss + pb.smooth_loss);
    }
}

TEST_CASE("warm-start schedule: exact values and shape over a sweep") {
    PhysicsConfig cfg;
    cfg.e_warm = 5;
    cfg.e_ramp = 10;
    cfg.lambda_max = 1.0;

    CHECK(warmstart_weight(0, cfg) == 0.0);
    CHECK(warmstart_weight(4, cfg) == 0.0);
    CHECK(warmstart_weight(5, cfg) == 0.0);
    CHECK(warmstart_weight(10, cfg) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(warmstart_weight(15, cfg) == 1.0);
    CHECK(warmstart_weight(100, cfg) == 1.0);

    double prev = -1.0;
    for (int e = 0; e <= 40; ++e) {
        const double w = warmstart_weight(e, cfg);
        if (e < cfg.e_warm) CHECK(w == 0.0);
        if (e >= cfg.e_warm + cfg.e_ramp) CHECK(w == cfg.lambda_max);
        CHECK(w >= prev);
        prev = w;
    }
}
