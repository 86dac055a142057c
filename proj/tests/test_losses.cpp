#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hydropinn/losses.hpp"
#include "hydropinn/rng.hpp"
#include "hydropinn/scene.hpp"

using namespace hydropinn;

TEST_CASE("gaussian NLL hand values") {
    Field2D y(4, 4, 1.0, 1.0), mu(4, 4, 1.0, 1.0), s2(4, 4, 1.0, 1.0);
    CHECK(gaussian_nll(y, mu, s2).scalar == doctest::Approx(0.0));

    for (auto& m : mu.v) m = 0.0;  // |y - mu| = 1, sigma2 = 1
    CHECK(gaussian_nll(y, mu, s2).scalar == doctest::Approx(0.5).epsilon(1e-12));

    for (auto& m : mu.v) m = 3.0;  // |y - mu| = 2
    for (auto& s : s2.v) s = 4.0;
    NllResult r = gaussian_nll(y, mu, s2);
    CHECK(r.per_cell.v[0] == doctest::Approx(1.19315).epsilon(1e-5));
    CHECK(r.scalar == doctest::Approx(0.5 * (1.0 + std::log(4.0))).epsilon(1e-12));
}

TEST_CASE("gaussian NLL rejects nonpositive variance") {
    Field2D y(4, 4, 0.0, 1.0), mu(4, 4, 0.0, 1.0), s2(4, 4, 0.0, 1.0);
    CHECK_THROWS_WITH_AS((void)gaussian_nll(y, mu, s2),
                         "variance must be positive", std::invalid_argument);
}

TEST_CASE("NLL is stationary in variance at the squared error") {
    Field2D y(3, 3, 0.0, 1.0), mu(3, 3, 0.0, 1.0), s2(3, 3, 1.0, 1.0);
    y.v[4] = 1.3;
    const double opt = (y.v[4] - mu.v[4]) * (y.v[4] - mu.v[4]);
    auto per_cell = [&](double s) {
        Field2D ss = s2;
        ss.v[4] = s;
        return gaussian_nll(y, mu, ss).per_cell.v[4];
    };
    const double at_opt = per_cell(opt);
    CHECK(per_cell(opt * 1.1) > at_opt);
    CHECK(per_cell(opt * 0.9) > at_opt);
}

TEST_CASE("NLL per-cell gradient identities vs finite differences") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const double y = rng.normal();
        const double mu = rng.normal();
        const double s2 = 0.3 + rng.uniform();
        auto nll = [&](double m, double s) {
            return 0.5 * ((y - m) * (y - m) / s + std::log(s));
        };
        const double dmu_analytic = (mu - y) / s2;
        const double ds2_analytic =
            0.5 * (1.0 / s2 - (y - mu) * (y - mu) / (s2 * s2));
        const double h = 1e-6;
        const double dmu_fd = (nll(mu + h, s2) - nll(mu - h, s2)) / (2 * h);
        const double ds2_fd = (nll(mu, s2 + h) - nll(mu, s2 - h)) / (2 * h);
        CHECK(dmu_analytic ==
              doctest::Approx(dmu_fd).epsilon(1e-6).scale(std::fabs(dmu_fd) + 1.0));
        CHECK(ds2_analytic ==
              doctest::Approx(ds2_fd).epsilon(1e-6).scale(std::fabs(ds2_fd) + 1.0));
    }
}

TEST_CASE("soft water probability hand values") {
    LossWeights w;  // tau_w = 0.05, temp = 0.02
    Field2D mu(3, 3, w.tau_w, 1.0);
    Field2D p = soft_water_prob(mu, w);
    CHECK(p.v[0] == doctest::Approx(0.5).epsilon(1e-12));

    for (auto& m : mu.v) m = w.tau_w + 10.0 * w.temp;
    p = soft_water_prob(mu, w);
    CHECK(p.v[0] > 0.9999);

    for (auto& m : mu.v) m = 0.07;
    p = soft_water_prob(mu, w);
    CHECK(p.v[0] == doctest::Approx(0.73106).epsilon(1e-4));
}

TEST_CASE("soft dice loss hand values and range") {
    LossWeights w;
    SUBCASE("perfect binary match is ~0") {
        Field2D p(4, 4, 0.0, 1.0);
        BitMask2D y(4, 4, false);
        for (int k = 0; k < 8; ++k) {
            p.v[k] = 1.0;
            y.bits[k] = 1;
        }
        w.dice_eps = 1e-9;
        CHECK(soft_dice_loss(p, y, w) == doctest::Approx(0.0).epsilon(1e-8));
    }
    SUBCASE("total miss approaches 1") {
        Field2D p(16, 16, 0.0, 1.0);
        BitMask2D y(16, 16, true);
        const double loss = soft_dice_loss(p, y, w);
        CHECK(loss == doctest::Approx(1.0 - w.dice_eps / (256.0 + w.dice_eps))
                          .epsilon(1e-12));
    }
    SUBCASE("hand-evaluated dice ratio at the eps->0 limit") {
        Field2D p(2, 2, 0.0, 1.0);
        p.v = {1.0, 0.0, 0.0, 0.0};
        BitMask2D y(2, 2, false);
        y.bits = {1, 1, 0, 0};
        w.dice_eps = 1e-12;
        CHECK(soft_dice_loss(p, y, w) ==
              doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    }
    SUBCASE("range on random inputs") {
        Rng rng(5);
        for (int t = 0; t < 20; ++t) {
            Field2D p(6, 6, 0.0, 1.0);
            BitMask2D y(6, 6, false);
            for (auto& v : p.v) v = rng.uniform();
            for (auto& b : y.bits) b = rng.uniform() < 0.4 ? 1 : 0;
            const double loss = soft_dice_loss(p, y, LossWeights{});
            CHECK(loss >= 0.0);
            CHECK(loss < 1.0);
        }
    }
}

TEST_CASE("mse hand values") {
    Field2D y(2, 2, 0.0, 1.0), mu(2, 2, 0.0, 1.0);
    CHECK(mse_loss(y, mu) == 0.0);
    for (auto& m : mu.v) m += 2.0;
    CHECK(mse_loss(y, mu) == doctest::Approx(4.0));
    y.v = {0.0, 1.0, 0.0, 1.0};
    mu.v = {1.0, 3.0, 1.0, 3.0};
    CHECK(mse_loss(y, mu) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("total loss composition per variant") {
    SceneConfig scfg;
    scfg.grid_size = 32;
    scfg.rng_seed = 100;
    Scene sc = make_scene(scfg);
    REQUIRE(sc.water_mask.count() > 0);

    Rng rng(2);
    Field2D mu(32, 32, 0.0, scfg.spacing);
    Field2D s2(32, 32, 1.0, scfg.spacing);
    for (auto& m : mu.v) m = rng.uniform(0.0, 1.0);
    for (auto& s : s2.v) s = 0.5 + rng.uniform();

    PhysicsConfig pcfg;
    LossWeights w;

    SUBCASE("stabilized before warm start is pure data loss") {
        w.variant = Variant::stabilized_mse;
        LossBundle b = total_loss(sc, mu, nullptr, 0, w, pcfg);
        CHECK(b.physics_weight == 0.0);
        CHECK(b.total == doctest::Approx(b.data_loss).epsilon(1e-15));
        CHECK(b.data_loss ==
              doctest::Approx(mse_loss(sc.depth_true, mu)).epsilon(1e-12));
    }

    SUBCASE("baseline applies lambda_max with no schedule") {
        w.variant = Variant::baseline_mse;
        LossBundle b = total_loss(sc, mu, nullptr, 0, w, pcfg);
        CHECK(b.physics_weight == pcfg.lambda_max);
        CHECK(b.total == doctest::Approx(b.data_loss +
                                         pcfg.lambda_max *
                                             (b.mass_loss + b.smooth_loss))
                             .epsilon(1e-12));
    }

    SUBCASE("perfect prediction drives every objective to its floor") {
        w.variant = Variant::uncertainty_aware;
        Field2D ones(32, 32, 1.0, scfg.spacing);
        LossBundle b = total_loss(sc, sc.depth_true, &ones, 50, w, pcfg);
        CHECK(b.data_loss == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(b.mass_loss <= 1e-8);
        CHECK(b.smooth_loss <= 1e-8);
        // The tempered logistic keeps soft dice above zero even on exact
        // depth (dry cells sit at p = logistic(-tau_w/temp) ~ 0.076); the
        // recorded value must match the standalone op at its floor.
        const double floor = soft_dice_loss(
            soft_water_prob(sc.depth_true, w), sc.water_mask, w);
        CHECK(b.dice_loss == doctest::Approx(floor).epsilon(1e-12));
        CHECK(b.dice_loss < 0.5);
        CHECK(b.total < w.w_dice * floor + 1e-6);
    }

    SUBCASE("lambda_max zero reduces to the weighted data objectives") {
        w.variant = Variant::uncertainty_aware;
        PhysicsConfig p0 = pcfg;
        p0.lambda_max = 0.0;
        LossBundle b = total_loss(sc, mu, &s2, 50, w, p0);
        const double nll = gaussian_nll(sc.depth_true, mu, s2).scalar;
        const double dice =
            soft_dice_loss(soft_water_prob(mu, w), sc.water_mask, w);
        CHECK(b.total ==
              doctest::Approx(w.w_nll * nll + w.w_dice * dice).epsilon(1e-12));
    }

    SUBCASE("uncertainty_aware without sigma2 is an error") {
        w.variant = Variant::uncertainty_aware;
        CHECK_THROWS_AS((void)total_loss(sc, mu, nullptr, 0, w, pcfg),
                        std::invalid_argument);
    }

    SUBCASE("reported total equals the weighted component sum") {
        w.variant = Variant::uncertainty_aware;
        for (int epoch : {0, 7, 30}) {
            LossBundle b = total_loss(sc, mu, &s2, epoch, w, pcfg);
            const double want = w.w_nll * b.data_loss + w.w_dice * b.dice_loss +
                                b.physics_weight * (b.mass_loss + b.smooth_loss);
            CHECK(b.total == doctest::Approx(want).epsilon(1e-12));
        }
    }
}
