#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "hydropinn/model.hpp"
#include "hydropinn/rng.hpp"
#include "hydropinn/tape.hpp"

using namespace hydropinn;
using ad::Tape;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(shape);
    for (auto& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

// d(mean of op(x)) / dx[k] via central differences.
double fd_mean(const std::function<double(const Tensor&)>& f, Tensor x, long k,
               double h = 1e-6) {
    Tensor xp = x;
    xp.v[k] += h;
    Tensor xm = x;
    xm.v[k] -= h;
    return (f(xp) - f(xm)) / (2.0 * h);
}

double dot(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.v.size(); ++k) acc += a.v[k] * b.v[k];
    return acc;
}

// ---------------------------------------------------------------------------
// Direct O(N^4) DFT-multiply-inverse oracle for the spectral convolution.
// ---------------------------------------------------------------------------

using cvec = std::vector<std::complex<double>>;

cvec dft2_naive(const std::vector<double>& x, int h, int w, bool inverse) {
    cvec out(static_cast<std::size_t>(h) * w);
    const double sign = inverse ? 2.0 * M_PI : -2.0 * M_PI;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            std::complex<double> acc(0.0, 0.0);
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < w; ++j) {
                    const double ang = sign * (static_cast<double>(r) * i / h +
                                               static_cast<double>(c) * j / w);
                    acc += x[static_cast<std::size_t>(i) * w + j] *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            }
            out[static_cast<std::size_t>(r) * w + c] = acc;
        }
    }
    return out;
}

cvec idft2_naive(const cvec& x, int h, int w) {
    cvec out(static_cast<std::size_t>(h) * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            std::complex<double> acc(0.0, 0.0);
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < w; ++j) {
                    const double ang =
                        2.0 * M_PI * (static_cast<double>(r) * i / h +
                                      static_cast<double>(c) * j / w);
                    acc += x[static_cast<std::size_t>(i) * w + j] *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            }
            out[static_cast<std::size_t>(r) * w + c] =
                acc / static_cast<double>(h * w);
        }
    }
    return out;
}

int mode_index(int t, int k, int n) { return t < k ? t : n - 2 * k + t; }

// Same contract as Tape::spectral_conv, evaluated with naive DFT sums.
// Returns the per-channel complex outputs so realness can be asserted too.
std::vector<cvec> spectral_oracle(const Tensor& x, const Tensor& w, int kmax) {
    const int ci = x.shape.d[0], h = x.shape.d[1], wd = x.shape.d[2];
    const int co = w.shape.d[1];
    const int tk = 2 * kmax;
    const long n = static_cast<long>(h) * wd;

    std::vector<cvec> xhat(ci);
    for (int c = 0; c < ci; ++c) {
        std::vector<double> chan(x.v.begin() + c * n, x.v.begin() + (c + 1) * n);
        xhat[c] = dft2_naive(chan, h, wd, false);
    }
    std::vector<cvec> out(co);
    for (int oc = 0; oc < co; ++oc) {
        cvec s(static_cast<std::size_t>(n), {0.0, 0.0});
        for (int a = 0; a < tk; ++a) {
            const int r = mode_index(a, kmax, h);
            for (int b = 0; b < tk; ++b) {
                const int c = mode_index(b, kmax, wd);
                std::complex<double> acc(0.0, 0.0);
                for (int icc = 0; icc < ci; ++icc) {
                    const std::size_t wb =
                        ((static_cast<std::size_t>(icc) * co + oc) * tk + a) *
                            (2 * tk) +
                        2 * b;
                    acc += std::complex<double>(w.v[wb], w.v[wb + 1]) *
                           xhat[icc][static_cast<std::size_t>(r) * wd + c];
                }
                s[static_cast<std::size_t>(r) * wd + c] = acc;
            }
        }
        cvec g(static_cast<std::size_t>(n));
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < wd; ++c) {
                const int rm = (h - r) % h;
                const int cm = (wd - c) % wd;
                g[static_cast<std::size_t>(r) * wd + c] =
                    0.5 * (s[static_cast<std::size_t>(r) * wd + c] +
                           std::conj(s[static_cast<std::size_t>(rm) * wd + cm]));
            }
        }
        out[oc] = idft2_naive(g, h, wd);
    }
    return out;
}

Tensor identity_spectral_weights(int channels, int kmax) {
    const int tk = 2 * kmax;
    Tensor w(ad::shape4(channels, channels, tk, 2 * tk), 0.0);
    for (int c = 0; c < channels; ++c) {
        for (int a = 0; a < tk; ++a) {
            for (int b = 0; b < tk; ++b) {
                const std::size_t idx =
                    ((static_cast<std::size_t>(c) * channels + c) * tk + a) *
                        (2 * tk) +
                    2 * b;
                w.v[idx] = 1.0;  // real identity multiplier
            }
        }
    }
    return w;
}

}  // namespace

TEST_CASE("elementwise op gradients vs finite differences") {
    Rng rng(42);
    struct Case {
        const char* name;
        std::function<int(Tape&, int)> build;
        double lo, hi;
    };
    const std::vector<Case> cases = {
        {"relu", [](Tape& t, int x) { return t.relu(x); }, -1.0, 1.0},
        {"sigmoid", [](Tape& t, int x) { return t.sigmoid(x); }, -2.0, 2.0},
        {"softplus", [](Tape& t, int x) { return t.softplus(x); }, -2.0, 2.0},
        {"square", [](Tape& t, int x) { return t.square(x); }, -2.0, 2.0},
        {"sqrt", [](Tape& t, int x) { return t.sqrt_op(x); }, 0.5, 3.0},
        {"log", [](Tape& t, int x) { return t.log_op(x); }, 0.5, 3.0},
        {"recip", [](Tape& t, int x) { return t.recip(x); }, 0.5, 3.0},
        {"pow23", [](Tape& t, int x) { return t.pow_pos(x, 2.0 / 3.0); }, 0.3,
         2.0},
        {"scale", [](Tape& t, int x) { return t.scale(x, -1.7); }, -1.0, 1.0},
        {"add_const", [](Tape& t, int x) { return t.add_const(x, 0.3); }, -1.0,
         1.0},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        Tensor x = random_tensor(ad::shape3(1, 5, 5), rng, c.lo, c.hi);
        auto value = [&](const Tensor& xv) {
            Tape t;
            return t.scalar(t.mean_all(c.build(t, t.leaf(xv))));
        };
        Tape t;
        int xid = t.leaf(x);
        int root = t.mean_all(c.build(t, xid));
        t.backward(root);
        for (long k : {0L, 7L, 24L}) {
            const double fd = fd_mean(value, x, k);
            CHECK(t.grad(xid).v[k] ==
                  doctest::Approx(fd).epsilon(1e-5).scale(std::fabs(fd) + 1e-3));
        }
    }
}

TEST_CASE("binary op gradients vs finite differences") {
    Rng rng(43);
    Tensor a = random_tensor(ad::shape3(1, 4, 4), rng, 0.5, 2.0);
    Tensor b = random_tensor(ad::shape3(1, 4, 4), rng, 0.5, 2.0);

    auto check_binary = [&](auto build) {
        auto value = [&](const Tensor& av, const Tensor& bv) {
            Tape t;
            return t.scalar(t.mean_all(build(t, t.leaf(av), t.leaf(bv))));
        };
        Tape t;
        int ia = t.leaf(a), ib = t.leaf(b);
        t.backward(t.mean_all(build(t, ia, ib)));
        for (long k : {1L, 9L}) {
            Tensor ap = a;
            ap.v[k] += 1e-6;
            Tensor am = a;
            am.v[k] -= 1e-6;
            const double fda = (value(ap, b) - value(am, b)) / 2e-6;
            CHECK(t.grad(ia).v[k] == doctest::Approx(fda).epsilon(1e-5));
            Tensor bp = b;
            bp.v[k] += 1e-6;
            Tensor bm = b;
            bm.v[k] -= 1e-6;
            const double fdb = (value(a, bp) - value(a, bm)) / 2e-6;
            CHECK(t.grad(ib).v[k] == doctest::Approx(fdb).epsilon(1e-5));
        }
    };
    check_binary([](Tape& t, int x, int y) { return t.add(x, y); });
    check_binary([](Tape& t, int x, int y) { return t.sub(x, y); });
    check_binary([](Tape& t, int x, int y) { return t.mul(x, y); });
    check_binary([](Tape& t, int x, int y) { return t.div(x, y); });
    check_binary([](Tape& t, int x, int y) { return t.hypot_guarded(x, y); });
}

TEST_CASE("linear ops satisfy the adjoint identity <Ax,g> = <x,A^T g>") {
    Rng rng(44);
    auto check_linear = [&](ad::Shape in_shape, auto build) {
        Tensor x = random_tensor(in_shape, rng);
        Tape t;
        int xid = t.leaf(x);
        int out = build(t, xid);
        Tensor g = random_tensor(t.val(out).shape, rng);
        int s = t.sum_all(t.mul(out, t.leaf(g)));
        t.backward(s);
        CHECK(dot(t.grad(xid), x) ==
              doctest::Approx(t.scalar(s)).epsilon(1e-10));
    };
    check_linear(ad::shape3(1, 6, 6),
                 [](Tape& t, int x) { return t.grad_x(x, 0.7); });
    check_linear(ad::shape3(1, 6, 6),
                 [](Tape& t, int x) { return t.grad_y(x, 1.3); });
    check_linear(ad::shape3(2, 4, 4),
                 [](Tape& t, int x) { return t.upsample2(x); });

    Rng wrng(45);
    Tensor w = random_tensor(ad::shape4(3, 2, 3, 3), wrng);
    check_linear(ad::shape3(2, 6, 6), [&](Tape& t, int x) {
        return t.conv2d(x, t.leaf(w), -1, 1);
    });
    check_linear(ad::shape3(2, 6, 6), [&](Tape& t, int x) {
        return t.conv2d(x, t.leaf(w), -1, 2);
    });
    Tensor sw = random_tensor(ad::shape4(2, 3, 4, 8), wrng);
    check_linear(ad::shape3(2, 8, 8), [&](Tape& t, int x) {
        return t.spectral_conv(x, t.leaf(sw), 2);
    });
}

TEST_CASE("conv2d weight and bias gradients vs finite differences") {
    Rng rng(46);
    Tensor x = random_tensor(ad::shape3(2, 6, 6), rng);
    Tensor w = random_tensor(ad::shape4(3, 2, 3, 3), rng);
    Tensor b = random_tensor(ad::shape1(3), rng);

    auto value = [&](const Tensor& wv, const Tensor& bv, int stride) {
        Tape t;
        return t.scalar(
            t.mean_all(t.conv2d(t.leaf(x), t.leaf(wv), t.leaf(bv), stride)));
    };
    for (int stride : {1, 2}) {
        Tape t;
        int wid = t.leaf(w), bid = t.leaf(b);
        t.backward(t.mean_all(t.conv2d(t.leaf(x), wid, bid, stride)));
        for (long k : {0L, 17L, 53L}) {
            Tensor wp = w, wm = w;
            wp.v[k] += 1e-6;
            wm.v[k] -= 1e-6;
            const double fd = (value(wp, b, stride) - value(wm, b, stride)) / 2e-6;
            CHECK(t.grad(wid).v[k] == doctest::Approx(fd).epsilon(1e-5));
        }
        Tensor bp = b, bm = b;
        bp.v[1] += 1e-6;
        bm.v[1] -= 1e-6;
        const double fd = (value(w, bp, stride) - value(w, bm, stride)) / 2e-6;
        CHECK(t.grad(bid).v[1] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("spectral conv weight gradients vs finite differences") {
    Rng rng(47);
    Tensor x = random_tensor(ad::shape3(2, 8, 8), rng);
    Tensor w = random_tensor(ad::shape4(2, 2, 4, 8), rng);
    auto value = [&](const Tensor& wv) {
        Tape t;
        return t.scalar(
            t.mean_all(t.square(t.spectral_conv(t.leaf(x), t.leaf(wv), 2))));
    };
    Tape t;
    int wid = t.leaf(w);
    t.backward(t.mean_all(t.square(t.spectral_conv(t.leaf(x), wid, 2))));
    for (long k : {0L, 31L, 64L, 127L}) {
        Tensor wp = w, wm = w;
        wp.v[k] += 1e-6;
        wm.v[k] -= 1e-6;
        const double fd = (value(wp) - value(wm)) / 2e-6;
        CHECK(t.grad(wid).v[k] ==
              doctest::Approx(fd).epsilon(1e-5).scale(std::fabs(fd) + 1e-6));
    }
}

TEST_CASE("spectral conv matches the direct DFT oracle") {
    Rng rng(48);
    for (const int n : {8, 16}) {
        const int ci = 2, co = 2, kmax = n / 4;
        Tensor x = random_tensor(ad::shape3(ci, n, n), rng);
        Tensor w = random_tensor(ad::shape4(ci, co, 2 * kmax, 4 * kmax), rng);
        Tensor got = spectral_conv2d(x, w, kmax);
        auto oracle = spectral_oracle(x, w, kmax);
        double scale = 0.0;
        for (double v : got.v) scale = std::max(scale, std::fabs(v));
        for (int oc = 0; oc < co; ++oc) {
            for (long k = 0; k < static_cast<long>(n) * n; ++k) {
                CHECK(std::fabs(got.v[oc * n * n + k] - oracle[oc][k].real()) <=
                      1e-8 * std::max(scale, 1.0));
                // Hermitian construction keeps the output real.
                CHECK(std::fabs(oracle[oc][k].imag()) <= 1e-10 * std::max(scale, 1.0));
            }
        }
    }
}

TEST_CASE("spectral conv band-unlimited identity and zero weights") {
    Rng rng(49);
    const int n = 8, c = 2;
    Tensor x = random_tensor(ad::shape3(c, n, n), rng);

    Tensor wid = identity_spectral_weights(c, n / 2);
    Tensor y = spectral_conv2d(x, wid, n / 2);
    for (long k = 0; k < static_cast<long>(x.v.size()); ++k) {
        CHECK(y.v[k] == doctest::Approx(x.v[k]).epsilon(1e-10));
    }

    Tensor wz(ad::shape4(c, c, 4, 8), 0.0);
    Tensor z = spectral_conv2d(x, wz, 2);
    for (double v : z.v) CHECK(std::fabs(v) < 1e-14);
}

TEST_CASE("spectral conv keeps or drops a pure cosine by band limit") {
    const int n = 8;
    auto cosine_rows = [n](int mode) {
        Tensor x(ad::shape3(1, n, n));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                x.v[static_cast<std::size_t>(i) * n + j] =
                    std::cos(2.0 * M_PI * mode * i / n);
            }
        }
        return x;
    };

    // Mode (1,0) lies inside the k_max = 2 corner blocks (rows {0,1,6,7});
    // identity weights reproduce it exactly.
    Tensor w2 = identity_spectral_weights(1, 2);
    Tensor x1 = cosine_rows(1);
    Tensor kept = spectral_conv2d(x1, w2, 2);
    for (long k = 0; k < static_cast<long>(x1.v.size()); ++k) {
        CHECK(kept.v[k] == doctest::Approx(x1.v[k]).epsilon(1e-10));
    }

    // Mode (3,0) falls outside those blocks (rows 3 and 5 are not retained),
    // so the band limit nulls it. Note the two-sided blocks always retain a
    // frequency together with its negative partner, so the lowest nonzero
    // mode can never be excluded on its own.
    Tensor x3 = cosine_rows(3);
    Tensor dropped = spectral_conv2d(x3, w2, 2);
    for (double v : dropped.v) CHECK(std::fabs(v) < 1e-10);
}

TEST_CASE("spectral conv rejects oversized k_max") {
    Tensor x(ad::shape3(1, 8, 8));
    Tensor w(ad::shape4(1, 1, 10, 20));
    Tape t;
    CHECK_THROWS_AS((void)t.spectral_conv(t.leaf(x), t.leaf(w), 5),
                    std::invalid_argument);
}

TEST_CASE("gate broadcast, concat, reductions, stop_grad") {
    Rng rng(50);
    Tensor x = random_tensor(ad::shape3(3, 4, 4), rng);
    Tensor alpha = random_tensor(ad::shape3(1, 4, 4), rng, 0.1, 0.9);

    SUBCASE("mul_gate gradients") {
        auto value = [&](const Tensor& xv, const Tensor& av) {
            Tape t;
            return t.scalar(t.mean_all(t.mul_gate(t.leaf(xv), t.leaf(av))));
        };
        Tape t;
        int xi = t.leaf(x), ai = t.leaf(alpha);
        t.backward(t.mean_all(t.mul_gate(xi, ai)));
        Tensor xp = x, xm = x;
        xp.v[20] += 1e-6;
        xm.v[20] -= 1e-6;
        CHECK(t.grad(xi).v[20] ==
              doctest::Approx((value(xp, alpha) - value(xm, alpha)) / 2e-6)
                  .epsilon(1e-5));
        Tensor ap = alpha, am = alpha;
        ap.v[5] += 1e-6;
        am.v[5] -= 1e-6;
        CHECK(t.grad(ai).v[5] ==
              doctest::Approx((value(x, ap) - value(x, am)) / 2e-6)
                  .epsilon(1e-5));
    }

    SUBCASE("concat routes gradients to both inputs") {
        Tensor b = random_tensor(ad::shape3(2, 4, 4), rng);
        Tape t;
        int ia = t.leaf(x), ib = t.leaf(b);
        t.backward(t.sum_all(t.concat_c(ia, ib)));
        for (double g : t.grad(ia).v) CHECK(g == 1.0);
        for (double g : t.grad(ib).v) CHECK(g == 1.0);
    }

    SUBCASE("masked_mean gradient spreads over the mask") {
        BitMask2D m(4, 4, false);
        m.set(1, 1, true);
        m.set(2, 3, true);
        Tape t;
        int xi = t.leaf(alpha);
        t.backward(t.masked_mean(xi, m));
        CHECK(t.grad(xi).v[1 * 4 + 1] == doctest::Approx(0.5));
        CHECK(t.grad(xi).v[2 * 4 + 3] == doctest::Approx(0.5));
        CHECK(t.grad(xi).v[0] == 0.0);

        Tape t2;
        int xj = t2.leaf(alpha);
        int mm = t2.masked_mean(xj, BitMask2D(4, 4, false));
        CHECK(t2.scalar(mm) == 0.0);  // empty-mask convention
    }

    SUBCASE("stop_grad blocks the flow") {
        Tape t;
        int xi = t.leaf(alpha);
        int s = t.mean_all(t.mul(t.stop_grad(xi), xi));
        t.backward(s);
        // Only the direct factor contributes: d/dx (c * x) = c / n.
        CHECK(t.grad(xi).v[3] ==
              doctest::Approx(alpha.v[3] / 16.0).epsilon(1e-12));
    }

    SUBCASE("weighted_sum combines scalars linearly") {
        Tape t;
        int a = t.scalar_leaf(2.0);
        int b = t.scalar_leaf(-3.0);
        int s = t.weighted_sum({{a, 1.5}, {b, 2.0}});
        CHECK(t.scalar(s) == doctest::Approx(-3.0));
        t.backward(s);
        CHECK(t.grad(a).v[0] == 1.5);
        CHECK(t.grad(b).v[0] == 2.0);
    }
}

TEST_CASE("doubling the loss doubles every gradient exactly") {
    Rng rng(51);
    Tensor x = random_tensor(ad::shape3(1, 5, 5), rng);
    Tape t1, t2;
    int a1 = t1.leaf(x);
    t1.backward(t1.mean_all(t1.square(a1)));
    int a2 = t2.leaf(x);
    t2.backward(t2.scale(t2.mean_all(t2.square(a2)), 2.0));
    for (long k = 0; k < x.numel(); ++k) {
        CHECK(t2.grad(a2).v[k] == 2.0 * t1.grad(a1).v[k]);
    }
}

TEST_CASE("zero loss yields zero gradients") {
    Rng rng(52);
    Tensor x = random_tensor(ad::shape3(1, 5, 5), rng);
    Tape t;
    int xi = t.leaf(x);
    t.backward(t.scale(t.mean_all(t.square(xi)), 0.0));
    for (double g : t.grad(xi).v) CHECK(g == 0.0);
}
