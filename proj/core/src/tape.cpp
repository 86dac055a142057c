#include "hydropinn/tape.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <utility>

#include "hydropinn/fft.hpp"

namespace hydropinn::ad {

namespace {
constexpr double kHypotGuard = 1e-30;
}

Shape shape1(int n) {
    Shape s;
    s.rank = 1;
    s.d = {n, 1, 1, 1};
    return s;
}

Shape shape3(int c, int h, int w) {
    Shape s;
    s.rank = 3;
    s.d = {c, h, w, 1};
    return s;
}

Shape shape4(int a, int b, int c, int d) {
    Shape s;
    s.rank = 4;
    s.d = {a, b, c, d};
    return s;
}

Tensor tensor_from_field(const Field2D& f) {
    Tensor t(shape3(1, f.rows, f.cols));
    t.v = f.v;
    return t;
}

Field2D field_from_tensor(const Tensor& t, double spacing) {
    if (t.shape.rank != 3 || t.shape.d[0] != 1) {
        throw std::invalid_argument("field_from_tensor: need a (1,H,W) tensor");
    }
    Field2D f(t.shape.d[1], t.shape.d[2], 0.0, spacing);
    f.v = t.v;
    return f;
}

int Tape::push(Tensor value, std::function<void(Tape&, int)> back) {
    nodes_.push_back(Node{std::move(value), std::move(back)});
    grads_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor t) { return push(std::move(t), {}); }

int Tape::scalar_leaf(double x) {
    Tensor t(shape1(1));
    t.v[0] = x;
    return leaf(std::move(t));
}

Tensor& Tape::grad(int id) {
    if (grads_[id].v.empty()) {
        grads_[id] = Tensor(nodes_[id].value.shape, 0.0);
    }
    return grads_[id];
}

void Tape::accumulate(int id, const Tensor& g) {
    Tensor& dst = grad(id);
    for (std::size_t k = 0; k < dst.v.size(); ++k) dst.v[k] += g.v[k];
}

void Tape::backward(int root) {
    if (nodes_[root].value.numel() != 1) {
        throw std::invalid_argument("backward: root must be scalar");
    }
    grad(root).v[0] = 1.0;
    for (int id = root; id >= 0; --id) {
        if (!has_grad(id)) continue;
        if (nodes_[id].back) nodes_[id].back(*this, id);
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!(a.shape == b.shape)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}
}  // namespace

int Tape::add(int a, int b) {
    require_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] += val(b).v[k];
    return push(std::move(out), [a, b](Tape& t, int id) {
        t.accumulate(a, t.grad(id));
        t.accumulate(b, t.grad(id));
    });
}

int Tape::sub(int a, int b) {
    require_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] -= val(b).v[k];
    return push(std::move(out), [a, b](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        t.accumulate(a, g);
        Tensor& gb = t.grad(b);
        for (std::size_t k = 0; k < gb.v.size(); ++k) gb.v[k] -= g.v[k];
    });
}

int Tape::mul(int a, int b) {
    require_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] *= val(b).v[k];
    return push(std::move(out), [a, b](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            ga.v[k] += g.v[k] * vb.v[k];
            gb.v[k] += g.v[k] * va.v[k];
        }
    });
}

int Tape::div(int a, int b) {
    require_same_shape(val(a), val(b), "div");
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] /= val(b).v[k];
    return push(std::move(out), [a, b](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            const double ib = 1.0 / vb.v[k];
            ga.v[k] += g.v[k] * ib;
            gb.v[k] -= g.v[k] * va.v[k] * ib * ib;
        }
    });
}

int Tape::relu(int x) {
    Tensor out = val(x);
    for (auto& v : out.v) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), [x](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad(x);
        const Tensor& vx = t.val(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            if (vx.v[k] > 0.0) gx.v[k] += g.v[k];
        }
    });
}

int Tape::sigmoid(int x) {
    Tensor out = val(x);
    for (auto& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(out), [x](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.val(id);
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            gx.v[k] += g.v[k] * y.v[k] * (1.0 - y.v[k]);
        }
    });
}

int Tape::softplus(int x) {
    Tensor out = val(x);
    for (auto& v : out.v) {
        v = v > 30.0 ? v : std::log1p(std::exp(v));
    }
    return push(std::move(out), [x](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.val(x);
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            gx.v[k] += g.v[k] / (1.0 + std::exp(-vx.v[k]));
        }
    });
}

int Tape::square(int x) {
    Tensor out = val(x);
    for (auto& v : out.v) v *= v;
    return push(std::move(out), [x](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.val(x);
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            gx.v[k] += 2.0 * vx.v[k] * g.v[k];
        }
    });
}

int Tape::sqrt_op(int x) {
    Tensor out = val(x);
    for (auto& v : out.v) v = std::sqrt(v);
    return push(std::move(out), [x](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.val(id);
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            gx.v[k] += 0.5 * g.v[k] / y.v[k];
        }
    });
}

int Tape::log_op(int x) {
    Tensor out = val(x);
    for (auto& v : out.v) v = std::log(v);
    return push(std::move(out), [x](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.val(x);
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            gx.v[k] += g.v[k] / vx.v[k];
        }
    });
}

int Tape::recip(int x) {
    Tensor out = val(x);
    for (auto& v : out.v) v = 1.0 / v;
    return push(std::move(out), [x](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.val(id);
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            gx.v[k] -= g.v[k] * y.v[k] * y.v[k];
        }
    });
}

int Tape::neg(int x) { return scale(x, -1.0); }

int Tape::scale(int x, double c) {
    Tensor out = val(x);
    for (auto& v : out.v) v *= c;
    return push(std::move(out), [x, c](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) gx.v[k] += c * g.v[k];
    });
}

int Tape::add_const(int x, double c) {
    Tensor out = val(x);
    for (auto& v : out.v) v += c;
    return push(std::move(out),
                [x](Tape& t, int id) { t.accumulate(x, t.grad(id)); });
}

int Tape::pow_pos(int x, double p) {
    Tensor out = val(x);
    for (auto& v : out.v) v = v > 0.0 ? std::pow(v, p) : 0.0;
    return push(std::move(out), [x, p](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.val(x);
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            if (vx.v[k] > 0.0) {
                gx.v[k] += g.v[k] * p * std::pow(vx.v[k], p - 1.0);
            }
        }
    });
}

int Tape::hypot_guarded(int a, int b) {
    require_same_shape(val(a), val(b), "hypot_guarded");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (std::size_t k = 0; k < out.v.size(); ++k) {
        out.v[k] = std::sqrt(out.v[k] * out.v[k] + vb.v[k] * vb.v[k] +
                             kHypotGuard * kHypotGuard);
    }
    return push(std::move(out), [a, b](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& m = t.val(id);
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        for (std::size_t k = 0; k < g.v.size(); ++k) {
            const double im = 1.0 / m.v[k];
            ga.v[k] += g.v[k] * va.v[k] * im;
            gb.v[k] += g.v[k] * vb.v[k] * im;
        }
    });
}

int Tape::stop_grad(int x) {
    Tensor out = val(x);
    return push(std::move(out), {});
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

int Tape::concat_c(int a, int b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.shape.rank != 3 || vb.shape.rank != 3 ||
        va.shape.d[1] != vb.shape.d[1] || va.shape.d[2] != vb.shape.d[2]) {
        throw std::invalid_argument("concat_c: incompatible shapes");
    }
    Tensor out(shape3(va.shape.d[0] + vb.shape.d[0], va.shape.d[1],
                      va.shape.d[2]));
    std::copy(va.v.begin(), va.v.end(), out.v.begin());
    std::copy(vb.v.begin(), vb.v.end(), out.v.begin() + va.v.size());
    const std::size_t na = va.v.size();
    return push(std::move(out), [a, b, na](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        for (std::size_t k = 0; k < na; ++k) ga.v[k] += g.v[k];
        for (std::size_t k = na; k < g.v.size(); ++k) {
            gb.v[k - na] += g.v[k];
        }
    });
}

int Tape::upsample2(int x) {
    const Tensor& vx = val(x);
    if (vx.shape.rank != 3) {
        throw std::invalid_argument("upsample2: need (C,H,W)");
    }
    const int c = vx.shape.d[0], h = vx.shape.d[1], w = vx.shape.d[2];
    Tensor out(shape3(c, 2 * h, 2 * w));
    for (int ch = 0; ch < c; ++ch) {
        const double* src = &vx.v[static_cast<std::size_t>(ch) * h * w];
        double* dst = &out.v[static_cast<std::size_t>(ch) * 4 * h * w];
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const double v = src[i * w + j];
                dst[(2 * i) * 2 * w + 2 * j] = v;
                dst[(2 * i) * 2 * w + 2 * j + 1] = v;
                dst[(2 * i + 1) * 2 * w + 2 * j] = v;
                dst[(2 * i + 1) * 2 * w + 2 * j + 1] = v;
            }
        }
    }
    return push(std::move(out), [x, c, h, w](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            const double* gs = &g.v[static_cast<std::size_t>(ch) * 4 * h * w];
            double* gd = &gx.v[static_cast<std::size_t>(ch) * h * w];
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < w; ++j) {
                    gd[i * w + j] += gs[(2 * i) * 2 * w + 2 * j] +
                                     gs[(2 * i) * 2 * w + 2 * j + 1] +
                                     gs[(2 * i + 1) * 2 * w + 2 * j] +
                                     gs[(2 * i + 1) * 2 * w + 2 * j + 1];
                }
            }
        }
    });
}

int Tape::mul_gate(int x, int alpha) {
    const Tensor& vx = val(x);
    const Tensor& va = val(alpha);
    if (vx.shape.rank != 3 || va.shape.rank != 3 || va.shape.d[0] != 1 ||
        va.shape.d[1] != vx.shape.d[1] || va.shape.d[2] != vx.shape.d[2]) {
        throw std::invalid_argument("mul_gate: alpha must be (1,H,W) matching x");
    }
    const int c = vx.shape.d[0];
    const long hw = static_cast<long>(vx.shape.d[1]) * vx.shape.d[2];
    Tensor out = vx;
    for (int ch = 0; ch < c; ++ch) {
        for (long k = 0; k < hw; ++k) out.v[ch * hw + k] *= va.v[k];
    }
    return push(std::move(out), [x, alpha, c, hw](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.val(x);
        const Tensor& va = t.val(alpha);
        Tensor& gx = t.grad(x);
        Tensor& ga = t.grad(alpha);
        for (int ch = 0; ch < c; ++ch) {
            for (long k = 0; k < hw; ++k) {
                gx.v[ch * hw + k] += g.v[ch * hw + k] * va.v[k];
                ga.v[k] += g.v[ch * hw + k] * vx.v[ch * hw + k];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// stencils
// ---------------------------------------------------------------------------

namespace {

// dir = 0: d/dx (columns), dir = 1: d/dy (rows); reflective boundary.
void stencil_forward(const double* src, double* dst, int h, int w,
                     double inv2h, int dir) {
    for (int i = 0; i < h; ++i) {
        const int im = dir == 1 ? (i > 0 ? i - 1 : 0) : i;
        const int ip = dir == 1 ? (i < h - 1 ? i + 1 : h - 1) : i;
        for (int j = 0; j < w; ++j) {
            const int jm = dir == 0 ? (j > 0 ? j - 1 : 0) : j;
            const int jp = dir == 0 ? (j < w - 1 ? j + 1 : w - 1) : j;
            dst[i * w + j] =
                (src[ip * w + jp] - src[im * w + jm]) * inv2h;
        }
    }
}

void stencil_adjoint(const double* g, double* gx, int h, int w, double inv2h,
                     int dir) {
    for (int i = 0; i < h; ++i) {
        const int im = dir == 1 ? (i > 0 ? i - 1 : 0) : i;
        const int ip = dir == 1 ? (i < h - 1 ? i + 1 : h - 1) : i;
        for (int j = 0; j < w; ++j) {
            const int jm = dir == 0 ? (j > 0 ? j - 1 : 0) : j;
            const int jp = dir == 0 ? (j < w - 1 ? j + 1 : w - 1) : j;
            const double gv = g[i * w + j] * inv2h;
            gx[ip * w + jp] += gv;
            gx[im * w + jm] -= gv;
        }
    }
}

}  // namespace

int Tape::grad_x(int x, double spacing) {
    const Tensor& vx = val(x);
    if (vx.shape.rank != 3 || vx.shape.d[1] < 3 || vx.shape.d[2] < 3) {
        throw std::invalid_argument("grad_x: grid too small for stencil");
    }
    const int c = vx.shape.d[0], h = vx.shape.d[1], w = vx.shape.d[2];
    const double inv2h = 1.0 / (2.0 * spacing);
    Tensor out(vx.shape);
    for (int ch = 0; ch < c; ++ch) {
        stencil_forward(&vx.v[static_cast<std::size_t>(ch) * h * w],
                        &out.v[static_cast<std::size_t>(ch) * h * w], h, w,
                        inv2h, 0);
    }
    return push(std::move(out), [x, c, h, w, inv2h](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            stencil_adjoint(&g.v[static_cast<std::size_t>(ch) * h * w],
                            &gx.v[static_cast<std::size_t>(ch) * h * w], h, w,
                            inv2h, 0);
        }
    });
}

int Tape::grad_y(int x, double spacing) {
    const Tensor& vx = val(x);
    if (vx.shape.rank != 3 || vx.shape.d[1] < 3 || vx.shape.d[2] < 3) {
        throw std::invalid_argument("grad_y: grid too small for stencil");
    }
    const int c = vx.shape.d[0], h = vx.shape.d[1], w = vx.shape.d[2];
    const double inv2h = 1.0 / (2.0 * spacing);
    Tensor out(vx.shape);
    for (int ch = 0; ch < c; ++ch) {
        stencil_forward(&vx.v[static_cast<std::size_t>(ch) * h * w],
                        &out.v[static_cast<std::size_t>(ch) * h * w], h, w,
                        inv2h, 1);
    }
    return push(std::move(out), [x, c, h, w, inv2h](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            stencil_adjoint(&g.v[static_cast<std::size_t>(ch) * h * w],
                            &gx.v[static_cast<std::size_t>(ch) * h * w], h, w,
                            inv2h, 1);
        }
    });
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

int Tape::conv2d(int x, int w, int bias, int stride) {
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    if (vx.shape.rank != 3 || vw.shape.rank != 4) {
        throw std::invalid_argument("conv2d: need (Ci,H,W) input, rank-4 kernel");
    }
    const int ci = vx.shape.d[0], h = vx.shape.d[1], wd = vx.shape.d[2];
    const int co = vw.shape.d[0], kci = vw.shape.d[1], kh = vw.shape.d[2],
              kw = vw.shape.d[3];
    if (kci != ci || kh != kw) {
        throw std::invalid_argument("conv2d: kernel/input channel mismatch");
    }
    if (stride != 1 && stride != 2) {
        throw std::invalid_argument("conv2d: stride must be 1 or 2");
    }
    if (h % stride != 0 || wd % stride != 0) {
        throw std::invalid_argument("conv2d: dims must divide by stride");
    }
    const int pad = (kh - 1) / 2;
    const int oh = h / stride, ow = wd / stride;
    if (bias >= 0 && val(bias).numel() != co) {
        throw std::invalid_argument("conv2d: bias size mismatch");
    }

    Tensor out(shape3(co, oh, ow));
    if (bias >= 0) {
        const Tensor& vb = val(bias);
        for (int c = 0; c < co; ++c) {
            double* o = &out.v[static_cast<std::size_t>(c) * oh * ow];
            for (long k = 0; k < static_cast<long>(oh) * ow; ++k) {
                o[k] = vb.v[c];
            }
        }
    }
    for (int c = 0; c < co; ++c) {
        double* o = &out.v[static_cast<std::size_t>(c) * oh * ow];
        for (int ic = 0; ic < ci; ++ic) {
            const double* xp = &vx.v[static_cast<std::size_t>(ic) * h * wd];
            const double* wp =
                &vw.v[(static_cast<std::size_t>(c) * ci + ic) * kh * kw];
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = wp[ky * kw + kx];
                    // ox range keeping ix = ox*stride + kx - pad inside [0,wd)
                    int ox0 = 0;
                    while (ox0 * stride + kx - pad < 0) ++ox0;
                    int ox1 = ow - 1;
                    while (ox1 >= 0 && ox1 * stride + kx - pad >= wd) --ox1;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xp + static_cast<std::size_t>(iy) * wd;
                        double* orow = o + static_cast<std::size_t>(oy) * ow;
                        const int base = kx - pad;
                        for (int ox = ox0; ox <= ox1; ++ox) {
                            orow[ox] += wv * xrow[ox * stride + base];
                        }
                    }
                }
            }
        }
    }

    return push(std::move(out), [x, w, bias, stride, ci, h, wd, co, kh, kw,
                                 pad, oh, ow](Tape& t, int id) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.val(x);
        const Tensor& vw = t.val(w);
        Tensor& gx = t.grad(x);
        Tensor& gw = t.grad(w);
        for (int c = 0; c < co; ++c) {
            const double* gp = &g.v[static_cast<std::size_t>(c) * oh * ow];
            for (int ic = 0; ic < ci; ++ic) {
                const double* xp = &vx.v[static_cast<std::size_t>(ic) * h * wd];
                double* gxp = &gx.v[static_cast<std::size_t>(ic) * h * wd];
                const std::size_t wbase =
                    (static_cast<std::size_t>(c) * ci + ic) * kh * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wv = vw.v[wbase + ky * kw + kx];
                        double wacc = 0.0;
                        int ox0 = 0;
                        while (ox0 * stride + kx - pad < 0) ++ox0;
                        int ox1 = ow - 1;
                        while (ox1 >= 0 && ox1 * stride + kx - pad >= wd) --ox1;
                        const int base = kx - pad;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            const double* xrow =
                                xp + static_cast<std::size_t>(iy) * wd;
                            double* gxrow =
                                gxp + static_cast<std::size_t>(iy) * wd;
                            const double* grow =
                                gp + static_cast<std::size_t>(oy) * ow;
                            for (int ox = ox0; ox <= ox1; ++ox) {
                                const double gv = grow[ox];
                                gxrow[ox * stride + base] += wv * gv;
                                wacc += xrow[ox * stride + base] * gv;
                            }
                        }
                        gw.v[wbase + ky * kw + kx] += wacc;
                    }
                }
            }
        }
        if (bias >= 0) {
            Tensor& gb = t.grad(bias);
            for (int c = 0; c < co; ++c) {
                const double* gp = &g.v[static_cast<std::size_t>(c) * oh * ow];
                double acc = 0.0;
                for (long k = 0; k < static_cast<long>(oh) * ow; ++k) {
                    acc += gp[k];
                }
                gb.v[c] += acc;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// spectral convolution
// ---------------------------------------------------------------------------

namespace {

using cplx = std::complex<double>;

// Per-axis retained mode: block index t in [0,2K) maps to frequency
// t < K ? t : N - 2K + t.
inline int mode_index(int t, int k, int n) {
    return t < k ? t : n - 2 * k + t;
}

// G = 0.5 * (S + conj(mirror(S))) over the full spectrum; self-adjoint.
void hermitize(const std::vector<cplx>& s, std::vector<cplx>& g, int h, int w) {
    for (int r = 0; r < h; ++r) {
        const int rm = (h - r) % h;
        for (int c = 0; c < w; ++c) {
            const int cm = (w - c) % w;
            g[static_cast<std::size_t>(r) * w + c] =
                0.5 * (s[static_cast<std::size_t>(r) * w + c] +
                       std::conj(s[static_cast<std::size_t>(rm) * w + cm]));
        }
    }
}

}  // namespace

int Tape::spectral_conv(int x, int w, int k_max) {
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    if (vx.shape.rank != 3) {
        throw std::invalid_argument("spectral_conv: need (C,H,W) input");
    }
    const int ci = vx.shape.d[0], h = vx.shape.d[1], wd = vx.shape.d[2];
    if (k_max < 1 || 2 * k_max > h || 2 * k_max > wd) {
        throw std::invalid_argument("spectral_conv: k_max too large for grid");
    }
    const int tk = 2 * k_max;
    if (vw.shape.rank != 4 || vw.shape.d[0] != ci || vw.shape.d[2] != tk ||
        vw.shape.d[3] != 2 * tk) {
        throw std::invalid_argument("spectral_conv: weight shape mismatch");
    }
    const int co = vw.shape.d[1];
    const long n = static_cast<long>(h) * wd;

    // Forward spectra of every input channel (kept for the backward pass).
    auto xhat = std::make_shared<std::vector<cplx>>(
        static_cast<std::size_t>(ci) * n);
    for (int c = 0; c < ci; ++c) {
        cplx* spec = xhat->data() + static_cast<std::size_t>(c) * n;
        const double* src = &vx.v[static_cast<std::size_t>(c) * n];
        for (long k = 0; k < n; ++k) spec[k] = cplx(src[k], 0.0);
        fft2(spec, h, wd, false);
    }

    Tensor out(shape3(co, h, wd));
    std::vector<cplx> s(static_cast<std::size_t>(n));
    std::vector<cplx> g(static_cast<std::size_t>(n));
    for (int oc = 0; oc < co; ++oc) {
        std::fill(s.begin(), s.end(), cplx(0.0, 0.0));
        for (int a = 0; a < tk; ++a) {
            const int r = mode_index(a, k_max, h);
            for (int b = 0; b < tk; ++b) {
                const int cix = mode_index(b, k_max, wd);
                cplx acc(0.0, 0.0);
                for (int icc = 0; icc < ci; ++icc) {
                    const std::size_t wb =
                        ((static_cast<std::size_t>(icc) * co + oc) * tk + a) *
                            (2 * tk) +
                        2 * b;
                    const cplx wv(vw.v[wb], vw.v[wb + 1]);
                    acc += wv * (*xhat)[static_cast<std::size_t>(icc) * n +
                                        static_cast<std::size_t>(r) * wd + cix];
                }
                s[static_cast<std::size_t>(r) * wd + cix] = acc;
            }
        }
        hermitize(s, g, h, wd);
        fft2(g.data(), h, wd, true);
        double* dst = &out.v[static_cast<std::size_t>(oc) * n];
        const double invn = 1.0 / static_cast<double>(n);
        for (long k = 0; k < n; ++k) dst[k] = g[k].real() * invn;
    }

    return push(std::move(out), [x, w, k_max, ci, co, h, wd, n, tk,
                                 xhat](Tape& t, int id) {
        const Tensor& gout = t.grad(id);
        const Tensor& vw = t.val(w);
        Tensor& gx = t.grad(x);
        Tensor& gw = t.grad(w);
        const double invn = 1.0 / static_cast<double>(n);

        // Adjoint of Re(ifft)/n: Ghat = fft(g)/n; then the Hermitian
        // projection is self-adjoint, and the block gather mirrors the
        // scatter.
        std::vector<cplx> gh(static_cast<std::size_t>(n));
        std::vector<cplx> sbar(static_cast<std::size_t>(n));
        std::vector<cplx> xbar(static_cast<std::size_t>(ci) * n,
                               cplx(0.0, 0.0));
        for (int oc = 0; oc < co; ++oc) {
            const double* gsrc = &gout.v[static_cast<std::size_t>(oc) * n];
            for (long k = 0; k < n; ++k) gh[k] = cplx(gsrc[k] * invn, 0.0);
            fft2(gh.data(), h, wd, false);
            hermitize(gh, sbar, h, wd);
            for (int a = 0; a < tk; ++a) {
                const int r = mode_index(a, k_max, h);
                for (int b = 0; b < tk; ++b) {
                    const int cix = mode_index(b, k_max, wd);
                    const cplx ybar =
                        sbar[static_cast<std::size_t>(r) * wd + cix];
                    for (int icc = 0; icc < ci; ++icc) {
                        const std::size_t wb =
                            ((static_cast<std::size_t>(icc) * co + oc) * tk +
                             a) *
                                (2 * tk) +
                            2 * b;
                        const cplx wv(vw.v[wb], vw.v[wb + 1]);
                        const cplx xh =
                            (*xhat)[static_cast<std::size_t>(icc) * n +
                                    static_cast<std::size_t>(r) * wd + cix];
                        const cplx wgrad = ybar * std::conj(xh);
                        gw.v[wb] += wgrad.real();
                        gw.v[wb + 1] += wgrad.imag();
                        xbar[static_cast<std::size_t>(icc) * n +
                             static_cast<std::size_t>(r) * wd + cix] +=
                            std::conj(wv) * ybar;
                    }
                }
            }
        }
        // Adjoint of the unnormalized forward FFT is the unnormalized
        // backward FFT; the input embedding keeps only the real part.
        std::vector<cplx> buf(static_cast<std::size_t>(n));
        for (int icc = 0; icc < ci; ++icc) {
            std::copy(xbar.begin() + static_cast<std::size_t>(icc) * n,
                      xbar.begin() + static_cast<std::size_t>(icc + 1) * n,
                      buf.begin());
            fft2(buf.data(), h, wd, true);
            double* dst = &gx.v[static_cast<std::size_t>(icc) * n];
            for (long k = 0; k < n; ++k) dst[k] += buf[k].real();
        }
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

int Tape::mean_all(int x) {
    const Tensor& vx = val(x);
    const double invn = 1.0 / static_cast<double>(vx.numel());
    Tensor out(shape1(1));
    for (double v : vx.v) out.v[0] += v;
    out.v[0] *= invn;
    return push(std::move(out), [x, invn](Tape& t, int id) {
        const double g = t.grad(id).v[0] * invn;
        Tensor& gx = t.grad(x);
        for (auto& v : gx.v) v += g;
    });
}

int Tape::sum_all(int x) {
    const Tensor& vx = val(x);
    Tensor out(shape1(1));
    for (double v : vx.v) out.v[0] += v;
    return push(std::move(out), [x](Tape& t, int id) {
        const double g = t.grad(id).v[0];
        Tensor& gx = t.grad(x);
        for (auto& v : gx.v) v += g;
    });
}

int Tape::masked_mean(int x, const BitMask2D& mask) {
    const Tensor& vx = val(x);
    if (vx.shape.rank != 3 || vx.shape.d[0] != 1 ||
        vx.shape.d[1] != mask.rows || vx.shape.d[2] != mask.cols) {
        throw std::invalid_argument("masked_mean: mask/tensor mismatch");
    }
    const long cnt = mask.count();
    Tensor out(shape1(1));
    if (cnt > 0) {
        double acc = 0.0;
        for (std::size_t k = 0; k < vx.v.size(); ++k) {
            if (mask.bits[k]) acc += vx.v[k];
        }
        out.v[0] = acc / static_cast<double>(cnt);
    }
    if (cnt == 0) {
        return push(std::move(out), {});  // constant zero, nothing to flow
    }
    auto bits = std::make_shared<std::vector<std::uint8_t>>(mask.bits);
    const double invn = 1.0 / static_cast<double>(cnt);
    return push(std::move(out), [x, bits, invn](Tape& t, int id) {
        const double g = t.grad(id).v[0] * invn;
        Tensor& gx = t.grad(x);
        for (std::size_t k = 0; k < gx.v.size(); ++k) {
            if ((*bits)[k]) gx.v[k] += g;
        }
    });
}

int Tape::weighted_sum(const std::vector<std::pair<int, double>>& terms) {
    Tensor out(shape1(1));
    for (const auto& [id, c] : terms) {
        if (val(id).numel() != 1) {
            throw std::invalid_argument("weighted_sum: terms must be scalar");
        }
        out.v[0] += c * val(id).v[0];
    }
    auto copy = terms;
    return push(std::move(out), [copy](Tape& t, int id) {
        const double g = t.grad(id).v[0];
        for (const auto& [tid, c] : copy) t.grad(tid).v[0] += c * g;
    });
}

}  // namespace hydropinn::ad
