#include "hydropinn/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hydropinn {

Field2D::Field2D(int rows_, int cols_, double fill, double spacing_)
    : rows(rows_), cols(cols_), spacing(spacing_),
      v(static_cast<std::size_t>(rows_) * cols_, fill) {
    if (rows_ <= 0 || cols_ <= 0) {
        throw std::invalid_argument("Field2D dimensions must be positive");
    }
    if (!(spacing_ > 0.0)) {
        throw std::invalid_argument("Field2D spacing must be positive");
    }
}

bool Field2D::all_finite() const {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
}

double Field2D::min() const { return *std::min_element(v.begin(), v.end()); }
double Field2D::max() const { return *std::max_element(v.begin(), v.end()); }

double Field2D::mean() const {
    return std::accumulate(v.begin(), v.end(), 0.0) / size();
}

BitMask2D::BitMask2D(int rows_, int cols_, bool fill)
    : rows(rows_), cols(cols_),
      bits(static_cast<std::size_t>(rows_) * cols_, fill ? 1 : 0) {
    if (rows_ <= 0 || cols_ <= 0) {
        throw std::invalid_argument("BitMask2D dimensions must be positive");
    }
}

long BitMask2D::count() const {
    long n = 0;
    for (auto b : bits) n += b;
    return n;
}

GradPair grad_central(const Field2D& f) {
    if (f.rows < 3 || f.cols < 3) {
        throw std::invalid_argument("grid too small for stencil");
    }
    const double inv2h = 1.0 / (2.0 * f.spacing);
    GradPair g{Field2D(f.rows, f.cols, 0.0, f.spacing),
               Field2D(f.rows, f.cols, 0.0, f.spacing)};
    for (int i = 0; i < f.rows; ++i) {
        const int im = i > 0 ? i - 1 : 0;
        const int ip = i < f.rows - 1 ? i + 1 : f.rows - 1;
        for (int j = 0; j < f.cols; ++j) {
            const int jm = j > 0 ? j - 1 : 0;
            const int jp = j < f.cols - 1 ? j + 1 : f.cols - 1;
            g.dx.at(i, j) = (f.at(i, jp) - f.at(i, jm)) * inv2h;
            g.dy.at(i, j) = (f.at(ip, j) - f.at(im, j)) * inv2h;
        }
    }
    return g;
}

Field2D divergence(const Field2D& fx, const Field2D& fy) {
    if (!fx.same_shape(fy) || fx.spacing != fy.spacing) {
        throw std::invalid_argument("divergence: component grids must match");
    }
    GradPair gx = grad_central(fx);
    GradPair gy = grad_central(fy);
    Field2D out(fx.rows, fx.cols, 0.0, fx.spacing);
    for (int k = 0; k < out.size(); ++k) {
        out.v[k] = gx.dx.v[k] + gy.dy.v[k];
    }
    return out;
}

double masked_mean(const Field2D& f, const BitMask2D& m) {
    if (!m.same_shape(f)) {
        throw std::invalid_argument("masked_mean: mask dimensions must match");
    }
    double sum = 0.0;
    long n = 0;
    for (int k = 0; k < f.size(); ++k) {
        if (m.bits[k]) {
            sum += f.v[k];
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

BitMask2D interior_mask(const BitMask2D& m) {
    BitMask2D out(m.rows, m.cols, false);
    for (int i = 1; i < m.rows - 1; ++i) {
        for (int j = 1; j < m.cols - 1; ++j) {
            out.set(i, j, m.get(i, j));
        }
    }
    return out;
}

BitMask2D erode4(const BitMask2D& m, int steps) {
    BitMask2D cur = m;
    for (int s = 0; s < steps; ++s) {
        BitMask2D next(m.rows, m.cols, false);
        for (int i = 0; i < m.rows; ++i) {
            for (int j = 0; j < m.cols; ++j) {
                if (!cur.get(i, j)) continue;
                const bool up = i == 0 || cur.get(i - 1, j);
                const bool dn = i == m.rows - 1 || cur.get(i + 1, j);
                const bool lf = j == 0 || cur.get(i, j - 1);
                const bool rt = j == m.cols - 1 || cur.get(i, j + 1);
                next.set(i, j, up && dn && lf && rt);
            }
        }
        cur = std::move(next);
    }
    return cur;
}

BitMask2D full_mask(int rows, int cols) { return BitMask2D(rows, cols, true); }

}  // namespace hydropinn
