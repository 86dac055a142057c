/// @file field.hpp
/// @brief Uniform 2D grid container, boolean cell masks, and the central
/// finite-difference stencils every other component builds on.
///
/// Grid indexing: row-major, index = i * cols + j for row i (y) and column j
/// (x). `spacing` is the cell edge length in meters and scales all derivative
/// stencils.

#pragma once

#include <cstdint>
#include <vector>

namespace hydropinn {

struct Field2D {
    int rows{0};
    int cols{0};
    double spacing{1.0};
    std::vector<double> v;

    Field2D() = default;
    Field2D(int rows_, int cols_, double fill = 0.0, double spacing_ = 1.0);

    [[nodiscard]] int size() const { return rows * cols; }
    [[nodiscard]] int idx(int i, int j) const { return i * cols + j; }

    [[nodiscard]] double& at(int i, int j) { return v[idx(i, j)]; }
    [[nodiscard]] double at(int i, int j) const { return v[idx(i, j)]; }

    [[nodiscard]] bool same_shape(const Field2D& o) const {
        return rows == o.rows && cols == o.cols;
    }
    [[nodiscard]] bool all_finite() const;

    [[nodiscard]] double min() const;
    [[nodiscard]] double max() const;
    [[nodiscard]] double mean() const;
};

/// One boolean per cell; gates masked reductions and marks water/shadow.
struct BitMask2D {
    int rows{0};
    int cols{0};
    std::vector<std::uint8_t> bits;

    BitMask2D() = default;
    BitMask2D(int rows_, int cols_, bool fill = false);

    [[nodiscard]] int size() const { return rows * cols; }
    [[nodiscard]] bool get(int i, int j) const {
        return bits[i * cols + j] != 0;
    }
    void set(int i, int j, bool b) { bits[i * cols + j] = b ? 1 : 0; }

    /// Number of set cells (the N_water of masked means).
    [[nodiscard]] long count() const;

    [[nodiscard]] bool same_shape(const BitMask2D& o) const {
        return rows == o.rows && cols == o.cols;
    }
    [[nodiscard]] bool same_shape(const Field2D& o) const {
        return rows == o.rows && cols == o.cols;
    }
};

struct GradPair {
    Field2D dx;
    Field2D dy;
};

/// Central-difference gradient with reflective padding: the out-of-range
/// neighbor of a boundary cell is the boundary cell itself, so edges get a
/// one-sided half-magnitude estimate. Throws std::invalid_argument
/// ("grid too small for stencil") if either dimension is < 3.
[[nodiscard]] GradPair grad_central(const Field2D& f);

/// d(fx)/dx + d(fy)/dy, both via grad_central. Dimensions and spacing of
/// fx and fy must match.
[[nodiscard]] Field2D divergence(const Field2D& fx, const Field2D& fy);

/// Mean of f over cells where m is set. Empty mask yields exactly 0.0 (an
/// empty domain contributes no penalty, never a division by zero).
[[nodiscard]] double masked_mean(const Field2D& f, const BitMask2D& m);

/// Copy of m with the one-cell border cleared; physics residuals use this to
/// keep reflective-padding edge estimates out of the masked means.
[[nodiscard]] BitMask2D interior_mask(const BitMask2D& m);

/// Morphological erosion by the 4-neighbourhood, `steps` times: keeps cells
/// whose L1 ball of that radius is fully masked. Residual masks erode by the
/// stencil support radius so hydrostatic truth scores exactly zero.
[[nodiscard]] BitMask2D erode4(const BitMask2D& m, int steps = 1);

[[nodiscard]] BitMask2D full_mask(int rows, int cols);

}  // namespace hydropinn
