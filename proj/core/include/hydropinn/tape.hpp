/// @file tape.hpp
/// @brief Minimal reverse-mode automatic differentiation over grid tensors.
///
/// A Tape owns a flat list of nodes; op builders append a node holding the
/// forward value and a closure that scatters adjoints to its inputs.
/// backward(root) seeds the (scalar) root with 1 and replays the tape in
/// reverse. Values are double precision throughout; shapes follow the
/// channel-stack convention (C, H, W) with rank-4 reserved for convolution
/// kernels and rank-1 for biases/scalars.
///
/// Everything the trainer differentiates runs through this fixed op set:
/// convolutions (stride 1/2, zero "same" padding), the spectral convolution,
/// nearest-neighbour upsampling, channel concat, gate broadcast multiply,
/// pointwise math, the central-difference stencils, and masked/global mean
/// reductions. stop_grad marks a value as constant for the backward pass
/// (used to keep physics-gate gradients out of the variance head).

#pragma once

#include <array>
#include <functional>
#include <vector>

#include "hydropinn/field.hpp"

namespace hydropinn::ad {

struct Shape {
    std::array<int, 4> d{1, 1, 1, 1};
    int rank = 1;

    [[nodiscard]] long numel() const {
        long n = 1;
        for (int k = 0; k < rank; ++k) n *= d[k];
        return n;
    }
    bool operator==(const Shape& o) const {
        if (rank != o.rank) return false;
        for (int k = 0; k < rank; ++k) {
            if (d[k] != o.d[k]) return false;
        }
        return true;
    }
};

[[nodiscard]] Shape shape1(int n);
[[nodiscard]] Shape shape3(int c, int h, int w);
[[nodiscard]] Shape shape4(int a, int b, int c, int d);

struct Tensor {
    Shape shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0)
        : shape(s), v(static_cast<std::size_t>(s.numel()), fill) {}

    [[nodiscard]] long numel() const { return static_cast<long>(v.size()); }
};

[[nodiscard]] Tensor tensor_from_field(const Field2D& f);
[[nodiscard]] Field2D field_from_tensor(const Tensor& t, double spacing);

class Tape {
public:
    /// Constant or parameter input; no backward function.
    int leaf(Tensor t);
    int scalar_leaf(double x);

    [[nodiscard]] const Tensor& val(int id) const { return nodes_[id].value; }
    [[nodiscard]] double scalar(int id) const { return nodes_[id].value.v[0]; }

    /// Adjoint buffer of a node, allocated as zeros on first access.
    Tensor& grad(int id);
    [[nodiscard]] bool has_grad(int id) const {
        return !grads_[id].v.empty();
    }

    /// Reverse sweep from a scalar root (seeded with 1).
    void backward(int root);

    // --- elementwise ---
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int div(int a, int b);
    int relu(int x);
    int sigmoid(int x);
    int softplus(int x);
    int square(int x);
    int sqrt_op(int x);
    int log_op(int x);
    int recip(int x);
    int neg(int x);
    int scale(int x, double c);
    int add_const(int x, double c);
    /// max(x, 0)^p with zero gradient on the clamped side.
    int pow_pos(int x, double p);
    /// sqrt(a^2 + b^2 + guard^2); the tiny guard keeps the adjoint defined
    /// at zero slope.
    int hypot_guarded(int a, int b);
    int stop_grad(int x);

    // --- structure ---
    int concat_c(int a, int b);
    int upsample2(int x);
    /// x:(C,H,W) times alpha:(1,H,W) broadcast over channels.
    int mul_gate(int x, int alpha);

    // --- stencils (per channel, reflective boundary) ---
    int grad_x(int x, double spacing);
    int grad_y(int x, double spacing);

    // --- neural ops ---
    /// x:(Ci,H,W), w:(Co,Ci,k,k), bias:(Co) or -1; zero "same" padding,
    /// stride 1 or 2 (spatial dims must divide by the stride).
    int conv2d(int x, int w, int bias, int stride);
    /// x:(C,H,W), w:(Ci,Co,2K,4K) interleaved re/im over a (2K,2K) corner
    /// block spectrum; per-axis retained modes [0,K) and [N-K,N).
    int spectral_conv(int x, int w, int k_max);

    // --- reductions (scalar results) ---
    int mean_all(int x);
    int sum_all(int x);
    int masked_mean(int x, const BitMask2D& mask);
    /// sum_i coeff_i * scalar_node_i
    int weighted_sum(const std::vector<std::pair<int, double>>& terms);

    [[nodiscard]] int node_count() const {
        return static_cast<int>(nodes_.size());
    }

private:
    struct Node {
        Tensor value;
        std::function<void(Tape&, int)> back;  // may be empty (leaf/stop)
    };

    int push(Tensor value, std::function<void(Tape&, int)> back);
    void accumulate(int id, const Tensor& g);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

}  // namespace hydropinn::ad
