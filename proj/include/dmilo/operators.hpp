#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dmilo/vec.hpp"

namespace ilo {

// Finite-support convolution kernel. tap a applies at circular offset offsets[a].
struct Kernel {
    Vec taps;
    std::vector<int> offsets;
};

// Builds a kernel with contiguous offsets 0..len-1.
Kernel kernel_from_taps(Vec taps);

// Measurement map A with application and vector-Jacobian product. For linear A the
// vjp is point-independent and equals the adjoint.
struct ForwardOperator {
    int in_dim = 0;
    int out_dim = 0;
    std::string kind;
    std::function<Vec(const Vec&)> apply;
    std::function<Vec(const Vec&, const Vec&)> vjp;  // (point, cotangent) -> input-space
};

// Keeps ceil(keep_fraction * n) coordinates, chosen uniformly without replacement
// (seeded) and extracted in increasing index order; with keep_fraction = 1 the
// operator is exactly the identity.
ForwardOperator mask_operator(int n, double keep_fraction, std::uint64_t seed);

// Block box-average: each output is the mean of `factor` consecutive inputs.
ForwardOperator downsample_operator(int n, int factor);

// Circular convolution y_j = sum_a k_a x_{(j - offset_a) mod n}.
ForwardOperator circ_conv_operator(int n, const Kernel& k);

// 2-D circular convolution on a row-major flattened h x w grid; taps2d is the
// kh x kw kernel with offsets 0..kh-1 x 0..kw-1. The solvers still see a flat
// vector of length h*w.
ForwardOperator circ_conv2d_operator(int h, int w, const std::vector<Vec>& taps2d);

// Dense matrix with seeded i.i.d. N(0, 1/m) entries.
ForwardOperator gaussian_operator(int m, int n, std::uint64_t seed);

// apply(x) = tanh(gain * base.apply(x)) elementwise.
ForwardOperator nonlinear_operator(ForwardOperator base, double gain);

// y + sigma * z with z a seeded standard normal draw.
Vec add_noise(const Vec& y, double sigma, std::uint64_t seed);

// Convolution helpers shared with the blind-deblurring solvers.
Vec circ_conv_apply(const Kernel& k, const Vec& x);
// u^T d(k*x)/dx: correlation of u with the kernel.
Vec circ_conv_vjp_signal(const Kernel& k, const Vec& u);
// u^T d(k*x)/dk: per-tap correlation of u with the signal.
Vec circ_conv_vjp_kernel(const Kernel& k, const Vec& x, const Vec& u);

}  // namespace ilo
