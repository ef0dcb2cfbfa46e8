#pragma once

#include "dmilo/vec.hpp"

namespace ilo {

struct Layout {
    bool grid = false;
    int h = 0;
    int w = 0;

    static Layout flat() { return Layout{}; }
    static Layout image(int h, int w) { return Layout{true, h, w}; }
};

struct MetricSet {
    double mse = 0.0;
    double psnr = 0.0;  // +infinity when mse = 0
    double ssim = 0.0;
    bool has_ssim = false;
    double residual = 0.0;
};

// MSE, PSNR (10 log10(peak^2/mse)) and, for grid layouts, SSIM with 8x8 sliding
// windows and the standard constants c1 = (0.01 peak)^2, c2 = (0.03 peak)^2.
MetricSet compute_metrics(const Vec& xhat, const Vec& xstar, double peak, const Layout& layout);

}  // namespace ilo
