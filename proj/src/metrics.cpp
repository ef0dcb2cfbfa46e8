#include "dmilo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmilo/errors.hpp"

namespace ilo {

namespace {

double ssim_flat_grid(const Vec& a, const Vec& b, int h, int w, double peak) {
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const int win = std::min({8, h, w});
    double total = 0.0;
    int windows = 0;
    for (int i = 0; i + win <= h; ++i) {
        for (int j = 0; j + win <= w; ++j) {
            double ma = 0.0, mb = 0.0;
            for (int di = 0; di < win; ++di)
                for (int dj = 0; dj < win; ++dj) {
                    ma += a[static_cast<std::size_t>((i + di) * w + (j + dj))];
                    mb += b[static_cast<std::size_t>((i + di) * w + (j + dj))];
                }
            const double cnt = static_cast<double>(win * win);
            ma /= cnt;
            mb /= cnt;
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (int di = 0; di < win; ++di)
                for (int dj = 0; dj < win; ++dj) {
                    const double da = a[static_cast<std::size_t>((i + di) * w + (j + dj))] - ma;
                    const double db = b[static_cast<std::size_t>((i + di) * w + (j + dj))] - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            va /= cnt;
            vb /= cnt;
            cov /= cnt;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++windows;
        }
    }
    return windows > 0 ? total / windows : 1.0;
}

}  // namespace

MetricSet compute_metrics(const Vec& xhat, const Vec& xstar, double peak, const Layout& layout) {
    check_same_dim(xhat, xstar, "compute_metrics");
    if (layout.grid &&
        static_cast<std::size_t>(layout.h) * static_cast<std::size_t>(layout.w) != xhat.size())
        throw ShapeError("compute_metrics: grid h*w does not match vector length");

    MetricSet m;
    double se = 0.0;
    for (std::size_t i = 0; i < xhat.size(); ++i) {
        const double d = xhat[i] - xstar[i];
        se += d * d;
    }
    m.mse = se / static_cast<double>(xhat.size());
    m.psnr = m.mse == 0.0 ? std::numeric_limits<double>::infinity()
                          : 10.0 * std::log10(peak * peak / m.mse);
    if (layout.grid) {
        m.has_ssim = true;
        m.ssim = ssim_flat_grid(xhat, xstar, layout.h, layout.w, peak);
    }
    return m;
}

}  // namespace ilo
