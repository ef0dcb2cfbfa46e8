#include "dmilo/operators.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "dmilo/errors.hpp"
#include "dmilo/rng.hpp"

namespace ilo {

Kernel kernel_from_taps(Vec taps) {
    Kernel k;
    k.offsets.resize(taps.size());
    std::iota(k.offsets.begin(), k.offsets.end(), 0);
    k.taps = std::move(taps);
    return k;
}

Vec circ_conv_apply(const Kernel& k, const Vec& x) {
    const int n = static_cast<int>(x.size());
    Vec y(x.size(), 0.0);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < k.taps.size(); ++a) {
            const int idx = ((j - k.offsets[a]) % n + n) % n;
            s += k.taps[a] * x[static_cast<std::size_t>(idx)];
        }
        y[static_cast<std::size_t>(j)] = s;
    }
    return y;
}

Vec circ_conv_vjp_signal(const Kernel& k, const Vec& u) {
    const int n = static_cast<int>(u.size());
    Vec g(u.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t a = 0; a < k.taps.size(); ++a) {
            const int idx = (i + k.offsets[a]) % n;
            s += k.taps[a] * u[static_cast<std::size_t>(idx)];
        }
        g[static_cast<std::size_t>(i)] = s;
    }
    return g;
}

Vec circ_conv_vjp_kernel(const Kernel& k, const Vec& x, const Vec& u) {
    const int n = static_cast<int>(x.size());
    Vec g(k.taps.size(), 0.0);
    for (std::size_t a = 0; a < k.taps.size(); ++a) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            const int idx = ((j - k.offsets[a]) % n + n) % n;
            s += u[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(idx)];
        }
        g[a] = s;
    }
    return g;
}

ForwardOperator mask_operator(int n, double keep_fraction, std::uint64_t seed) {
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
        throw ConfigError("mask_operator: keep_fraction must lie in (0, 1]");
    const int m = static_cast<int>(std::ceil(keep_fraction * n));
    if (m < 1) throw ConfigError("mask_operator: empty selection");

    Rng rng(seed);
    auto perm = rng.permutation(static_cast<std::size_t>(n));
    auto keep = std::make_shared<std::vector<std::size_t>>(perm.begin(), perm.begin() + m);
    std::sort(keep->begin(), keep->end());

    ForwardOperator op;
    op.in_dim = n;
    op.out_dim = m;
    op.kind = "mask";
    op.apply = [keep, n](const Vec& x) {
        if (static_cast<int>(x.size()) != n) throw ShapeError("mask: wrong input dimension");
        Vec y(keep->size());
        for (std::size_t j = 0; j < keep->size(); ++j) y[j] = x[(*keep)[j]];
        return y;
    };
    op.vjp = [keep, n](const Vec&, const Vec& u) {
        if (u.size() != keep->size()) throw ShapeError("mask vjp: wrong cotangent dimension");
        Vec g(static_cast<std::size_t>(n), 0.0);
        for (std::size_t j = 0; j < keep->size(); ++j) g[(*keep)[j]] = u[j];
        return g;
    };
    return op;
}

ForwardOperator downsample_operator(int n, int factor) {
    if (factor < 1 || n % factor != 0)
        throw ConfigError("downsample_operator: factor must divide n");
    const int m = n / factor;

    ForwardOperator op;
    op.in_dim = n;
    op.out_dim = m;
    op.kind = "downsample";
    op.apply = [n, m, factor](const Vec& x) {
        if (static_cast<int>(x.size()) != n) throw ShapeError("downsample: wrong input dimension");
        Vec y(static_cast<std::size_t>(m), 0.0);
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int a = 0; a < factor; ++a) s += x[static_cast<std::size_t>(j * factor + a)];
            y[static_cast<std::size_t>(j)] = s / factor;
        }
        return y;
    };
    op.vjp = [n, m, factor](const Vec&, const Vec& u) {
        if (static_cast<int>(u.size()) != m) throw ShapeError("downsample vjp: wrong dimension");
        Vec g(static_cast<std::size_t>(n));
        for (int j = 0; j < m; ++j)
            for (int a = 0; a < factor; ++a)
                g[static_cast<std::size_t>(j * factor + a)] = u[static_cast<std::size_t>(j)] / factor;
        return g;
    };
    return op;
}

ForwardOperator circ_conv_operator(int n, const Kernel& k) {
    if (static_cast<int>(k.taps.size()) > n)
        throw ConfigError("circ_conv_operator: kernel support exceeds signal length");
    if (k.taps.size() != k.offsets.size())
        throw ConfigError("circ_conv_operator: taps/offsets length mismatch");
    auto kern = std::make_shared<Kernel>(k);

    ForwardOperator op;
    op.in_dim = n;
    op.out_dim = n;
    op.kind = "circ_conv";
    op.apply = [kern, n](const Vec& x) {
        if (static_cast<int>(x.size()) != n) throw ShapeError("circ_conv: wrong input dimension");
        return circ_conv_apply(*kern, x);
    };
    op.vjp = [kern, n](const Vec&, const Vec& u) {
        if (static_cast<int>(u.size()) != n) throw ShapeError("circ_conv vjp: wrong dimension");
        return circ_conv_vjp_signal(*kern, u);
    };
    return op;
}

ForwardOperator circ_conv2d_operator(int h, int w, const std::vector<Vec>& taps2d) {
    if (taps2d.empty() || taps2d.front().empty())
        throw ConfigError("circ_conv2d_operator: empty kernel");
    const int kh = static_cast<int>(taps2d.size());
    const int kw = static_cast<int>(taps2d.front().size());
    for (const Vec& row : taps2d)
        if (static_cast<int>(row.size()) != kw)
            throw ConfigError("circ_conv2d_operator: ragged kernel rows");
    if (kh > h || kw > w)
        throw ConfigError("circ_conv2d_operator: kernel support exceeds the grid");
    auto taps = std::make_shared<std::vector<Vec>>(taps2d);
    const int n = h * w;

    auto conv = [taps, h, w, kh, kw](const Vec& x, bool adjoint) {
        Vec y(static_cast<std::size_t>(h) * w, 0.0);
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                double s = 0.0;
                for (int a = 0; a < kh; ++a) {
                    for (int b = 0; b < kw; ++b) {
                        const int ii = adjoint ? (i + a) % h : ((i - a) % h + h) % h;
                        const int jj = adjoint ? (j + b) % w : ((j - b) % w + w) % w;
                        s += (*taps)[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] *
                             x[static_cast<std::size_t>(ii * w + jj)];
                    }
                }
                y[static_cast<std::size_t>(i * w + j)] = s;
            }
        }
        return y;
    };

    ForwardOperator op;
    op.in_dim = n;
    op.out_dim = n;
    op.kind = "circ_conv2d";
    op.apply = [conv, n](const Vec& x) {
        if (static_cast<int>(x.size()) != n) throw ShapeError("circ_conv2d: wrong input dimension");
        return conv(x, false);
    };
    op.vjp = [conv, n](const Vec&, const Vec& u) {
        if (static_cast<int>(u.size()) != n) throw ShapeError("circ_conv2d vjp: wrong dimension");
        return conv(u, true);
    };
    return op;
}

ForwardOperator gaussian_operator(int m, int n, std::uint64_t seed) {
    if (m < 1 || n < 1) throw ConfigError("gaussian_operator: m, n must be >= 1");
    Rng rng(seed);
    auto A = std::make_shared<Vec>(static_cast<std::size_t>(m) * static_cast<std::size_t>(n));
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (double& v : *A) v = scale * rng.normal();

    ForwardOperator op;
    op.in_dim = n;
    op.out_dim = m;
    op.kind = "gaussian";
    op.apply = [A, m, n](const Vec& x) {
        if (static_cast<int>(x.size()) != n) throw ShapeError("gaussian: wrong input dimension");
        Vec y(static_cast<std::size_t>(m), 0.0);
        for (int i = 0; i < m; ++i) {
            double s = 0.0;
            const double* row = A->data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) s += row[j] * x[static_cast<std::size_t>(j)];
            y[static_cast<std::size_t>(i)] = s;
        }
        return y;
    };
    op.vjp = [A, m, n](const Vec&, const Vec& u) {
        if (static_cast<int>(u.size()) != m) throw ShapeError("gaussian vjp: wrong dimension");
        Vec g(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < m; ++i) {
            const double* row = A->data() + static_cast<std::size_t>(i) * n;
            const double ui = u[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) g[static_cast<std::size_t>(j)] += row[j] * ui;
        }
        return g;
    };
    return op;
}

ForwardOperator nonlinear_operator(ForwardOperator base, double gain) {
    if (!(gain > 0.0)) throw ConfigError("nonlinear_operator: gain must be > 0");
    auto inner = std::make_shared<ForwardOperator>(std::move(base));

    ForwardOperator op;
    op.in_dim = inner->in_dim;
    op.out_dim = inner->out_dim;
    op.kind = "nonlinear(" + inner->kind + ")";
    op.apply = [inner, gain](const Vec& x) {
        Vec y = inner->apply(x);
        for (double& v : y) v = std::tanh(gain * v);
        return y;
    };
    op.vjp = [inner, gain](const Vec& x, const Vec& u) {
        Vec y = inner->apply(x);
        Vec uu(u.size());
        check_same_dim(y, u, "nonlinear vjp");
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double th = std::tanh(gain * y[i]);
            uu[i] = gain * (1.0 - th * th) * u[i];
        }
        return inner->vjp(x, uu);
    };
    return op;
}

Vec add_noise(const Vec& y, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw ConfigError("add_noise: sigma must be >= 0");
    if (sigma == 0.0) return y;
    Rng rng(seed);
    Vec out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + sigma * rng.normal();
    return out;
}

}  // namespace ilo
