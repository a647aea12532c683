#include "sns/kernels/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace sns::kernels {

double scaled_distance(const std::vector<double>& z, const std::vector<double>& zp, const Scaling& s) {
    if (z.size() != zp.size()) throw KernelError("scaled_distance: dimension mismatch");
    double r = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const int w = (z.size() == static_cast<std::size_t>(s.d) + 1) ? s.weight(static_cast<int>(i)) : 1;
        r += std::pow(std::abs(z[i] - zp[i]), 1.0 / w);
    }
    return r;
}

std::size_t Grid::size() const {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    return n;
}

double Grid::cell_volume() const {
    double v = 1.0;
    for (double h : step) v *= h;
    return v;
}

Grid Grid::centered(const std::vector<double>& extent, const std::vector<double>& step, bool time_axis) {
    if (extent.size() != step.size() || extent.empty()) throw KernelError("grid: extent/step mismatch");
    Grid g;
    g.time_axis = time_axis;
    for (std::size_t a = 0; a < extent.size(); ++a) {
        const int m = static_cast<int>(std::lround(extent[a] / step[a]));
        g.shape.push_back(2 * m + 1);
        g.origin.push_back(-m * step[a]);
        g.step.push_back(step[a]);
    }
    return g;
}

bool Grid::compatible(const Grid& o) const {
    if (shape != o.shape || time_axis != o.time_axis) return false;
    for (std::size_t a = 0; a < shape.size(); ++a)
        if (std::abs(origin[a] - o.origin[a]) > 1e-12 || std::abs(step[a] - o.step[a]) > 1e-15) return false;
    return true;
}

void for_each_point(const Grid& g, const std::function<void(std::size_t, const std::vector<double>&)>& fn) {
    const int D = g.ndim();
    std::vector<int> idx(static_cast<std::size_t>(D), 0);
    std::vector<double> z(static_cast<std::size_t>(D));
    const std::size_t n = g.size();
    for (std::size_t flat = 0; flat < n; ++flat) {
        for (int a = 0; a < D; ++a) z[a] = g.coord(a, idx[a]);
        fn(flat, z);
        for (int a = D - 1; a >= 0; --a) {
            if (++idx[a] < g.shape[a]) break;
            idx[a] = 0;
        }
    }
}

GridFunction sample(const Grid& g, const std::function<double(const std::vector<double>&)>& f) {
    GridFunction out{g, std::vector<double>(g.size())};
    for_each_point(g, [&](std::size_t i, const std::vector<double>& z) { out.values[i] = f(z); });
    return out;
}

double homogeneous_norm(const Grid& g, const std::vector<double>& z) {
    double x2 = 0.0;
    for (int a = g.time_axis ? 1 : 0; a < g.ndim(); ++a) x2 += z[a] * z[a];
    if (!g.time_axis) return std::sqrt(x2);
    return std::pow(z[0] * z[0] + x2 * x2, 0.25);
}

double heat_kernel(double nu, double t, const std::vector<double>& x) {
    if (t <= 0.0) return 0.0;
    double x2 = 0.0;
    for (double v : x) x2 += v * v;
    const double d = static_cast<double>(x.size());
    return std::pow(4.0 * std::numbers::pi * nu * t, -d / 2.0) * std::exp(-x2 / (4.0 * nu * t));
}

double leray_kernel(int i, int j, const std::vector<double>& x) {
    const int d = static_cast<int>(x.size());
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    if (r2 == 0.0) return 0.0;
    const double delta = i == j ? 1.0 : 0.0;
    if (d == 2) return (2.0 * x[i] * x[j] - delta * r2) / (r2 * r2) / (2.0 * std::numbers::pi);
    if (d == 3) return (3.0 * x[i] * x[j] - delta * r2) / (r2 * r2 * std::sqrt(r2)) / (4.0 * std::numbers::pi);
    throw KernelError("leray_kernel: d must be 2 or 3");
}

std::vector<double> leray_symbol(const std::vector<int>& k) {
    const std::size_t d = k.size();
    std::vector<double> m(d * d, 0.0);
    double q = 0.0;
    for (int v : k) q += double(v) * v;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            m[i * d + j] = (i == j ? 1.0 : 0.0) - (q == 0.0 ? 0.0 : double(k[i]) * k[j] / q);
    return m;
}

double cutoff(double r) {
    if (r <= 0.5) return 1.0;
    if (r >= 1.0) return 0.0;
    const double u = (1.0 - r) * 2.0;  // 1 at r = 1/2, 0 at r = 1
    const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
}

double DyadicKernel::support_radius(int n) const { return std::ldexp(1.0, -n); }

std::vector<double> DyadicKernel::sum_levels() const {
    std::vector<double> s(grid.size(), 0.0);
    for (const auto& l : levels)
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += l[i];
    return s;
}

std::vector<std::vector<int>> monomials(const Grid& g, int r) {
    std::vector<std::vector<int>> out;
    if (r < 0) return out;
    const int D = g.ndim();
    std::vector<int> m(static_cast<std::size_t>(D), 0);
    auto weight = [&](int a) { return (g.time_axis && a == 0) ? 2 : 1; };
    std::function<void(int, int)> rec = [&](int a, int left) {
        if (a == D) {
            out.push_back(m);
            return;
        }
        for (int e = 0; e * weight(a) <= left; ++e) {
            m[a] = e;
            rec(a + 1, left - e * weight(a));
        }
        m[a] = 0;
    };
    rec(0, r);
    std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) {
        int wx = 0, wy = 0;
        for (int a = 0; a < D; ++a) wx += weight(a) * x[a], wy += weight(a) * y[a];
        return wx != wy ? wx < wy : x > y;
    });
    return out;
}

namespace {

double monomial(const std::vector<int>& m, const std::vector<double>& z, double r, bool time_axis) {
    double v = 1.0;
    for (std::size_t a = 0; a < m.size(); ++a) {
        const double scale = (time_axis && a == 0) ? r * r : r;
        for (int e = 0; e < m[a]; ++e) v *= z[a] / scale;
    }
    return v;
}

int mon_weight(const Grid& g, const std::vector<int>& m) {
    int w = 0;
    for (int a = 0; a < g.ndim(); ++a) w += ((g.time_axis && a == 0) ? 2 : 1) * m[a];
    return w;
}

double bump(double s) {  // smooth in z through s^4
    if (s >= 1.0) return 0.0;
    const double s4 = s * s * s * s;
    return std::exp(1.0 - 1.0 / (1.0 - s4));
}

double max_step(const Grid& g) {
    double h = 0.0;
    for (int a = g.time_axis ? 1 : 0; a < g.ndim(); ++a) h = std::max(h, g.step[a]);
    if (g.time_axis && g.ndim() == 1) h = std::sqrt(g.step[0]);
    return h;
}

// max |third difference| along `axis` with spacing s cells, over points whose
// whole stencil lies in the region rho >= r0.
double third_difference(const GridFunction& f, const std::vector<double>& rho, int axis, int s, double r0) {
    const Grid& g = f.grid;
    std::size_t stride = 1;
    for (int a = g.ndim() - 1; a > axis; --a) stride *= static_cast<std::size_t>(g.shape[a]);
    const int len = g.shape[axis];
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const int pos = static_cast<int>((i / stride) % static_cast<std::size_t>(len));
        if (pos - s < 0 || pos + 2 * s >= len) continue;
        const std::size_t sd = stride * static_cast<std::size_t>(s);
        const std::size_t im = i - sd, i1 = i + sd, i2 = i + 2 * sd;
        if (rho[im] < r0 || rho[i] < r0 || rho[i1] < r0 || rho[i2] < r0) continue;
        const double d3 = f.values[i2] - 3.0 * f.values[i1] + 3.0 * f.values[i] - f.values[im];
        m = std::max(m, std::abs(d3));
    }
    const double h = g.step[axis] * s;
    return m / (h * h * h);
}

}  // namespace

std::vector<double> moments(const Grid& g, const std::vector<double>& f, const std::vector<std::vector<int>>& mons) {
    std::vector<double> mu(mons.size(), 0.0);
    const double vol = g.cell_volume();
    for_each_point(g, [&](std::size_t i, const std::vector<double>& z) {
        if (f[i] == 0.0) return;
        for (std::size_t m = 0; m < mons.size(); ++m) mu[m] += f[i] * monomial(mons[m], z, 1.0, false) * vol;
    });
    return mu;
}

DyadicKernel dyadic_decompose(const GridFunction& samples, const DecomposeOptions& opt, int regularity) {
    const Grid& g = samples.grid;
    const std::vector<double>& f = samples.values;
    if (f.size() != g.size()) throw KernelError("samples do not match the grid");
    if (opt.levels < 0) throw KernelError("negative level count");
    const int L = opt.levels;
    const double h = max_step(g);
    for (int a = 0; a < g.ndim(); ++a) {
        const double finest = (g.time_axis && a == 0) ? std::ldexp(1.0, -2 * L) : std::ldexp(1.0, -L);
        if (finest < g.step[a] * (1.0 - 1e-12))
            throw KernelError("grid too coarse for " + std::to_string(L) + " levels: level radius " +
                              std::to_string(finest) + " is below the step " + std::to_string(g.step[a]) +
                              " on axis " + std::to_string(a));
    }

    std::vector<double> rho(g.size());
    for_each_point(g, [&](std::size_t i, const std::vector<double>& z) { rho[i] = homogeneous_norm(g, z); });

    if (opt.check_smoothness) {
        for (int a = 0; a < g.ndim(); ++a) {
            const double fine = third_difference(samples, rho, a, 1, 0.25);
            const double coarse = third_difference(samples, rho, a, 2, 0.25);
            if (fine > 4.0 * coarse + 1e-300 && fine > 0.0) {
                throw KernelError("insufficient smoothness away from the origin along axis " + std::to_string(a) +
                                  ": third divided differences grow under refinement (" + std::to_string(fine) +
                                  " vs " + std::to_string(coarse) + ")");
            }
        }
    }

    DyadicKernel dk;
    dk.grid = g;
    dk.order = opt.order;
    dk.regularity = regularity;
    dk.levels.assign(static_cast<std::size_t>(L + 1), std::vector<double>(g.size(), 0.0));
    dk.remainder.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (f[i] == 0.0) continue;
        const double r = rho[i];
        dk.remainder[i] = f[i] * (1.0 - cutoff(r));
        for (int n = 0; n <= L; ++n) {
            const double lo = cutoff(std::ldexp(r, n));
            const double hi = n == L ? 0.0 : cutoff(std::ldexp(r, n + 1));
            dk.levels[n][i] = f[i] * (lo - hi);
        }
    }
    if (opt.order < 0) return dk;

    const auto mons = monomials(g, opt.order);
    const std::size_t M = mons.size();
    // tails T_n = sum_{j >= n} mu_j
    std::vector<std::vector<double>> tail(static_cast<std::size_t>(L + 2), std::vector<double>(M, 0.0));
    for (int n = L; n >= 0; --n) {
        const auto mu = moments(g, dk.levels[n], mons);
        for (std::size_t m = 0; m < M; ++m) tail[n][m] = tail[n + 1][m] + mu[m];
    }
    // Q_n: bump of radius 2^{-n} + h times a polynomial with moments T_n
    const double vol = g.cell_volume();
    std::vector<std::vector<double>> Q(static_cast<std::size_t>(L + 1), std::vector<double>(g.size(), 0.0));
    for (int n = 0; n <= L; ++n) {
        const double r = std::ldexp(1.0, -n) + h;
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
        std::vector<double> basis(M);
        std::size_t support = 0;
        for_each_point(g, [&](std::size_t i, const std::vector<double>& z) {
            const double b = bump(rho[i] / r);
            if (b == 0.0) return;
            ++support;
            for (std::size_t a = 0; a < M; ++a) basis[a] = monomial(mons[a], z, r, g.time_axis);
            for (std::size_t a = 0; a < M; ++a)
                for (std::size_t m = 0; m < M; ++m) G(m, a) += b * basis[a] * basis[m] * vol;
        });
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(M));
        for (std::size_t m = 0; m < M; ++m) rhs(m) = tail[n][m] / std::pow(r, mon_weight(g, mons[m]));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        if (support <= M || sv(sv.size() - 1) <= 1e-10 * sv(0)) {
            throw KernelError("grid too coarse for level " + std::to_string(n) + " of " + std::to_string(L) +
                              ": the moment correction cannot be resolved (" + std::to_string(support) +
                              " support points); refine the grid or lower the level count");
        }
        const Eigen::VectorXd c = svd.solve(rhs);
        for_each_point(g, [&](std::size_t i, const std::vector<double>& z) {
            const double b = bump(rho[i] / r);
            if (b == 0.0) return;
            double p = 0.0;
            for (std::size_t a = 0; a < M; ++a) p += c(a) * monomial(mons[a], z, r, g.time_axis);
            Q[n][i] = b * p;
        });
    }
    for (int n = 0; n <= L; ++n)
        for (std::size_t i = 0; i < g.size(); ++i)
            dk.levels[n][i] += -Q[n][i] + (n < L ? Q[n + 1][i] : 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) dk.remainder[i] += Q[0][i];
    return dk;
}

KernelPair heat_kernel_split(double nu, const Grid& g, const DecomposeOptions& opt) {
    if (!g.time_axis) throw KernelError("heat kernel needs a space-time grid");
    const auto s = sample(g, [&](const std::vector<double>& z) {
        return heat_kernel(nu, z[0], std::vector<double>(z.begin() + 1, z.end()));
    });
    KernelPair kp;
    kp.nu = nu;
    kp.K = dyadic_decompose(s, opt, 2);
    kp.R = kp.K.remainder;
    return kp;
}

namespace {

// Fourth-order centered finite-difference derivative D^k of f (per-axis
// orders 0..2) at interior points; returns sup |D^k f|.
double sup_derivative(const Grid& g, const std::vector<double>& f, const std::vector<int>& k) {
    std::vector<double> cur = f, next(f.size());
    std::vector<char> valid(f.size(), 1);
    for (int a = 0; a < g.ndim(); ++a) {
        if (k[a] == 0) continue;
        std::size_t stride = 1;
        for (int b = g.ndim() - 1; b > a; --b) stride *= static_cast<std::size_t>(g.shape[b]);
        const int len = g.shape[a];
        const double h = g.step[a];
        for (std::size_t i = 0; i < f.size(); ++i) {
            const int pos = static_cast<int>((i / stride) % static_cast<std::size_t>(len));
            if (pos < 2 || pos > len - 3 || !valid[i]) {
                next[i] = 0.0;
                valid[i] = 0;
                continue;
            }
            const double m2 = cur[i - 2 * stride], m1 = cur[i - stride], p1 = cur[i + stride], p2 = cur[i + 2 * stride];
            next[i] = k[a] == 2 ? (-p2 + 16.0 * p1 - 30.0 * cur[i] + 16.0 * m1 - m2) / (12.0 * h * h)
                                : (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        }
        std::swap(cur, next);
    }
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (valid[i]) m = std::max(m, std::abs(cur[i]));
    return m;
}

}  // namespace

BoundReport verify_regularising_bounds(const DyadicKernel& dk, int k_max, double factor, double exponent_tol,
                                       double resolve_cells) {
    BoundReport rep;
    rep.factor = factor;
    const Grid& g = dk.grid;
    const int D = g.ndim();
    const int space = g.space_dim();
    const int scaling_dim = space + (g.time_axis ? 2 : 0);
    // derivative multi-indices with per-axis order <= 2 and weighted order <= k_max
    std::vector<std::vector<int>> ks;
    {
        std::vector<int> m(static_cast<std::size_t>(D), 0);
        std::function<void(int, int)> rec = [&](int a, int left) {
            if (a == D) {
                ks.push_back(m);
                return;
            }
            const int w = (g.time_axis && a == 0) ? 2 : 1;
            for (int e = 0; e <= 2 && e * w <= left; ++e) {
                m[a] = e;
                rec(a + 1, left - e * w);
            }
            m[a] = 0;
        };
        rec(0, k_max);
    }
    for (const auto& k : ks) {
        BoundFit fit;
        fit.derivative = k;
        fit.weighted_order = mon_weight(g, k);
        fit.expected_exponent = scaling_dim + fit.weighted_order - dk.regularity;
        for (int n = 0; n + 1 < dk.level_count(); ++n) {
            bool resolved = true;
            for (int a = 0; a < D; ++a) {
                const double rad = (g.time_axis && a == 0) ? std::ldexp(1.0, -2 * n) : std::ldexp(1.0, -n);
                if (rad < resolve_cells * g.step[a]) resolved = false;
            }
            if (!resolved) continue;
            const double s = sup_derivative(g, dk.levels[n], k);
            fit.levels_used.push_back(n);
            fit.sup.push_back(s);
        }
        const bool all_zero = std::all_of(fit.sup.begin(), fit.sup.end(), [](double s) { return s == 0.0; });
        if (fit.sup.empty()) {
            fit.pass = false;
            rep.message += "no resolved level for derivative " + to_string(k) + "; ";
        } else if (all_zero) {
            fit.constants.assign(fit.sup.size(), 0.0);
            fit.ratio = 1.0;
            fit.fitted_exponent = fit.expected_exponent;
            fit.pass = true;
        } else {
            double lo = 1e300, hi = 0.0;
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            const double cnt = static_cast<double>(fit.sup.size());
            for (std::size_t i = 0; i < fit.sup.size(); ++i) {
                const double n = fit.levels_used[i];
                const double c = fit.sup[i] / std::exp2(n * fit.expected_exponent);
                fit.constants.push_back(c);
                lo = std::min(lo, c);
                hi = std::max(hi, c);
                const double y = std::log2(std::max(fit.sup[i], 1e-300));
                sx += n, sy += y, sxx += n * n, sxy += n * y;
            }
            fit.ratio = lo > 0 ? hi / lo : INFINITY;
            fit.fitted_exponent = cnt > 1 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : fit.expected_exponent;
            fit.pass = fit.ratio <= factor && std::abs(fit.fitted_exponent - fit.expected_exponent) <= exponent_tol;
            if (!fit.pass)
                rep.message += "derivative " + to_string(k) + ": fitted exponent " + std::to_string(fit.fitted_exponent) +
                               " (expected " + std::to_string(fit.expected_exponent) + "), constant ratio " +
                               std::to_string(fit.ratio) + "; ";
        }
        rep.pass = rep.pass && fit.pass;
        rep.fits.push_back(std::move(fit));
    }
    return rep;
}

GridFunction convolve_KP(const GridFunction& K, const GridFunction& P) {
    const Grid& gk = K.grid;
    const Grid& gp = P.grid;
    if (!gk.time_axis || gp.time_axis) throw KernelError("convolve_KP: expected a space-time K and a spatial P");
    const int d = gp.ndim();
    if (gk.ndim() != d + 1) throw KernelError("convolve_KP: dimension mismatch");
    std::vector<int> p0(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        if (std::abs(gk.step[a + 1] - gp.step[a]) > 1e-15) throw KernelError("convolve_KP: grid mismatch (step)");
        const double o = gp.origin[a] / gp.step[a];
        p0[a] = static_cast<int>(std::lround(o));
        if (std::abs(o - p0[a]) > 1e-9) throw KernelError("convolve_KP: grid mismatch (origin)");
        const double ok = gk.origin[a + 1] / gk.step[a + 1];
        if (std::abs(ok - std::round(ok)) > 1e-9) throw KernelError("convolve_KP: grid mismatch (origin)");
    }
    GridFunction out{gk, std::vector<double>(gk.size(), 0.0)};
    std::size_t slab = 1;
    for (int a = 1; a <= d; ++a) slab *= static_cast<std::size_t>(gk.shape[a]);
    // nonzero P entries with their index vectors
    std::vector<std::pair<std::vector<int>, double>> pts;
    {
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (std::size_t f = 0; f < gp.size(); ++f) {
            if (P.values[f] != 0.0) pts.emplace_back(idx, P.values[f]);
            for (int a = d - 1; a >= 0; --a) {
                if (++idx[a] < gp.shape[a]) break;
                idx[a] = 0;
            }
        }
    }
    double vol = 1.0;
    for (double h : gp.step) vol *= h;
    std::vector<int> xi(static_cast<std::size_t>(d), 0);
    for (std::size_t x = 0; x < slab; ++x) {
        for (const auto& [j, pv] : pts) {
            // K index of x - y along each axis: i - j - p0
            std::size_t off = 0;
            bool inside = true;
            for (int a = 0; a < d; ++a) {
                const int q = xi[a] - j[a] - p0[a];
                if (q < 0 || q >= gk.shape[a + 1]) {
                    inside = false;
                    break;
                }
                off = off * static_cast<std::size_t>(gk.shape[a + 1]) + static_cast<std::size_t>(q);
            }
            if (!inside) continue;
            const double w = pv * vol;
            for (int t = 0; t < gk.shape[0]; ++t) out.values[t * slab + x] += w * K.values[t * slab + off];
        }
        for (int a = d - 1; a >= 0; --a) {
            if (++xi[a] < gk.shape[a + 1]) break;
            xi[a] = 0;
        }
    }
    (void)p0;
    return out;
}

GridFunction convolve_KP(const KernelPair& K, const DyadicKernel& Pbar) {
    return convolve_KP(GridFunction{K.K.grid, K.K.sum_levels()}, GridFunction{Pbar.grid, Pbar.sum_levels()});
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'N', 'S', 'G', 'R', 'I', 'D', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        auto* p = reinterpret_cast<unsigned char*>(&v);
        std::reverse(p, p + sizeof(T));
    }
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw KernelError("grid file truncated");
    if constexpr (std::endian::native == std::endian::big) {
        auto* p = reinterpret_cast<unsigned char*>(&v);
        std::reverse(p, p + sizeof(T));
    }
    return v;
}

}  // namespace

void write_grid_file(const std::string& path, const GridFile& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw KernelError("cannot open " + path + " for writing");
    const Grid& g = f.grid;
    os.write(kMagic, 8);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(g.ndim()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.blocks.size()));
    put<std::uint32_t>(os, g.time_axis ? 1u : 0u);
    put<std::uint64_t>(os, f.seed);
    put<std::uint64_t>(os, f.stream);
    for (int s : g.shape) put<std::uint64_t>(os, static_cast<std::uint64_t>(s));
    for (double o : g.origin) put<double>(os, o);
    for (double h : g.step) put<double>(os, h);
    for (const auto& b : f.blocks) {
        if (b.size() != g.size()) throw KernelError("grid file block size mismatch");
        if constexpr (std::endian::native == std::endian::little) {
            os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
        } else {
            for (double v : b) put<double>(os, v);
        }
    }
    if (!os) throw KernelError("write failed: " + path);
}

GridFile read_grid_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw KernelError("cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw KernelError("not a grid file: " + path);
    if (get<std::uint32_t>(is) != kVersion) throw KernelError("unsupported grid file version");
    GridFile f;
    const auto ndim = get<std::uint32_t>(is);
    const auto nblocks = get<std::uint32_t>(is);
    f.grid.time_axis = (get<std::uint32_t>(is) & 1u) != 0;
    f.seed = get<std::uint64_t>(is);
    f.stream = get<std::uint64_t>(is);
    for (std::uint32_t a = 0; a < ndim; ++a) f.grid.shape.push_back(static_cast<int>(get<std::uint64_t>(is)));
    for (std::uint32_t a = 0; a < ndim; ++a) f.grid.origin.push_back(get<double>(is));
    for (std::uint32_t a = 0; a < ndim; ++a) f.grid.step.push_back(get<double>(is));
    for (std::uint32_t b = 0; b < nblocks; ++b) {
        std::vector<double> v(f.grid.size());
        for (auto& x : v) x = get<double>(is);
        f.blocks.push_back(std::move(v));
    }
    return f;
}

}  // namespace sns::kernels
