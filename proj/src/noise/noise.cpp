#include "sns/noise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sns::noise {

using spectral::GridTransform;
using spectral::RealGrid;
using spectral::shell_order;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Complex Gaussian draws for each representative mode in shell order, one
// pair (Re, Im) per component, each of variance var/2, projected optionally.
void fill_gaussian(SpectralField& out, NormalSource& rng, double var) {
    out.set_zero();
    const double s = std::sqrt(var / 2.0);
    for (auto [k1, k2] : shell_order(out.cutoff())) {
        for (int c = 0; c < out.components(); ++c) {
            const double re = rng.normal();
            const double im = rng.normal();
            out.set_mode(c, k1, k2, cplx(s * re, s * im));
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------

Shift::Shift(int N_, double dt_, int steps, int first)
    : N(N_), dt(dt_), first_step(first), h(static_cast<std::size_t>(steps), SpectralField(N_)) {}

double Shift::lp_norm() const {
    double acc = 0.0;
    for (const auto& f : h) acc += std::pow(norm(f), p) * dt;
    return std::pow(acc, 1.0 / p);
}

Shift& Shift::operator+=(const Shift& o) {
    if (o.h.empty()) return *this;
    if (h.empty()) {
        *this = o;
        return *this;
    }
    if (o.N != N || o.dt != dt) throw NoiseError("shift grid mismatch");
    const int lo = std::min(first_step, o.first_step);
    const int hi = std::max(first_step + steps(), o.first_step + o.steps());
    if (lo != first_step || hi != first_step + steps()) {
        Shift wide(N, dt, hi - lo, lo);
        wide.p = p;
        wide.divergence_free = divergence_free;
        for (int n = 0; n < steps(); ++n) wide.h[static_cast<std::size_t>(first_step - lo + n)] = h[static_cast<std::size_t>(n)];
        *this = std::move(wide);
    }
    for (int n = 0; n < o.steps(); ++n) h[static_cast<std::size_t>(o.first_step - first_step + n)] += o.h[static_cast<std::size_t>(n)];
    divergence_free = divergence_free && o.divergence_free;
    return *this;
}

Shift operator+(Shift a, const Shift& b) {
    a += b;
    return a;
}

// ---------------------------------------------------------------------------

NoiseRealization::NoiseRealization(int N, double dt, int steps, std::uint64_t seed, std::uint64_t stream)
    : n_(N), dt_(dt), steps_(steps), seed_(seed), stream_(stream) {
    if (N < 1) throw NoiseError("noise cutoff must be >= 1");
    if (!(dt > 0.0)) throw NoiseError("dt must be positive");
    if (steps < 0) throw NoiseError("negative step count");
}

void NoiseRealization::base_increment(int n, SpectralField& out) const {
    if (n < 0 || n >= steps_) throw NoiseError("noise step out of range");
    if (out.cutoff() != n_ || out.components() != 2) out = SpectralField(n_);
    if (amp_ == 0.0) {
        out.set_zero();
        return;
    }
    const auto g = static_cast<std::uint64_t>(first_ + n);
    NormalSource rng(derive_seed(seed_, {stream_, g}));
    fill_gaussian(out, rng, dt_);
    if (amp_ != 1.0) out *= amp_;
}

void NoiseRealization::increment(int n, SpectralField& out) const {
    base_increment(n, out);
    if (!shift_) return;
    const int j = first_ + n - shift_->first_step;
    if (j < 0 || j >= shift_->steps()) return;
    const SpectralField& h = shift_->h[static_cast<std::size_t>(j)];
    if (h.cutoff() == n_) {
        out.axpy(dt_, h);
    } else {
        out.axpy(dt_, h.resized(n_));
    }
}

SpectralField NoiseRealization::increment(int n) const {
    SpectralField out(n_);
    increment(n, out);
    return out;
}

NoiseRealization NoiseRealization::tail(int from) const {
    if (from < 0 || from > steps_) throw NoiseError("tail start out of range");
    NoiseRealization t = *this;
    t.first_ = first_ + from;
    t.steps_ = steps_ - from;
    return t;
}

NoiseRealization NoiseRealization::with_cutoff(int N) const {
    if (N < 1) throw NoiseError("noise cutoff must be >= 1");
    NoiseRealization t = *this;
    t.n_ = N;
    return t;
}

NoiseRealization NoiseRealization::truncated(int steps) const {
    if (steps < 0 || steps > steps_) throw NoiseError("truncation out of range");
    NoiseRealization t = *this;
    t.steps_ = steps;
    return t;
}

NoiseRealization NoiseRealization::scaled(double a) const {
    NoiseRealization t = *this;
    t.amp_ = amp_ * a;
    return t;
}

NoiseRealization sample_white_noise(int N, double dt, int steps, std::uint64_t seed, std::uint64_t stream) {
    return NoiseRealization(N, dt, steps, seed, stream);
}

NoiseRealization zero_noise(int N, double dt, int steps) { return NoiseRealization(N, dt, steps, 0).scaled(0.0); }

NoiseRealization apply_shift(const NoiseRealization& xi, const Shift& h) {
    if (h.h.empty()) return xi;
    if (h.N != xi.n_) throw NoiseError("shift cutoff differs from the noise cutoff");
    if (std::abs(h.dt - xi.dt_) > 1e-15 * xi.dt_) throw NoiseError("shift time grid differs from the noise time grid");
    if (h.first_step < xi.first_ || h.first_step + h.steps() > xi.first_ + xi.steps_)
        throw NoiseError("shift extends beyond the noise horizon");
    for (const auto& f : h.h)
        if (f.cutoff() != h.N || f.components() != 2) throw NoiseError("shift field shape mismatch");
    NoiseRealization out = xi;
    if (xi.shift_) {
        out.shift_ = std::make_shared<const Shift>(*xi.shift_ + h);
    } else {
        out.shift_ = std::make_shared<const Shift>(h);
    }
    return out;
}

// ---------------------------------------------------------------------------

OUStepper::OUStepper(int N, double nu, double dt) : n_(N), nu_(nu), dt_(dt) {
    if (!(nu > 0.0) || !(dt > 0.0)) throw NoiseError("OU stepper needs nu > 0 and dt > 0");
    const std::size_t n = static_cast<std::size_t>(2 * N + 1) * static_cast<std::size_t>(N + 1);
    decay_.assign(n, 0.0);
    scale_.assign(n, 0.0);
    for (int k1 = -N; k1 <= N; ++k1) {
        for (int k2 = 0; k2 <= N; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            const double lam = nu * static_cast<double>(k1 * k1 + k2 * k2);
            decay_[idx(k1, k2)] = std::exp(-lam * dt);
            scale_[idx(k1, k2)] = std::sqrt(-std::expm1(-2.0 * lam * dt) / (2.0 * lam * dt)) / kTwoPi;
        }
    }
}

void OUStepper::forcing(const SpectralField& dW, SpectralField& out) const {
    if (dW.cutoff() != n_) throw NoiseError("OU stepper cutoff mismatch");
    if (!out.same_shape(dW)) out = SpectralField(n_);
    for (int k1 = -n_; k1 <= n_; ++k1) {
        for (int k2 = 0; k2 <= n_; ++k2) {
            const double s = scale_[idx(k1, k2)];
            const cplx a = dW.at(0, k1, k2), b = dW.at(1, k1, k2);
            if (s == 0.0) {
                out.at(0, k1, k2) = out.at(1, k1, k2) = cplx{};
                continue;
            }
            const double q = static_cast<double>(k1 * k1 + k2 * k2);
            const cplx kd = (static_cast<double>(k1) * a + static_cast<double>(k2) * b) / q;
            out.at(0, k1, k2) = s * (a - static_cast<double>(k1) * kd);
            out.at(1, k1, k2) = s * (b - static_cast<double>(k2) * kd);
        }
    }
}

void OUStepper::step(SpectralField& z, const SpectralField& dW) const {
    if (z.cutoff() != n_ || dW.cutoff() != n_) throw NoiseError("OU stepper cutoff mismatch");
    for (int k1 = -n_; k1 <= n_; ++k1) {
        for (int k2 = 0; k2 <= n_; ++k2) {
            const double e = decay_[idx(k1, k2)];
            const double s = scale_[idx(k1, k2)];
            const cplx a = dW.at(0, k1, k2), b = dW.at(1, k1, k2);
            if (s == 0.0) {
                z.at(0, k1, k2) = z.at(1, k1, k2) = cplx{};
                continue;
            }
            const double q = static_cast<double>(k1 * k1 + k2 * k2);
            const cplx kd = (static_cast<double>(k1) * a + static_cast<double>(k2) * b) / q;
            z.at(0, k1, k2) = e * z.at(0, k1, k2) + s * (a - static_cast<double>(k1) * kd);
            z.at(1, k1, k2) = e * z.at(1, k1, k2) + s * (b - static_cast<double>(k2) * kd);
        }
    }
}

OUProvenance OUPath::provenance(std::size_t snapshot) const {
    OUProvenance p;
    p.origin = origin;
    p.nu = nu;
    p.elapsed = snapshot < times.size() ? times[snapshot] : 0.0;
    return p;
}

OUPath stochastic_convolution(const NoiseRealization& xi, double nu, const SpectralField& z0, bool z0_stationary,
                              int snapshot_stride) {
    const int N = xi.cutoff();
    if (snapshot_stride < 1) throw NoiseError("snapshot stride must be >= 1");
    SpectralField z = z0.empty() ? SpectralField(N) : z0.resized(N);
    if (z.components() != 2) throw NoiseError("OU state must have 2 components");
    OUPath path;
    path.nu = nu;
    path.dt = xi.dt();
    path.stride = snapshot_stride;
    path.stationary = z0_stationary;
    const bool zero = !z0_stationary && max_abs(z) == 0.0;
    path.origin = z0_stationary ? OUOrigin::Stationary : (zero ? OUOrigin::ZeroStart : OUOrigin::Unknown);
    if (xi.shift() || xi.amplitude() != 1.0) path.origin = OUOrigin::Unknown;  // not the unit-intensity law
    leray_project_inplace(z);
    OUStepper st(N, nu, xi.dt());
    SpectralField dW(N);
    path.times.push_back(0.0);
    path.z.push_back(z);
    for (int n = 0; n < xi.steps(); ++n) {
        xi.increment(n, dW);
        st.step(z, dW);
        if ((n + 1) % snapshot_stride == 0 || n + 1 == xi.steps()) {
            path.times.push_back(static_cast<double>(n + 1) * xi.dt());
            path.z.push_back(z);
        }
    }
    return path;
}

// ---------------------------------------------------------------------------

std::array<std::array<double, 2>, 2> wick_constant(int N, double nu, double t, Truncation trunc) {
    std::array<std::array<double, 2>, 2> c{};
    if (!(t > 0.0)) return c;
    const bool stationary = std::isinf(t);
    for (int k1 = -N; k1 <= N; ++k1) {
        for (int k2 = -N; k2 <= N; ++k2) {
            const int q = k1 * k1 + k2 * k2;
            if (q == 0) continue;
            if (trunc == Truncation::Disc && q > N * N) continue;
            const double lam = nu * static_cast<double>(q);
            const double var = (stationary ? 1.0 : -std::expm1(-2.0 * lam * t)) / (2.0 * lam) / (kTwoPi * kTwoPi);
            const double a = static_cast<double>(k1), b = static_cast<double>(k2), qq = static_cast<double>(q);
            c[0][0] += var * (1.0 - a * a / qq);
            c[0][1] += var * (-a * b / qq);
            c[1][1] += var * (1.0 - b * b / qq);
        }
    }
    c[1][0] = c[0][1];
    return c;
}

WickProducts wick_pair(const SpectralField& z, const OUProvenance& prov, int M) {
    double t = 0.0;
    switch (prov.origin) {
        case OUOrigin::ZeroStart: t = prov.elapsed; break;
        case OUOrigin::Stationary: t = std::numeric_limits<double>::infinity(); break;
        case OUOrigin::Unknown: throw NoiseError("z has unknown provenance; its covariance is not computable");
    }
    const int N = z.cutoff();
    if (M <= 0) M = spectral::dealiased_grid_size(N);
    const auto c = wick_constant(N, prov.nu, t, Truncation::Square);
    WickProducts out;
    out.M = M;
    out.constants = {c[0][0], c[0][1], c[1][1]};
    GridTransform tr(N, M);
    RealGrid z1 = tr.make_grid(), z2 = tr.make_grid();
    tr.to_grid(z, 0, z1.data());
    tr.to_grid(z, 1, z2.data());
    for (auto& g : out.values) g = tr.make_grid();
    for (std::size_t i = 0; i < z1.size(); ++i) {
        out.values[0][i] = z1[i] * z1[i] - c[0][0];
        out.values[1][i] = z1[i] * z2[i] - c[0][1];
        out.values[2][i] = z2[i] * z2[i] - c[1][1];
    }
    return out;
}

SpectralField sample_stationary(int N, double nu, std::uint64_t seed, std::uint64_t stream) {
    SpectralField u(N);
    NormalSource rng(derive_seed(seed, {stream, 0x57a7u}));
    fill_gaussian(u, rng, 1.0);
    for (int k1 = -N; k1 <= N; ++k1)
        for (int k2 = 0; k2 <= N; ++k2) {
            const int q = k1 * k1 + k2 * k2;
            const double s = q == 0 ? 0.0 : 1.0 / (kTwoPi * std::sqrt(2.0 * nu * q));
            u.at(0, k1, k2) *= s;
            u.at(1, k1, k2) *= s;
        }
    leray_project_inplace(u);
    return u;
}

SpectralField sample_rough_initial(double eta, int N, std::uint64_t seed, std::uint64_t stream) {
    if (!(eta < 0.0)) throw NoiseError("rough initial data needs eta < 0");
    SpectralField u(N);
    NormalSource rng(derive_seed(seed, {stream, 0x7009u}));
    fill_gaussian(u, rng, 1.0);
    for (int k1 = -N; k1 <= N; ++k1)
        for (int k2 = 0; k2 <= N; ++k2) {
            const int q = k1 * k1 + k2 * k2;
            const double s = q == 0 ? 0.0 : std::pow(static_cast<double>(q), -(eta + 1.0) / 2.0) / kTwoPi;
            u.at(0, k1, k2) *= s;
            u.at(1, k1, k2) *= s;
        }
    leray_project_inplace(u);
    return u;
}

// ---------------------------------------------------------------------------

namespace {

int block_of(int q) {  // q = |k|^2 > 0: smallest j with |k| < 2^j
    int j = 1;
    while (static_cast<long long>(1) << (2 * j) <= q) ++j;
    return j;
}

int holder_grid(int N) { return spectral::nice_fft_size(std::max(4 * N, 8)); }

}  // namespace

std::vector<double> dyadic_block_sups(const SpectralField& f) {
    const int N = f.cutoff();
    const int J = block_of(2 * N * N);
    std::vector<double> sups(static_cast<std::size_t>(J + 1), 0.0);
    const int M = holder_grid(N);
    GridTransform tr(N, M);
    RealGrid g = tr.make_grid();
    SpectralField blk(N, f.components());
    for (int j = 0; j <= J; ++j) {
        blk.set_zero();
        bool any = false;
        for (int c = 0; c < f.components(); ++c)
            for (int k1 = -N; k1 <= N; ++k1)
                for (int k2 = 0; k2 <= N; ++k2) {
                    const int q = k1 * k1 + k2 * k2;
                    if ((q == 0 ? 0 : block_of(q)) != j) continue;
                    blk.at(c, k1, k2) = f.at(c, k1, k2);
                    any = any || f.at(c, k1, k2) != cplx{};
                }
        if (!any) continue;
        double m = 0.0;
        for (int c = 0; c < f.components(); ++c) {
            tr.to_grid(blk, c, g.data());
            m = std::max(m, sup_norm_grid(g.data(), M));
        }
        sups[static_cast<std::size_t>(j)] = m;
    }
    return sups;
}

double holder_norm(const SpectralField& f, double alpha) {
    if (!(alpha < 1.0)) throw NoiseError("holder_norm needs alpha < 1");
    if (alpha <= 0.0) {
        const auto sups = dyadic_block_sups(f);
        double r = 0.0;
        for (std::size_t j = 0; j < sups.size(); ++j) r = std::max(r, std::exp2(alpha * static_cast<double>(j)) * sups[j]);
        return r;
    }
    const int N = f.cutoff();
    const int M = holder_grid(N);
    GridTransform tr(N, M);
    RealGrid g = tr.make_grid();
    double sup = 0.0, semi = 0.0;
    for (int c = 0; c < f.components(); ++c) {
        tr.to_grid(f, c, g.data());
        sup = std::max(sup, sup_norm_grid(g.data(), M));
        semi = std::max(semi, holder_seminorm_grid(g.data(), M, alpha));
    }
    return sup + semi;
}

double sup_norm_grid(const double* g, int M) {
    double m = 0.0;
    const std::size_t n = static_cast<std::size_t>(M) * static_cast<std::size_t>(M);
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(g[i]));
    return m;
}

// Shifts r = s (e1), s (e2), s (e1 + e2) for s = 1, 2, 4, ... grid cells up to M/2.
double holder_seminorm_grid(const double* g, int M, double alpha) {
    const double h = kTwoPi / M;
    double best = 0.0;
    for (int s = 1; s <= M / 2; s *= 2) {
        const std::array<std::array<int, 2>, 3> dirs{{{s, 0}, {0, s}, {s, s}}};
        for (const auto& d : dirs) {
            double m = 0.0;
            for (int i = 0; i < M; ++i) {
                const int i2 = (i + d[0]) % M;
                const double* row = g + static_cast<std::size_t>(i) * static_cast<std::size_t>(M);
                const double* row2 = g + static_cast<std::size_t>(i2) * static_cast<std::size_t>(M);
                const int split = M - d[1];
                double mm = 0.0;
                for (int j = 0; j < split; ++j) mm = std::max(mm, std::abs(row2[j + d[1]] - row[j]));
                for (int j = split; j < M; ++j) mm = std::max(mm, std::abs(row2[j - split] - row[j]));
                m = std::max(m, mm);
            }
            const double len = h * std::hypot(static_cast<double>(d[0]), static_cast<double>(d[1]));
            best = std::max(best, m / std::pow(len, alpha));
        }
    }
    return best;
}

}  // namespace sns::noise
