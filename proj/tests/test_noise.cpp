#include <doctest.h>

#include "sns/noise/noise.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

using namespace sns;
using namespace sns::noise;
using spectral::SpectralField;

namespace {

constexpr double kPi = std::numbers::pi;

struct Stat {
    double s = 0, s2 = 0;
    long n = 0;
    void add(double x) { s += x, s2 += x * x, ++n; }
    double mean() const { return s / n; }
    double var() const { return (s2 - s * s / n) / (n - 1); }
    double se() const { return std::sqrt(var() / n); }
};

// Mean of non-overlapping batch means and its standard error.
struct Batches {
    std::vector<double> means;
    double mean() const { return std::accumulate(means.begin(), means.end(), 0.0) / means.size(); }
    double se() const {
        const double m = mean();
        double v = 0;
        for (double x : means) v += (x - m) * (x - m);
        return std::sqrt(v / (means.size() - 1) / means.size());
    }
};

double leray_entry(int k1, int k2, int c) {
    const double q = double(k1 * k1 + k2 * k2);
    return 1.0 - (c == 0 ? k1 * k1 : k2 * k2) / q;
}

}  // namespace

TEST_CASE("white noise regenerates bit for bit") {
    auto a = sample_white_noise(6, 1e-2, 5, 42, 3);
    auto b = sample_white_noise(6, 1e-2, 5, 42, 3);
    auto c = sample_white_noise(6, 1e-2, 5, 42, 4);
    for (int n = 0; n < 5; ++n) {
        CHECK(a.increment(n).data() == b.increment(n).data());
        CHECK(max_abs_diff(a.increment(n), c.increment(n)) > 0.0);
    }
    CHECK(a.increment(0).at(0, 0, 0) == cplx{});
}

TEST_CASE("tails and cutoffs see the same increments") {
    auto xi = sample_white_noise(8, 1e-2, 10, 7);
    auto t = xi.tail(4);
    CHECK(t.steps() == 6);
    for (int n = 0; n < 6; ++n) CHECK(t.increment(n).data() == xi.increment(n + 4).data());
    auto big = xi.with_cutoff(12);
    for (int n = 0; n < 3; ++n) CHECK(big.increment(n).resized(8).data() == xi.increment(n).data());
}

TEST_CASE("white noise: per-mode variance dt and no cross-mode correlation") {
    const int N = 2, steps = 100000;
    const double dt = 0.01;
    auto xi = sample_white_noise(N, dt, steps, 2024);
    Stat re10, im10, re21, im11b, cross, cross_c;
    SpectralField d(N);
    for (int n = 0; n < steps; ++n) {
        xi.increment(n, d);
        re10.add(d.at(0, 1, 0).real() * d.at(0, 1, 0).real());
        im10.add(d.at(0, 1, 0).imag() * d.at(0, 1, 0).imag());
        re21.add(d.at(1, -2, 1).real() * d.at(1, -2, 1).real());
        im11b.add(std::norm(d.at(1, 1, 1)));
        cross.add(d.at(0, 1, 0).real() * d.at(0, 2, 2).real());
        cross_c.add(d.at(0, 1, 1).imag() * d.at(1, 1, 1).imag());
    }
    CHECK(std::abs(re10.mean() - dt / 2) < 3 * re10.se());
    CHECK(std::abs(im10.mean() - dt / 2) < 3 * im10.se());
    CHECK(std::abs(re21.mean() - dt / 2) < 3 * re21.se());
    CHECK(std::abs(im11b.mean() - dt) < 3 * im11b.se());
    CHECK(std::abs(cross.mean()) < 3 * cross.se());
    CHECK(std::abs(cross_c.mean()) < 3 * cross_c.se());
}

TEST_CASE("shifts: identity, exact additivity, grid checks") {
    const int N = 4, steps = 6;
    const double dt = 0.02;
    auto xi = sample_white_noise(N, dt, steps, 99);
    Shift zero(N, dt, steps);
    auto x0 = apply_shift(xi, zero);
    for (int n = 0; n < steps; ++n) CHECK(x0.increment(n).data() == xi.increment(n).data());

    Shift h(N, dt, steps), g(N, dt, steps);
    NormalSource r(5);
    for (int n = 0; n < steps; ++n)
        for (auto [k1, k2] : spectral::shell_order(N)) {
            h.h[n].set_mode(0, k1, k2, cplx(r.normal(), r.normal()));
            g.h[n].set_mode(1, k1, k2, cplx(r.normal(), r.normal()));
            g.h[n].set_mode(0, k1, k2, cplx(r.normal(), 0.0));
        }
    auto twice = apply_shift(apply_shift(xi, h), g);
    auto once = apply_shift(xi, h + g);
    double dev = 0;
    for (int n = 0; n < steps; ++n) dev = std::max(dev, max_abs_diff(twice.increment(n), once.increment(n)));
    CHECK(dev == 0.0);
    // the shift enters as h dt
    SpectralField expect = xi.increment(2);
    expect.axpy(dt, h.h[2]);
    CHECK(apply_shift(xi, h).increment(2).data() == expect.data());

    Shift bad_dt(N, 2 * dt, steps), bad_n(N + 1, dt, steps), late(N, dt, 3, 5);
    CHECK_THROWS_AS(apply_shift(xi, bad_dt), NoiseError);
    CHECK_THROWS_AS(apply_shift(xi, bad_n), NoiseError);
    CHECK_THROWS_AS(apply_shift(xi, late), NoiseError);

    // partial-window shift; tails keep it aligned to global steps
    Shift w(N, dt, 2, 3);
    w.h[0] = h.h[0];
    w.h[1] = h.h[1];
    auto xs = apply_shift(xi, w);
    CHECK(xs.increment(2).data() == xi.increment(2).data());
    CHECK(xs.tail(3).increment(0).data() == xs.increment(3).data());
    CHECK(max_abs_diff(xs.increment(3), xi.increment(3)) > 0);
    CHECK(h.lp_norm() > 0);
    CHECK(zero.lp_norm() == 0.0);
}

TEST_CASE("OU one-step law matches the exact transition") {
    const int N = 1, draws = 100000;
    const double nu = 0.7, dt = 0.1;
    OUStepper st(N, nu, dt);
    SpectralField z0(N);
    z0.set_mode(0, 0, 1, cplx(0.3, -0.2));
    z0.set_mode(1, 1, 0, cplx(-0.1, 0.4));
    const double lam = nu;
    const double mean_re = std::exp(-lam * dt) * 0.3;
    const double var_c = (1 - std::exp(-2 * lam * dt)) / (2 * lam) / (4 * kPi * kPi);
    Stat m, v;
    SpectralField z(N);
    for (int i = 0; i < draws; ++i) {
        auto xi = sample_white_noise(N, dt, 1, 77, i);
        z = z0;
        st.step(z, xi.increment(0));
        const cplx a = z.at(0, 0, 1);
        m.add(a.real());
        v.add(std::norm(a - std::exp(-lam * dt) * z0.at(0, 0, 1)));
    }
    CHECK(std::abs(m.mean() - mean_re) < 3 * m.se());
    CHECK(std::abs(v.mean() - var_c) < 3 * v.se());
}

TEST_CASE("stochastic convolution: stationary variance per mode") {
    const int N = 4, steps = 200000, burn = 2000;
    const double dt = 0.05;
    for (double nu : {1.0, 25.0}) {
        auto xi = sample_white_noise(N, dt, steps, 31337, nu > 2 ? 1 : 0);
        OUStepper st(N, nu, dt);
        SpectralField z(N), d(N);
        const std::vector<std::array<int, 3>> probes{{1, 0, 1}, {1, 1, 0}, {-2, 1, 1}, {0, 3, 0}, {3, 4, 1}};
        std::vector<Batches> b(probes.size());
        std::vector<Stat> cur(probes.size());
        const int batch = 2000;
        for (int n = 0; n < steps; ++n) {
            xi.increment(n, d);
            st.step(z, d);
            if (n < burn) continue;
            for (std::size_t p = 0; p < probes.size(); ++p) {
                cur[p].add(std::norm(z.at(probes[p][2], probes[p][0], probes[p][1])));
                if (cur[p].n == batch) {
                    b[p].means.push_back(cur[p].mean());
                    cur[p] = Stat{};
                }
            }
        }
        CHECK(max_divergence(z) < 1e-12 * norm(z));
        for (std::size_t p = 0; p < probes.size(); ++p) {
            const auto [k1, k2, c] = probes[p];
            const double oracle = leray_entry(k1, k2, c) / (2 * nu * (k1 * k1 + k2 * k2)) / (4 * kPi * kPi);
            INFO("nu=" << nu << " k=(" << k1 << "," << k2 << ") c=" << c);
            if (oracle == 0.0) {
                CHECK(b[p].mean() < 1e-28);
            } else {
                CHECK(std::abs(b[p].mean() - oracle) < 3 * b[p].se());
            }
        }
    }
}

TEST_CASE("stochastic convolution: provenance and the zero case") {
    const int N = 3;
    auto xi = sample_white_noise(N, 0.01, 10, 1);
    auto path = stochastic_convolution(xi, 1.0, SpectralField(N));
    CHECK(path.origin == OUOrigin::ZeroStart);
    CHECK(path.z.size() == 11);
    CHECK(path.provenance(10).elapsed == doctest::Approx(0.1));
    auto st = stochastic_convolution(xi, 1.0, sample_stationary(N, 1.0, 5), true);
    CHECK(st.origin == OUOrigin::Stationary);
    SpectralField odd(N);
    odd.set_mode(0, 0, 1, 1.0);
    CHECK(stochastic_convolution(xi, 1.0, odd).origin == OUOrigin::Unknown);
    CHECK_THROWS_AS(wick_pair(odd, stochastic_convolution(xi, 1.0, odd).provenance(0)), NoiseError);

    // zero noise: z stays 0
    Shift cancel(N, 0.01, 10);
    for (int n = 0; n < 10; ++n) cancel.h[n] = (-1.0 / 0.01) * xi.increment(n);
    auto quiet = apply_shift(xi, cancel);
    auto zp = stochastic_convolution(quiet, 1.0, SpectralField(N));
    CHECK(max_abs(zp.z.back()) < 1e-17);
    auto strided = stochastic_convolution(xi, 1.0, SpectralField(N), false, 4);
    CHECK(strided.times.size() == 4);  // 0, 4, 8, 10
    CHECK(strided.z.back().data() == path.z.back().data());
}

TEST_CASE("wick constant: closed form, limits, monotonicity") {
    auto c0 = wick_constant(5, 1.0, 0.0);
    CHECK(c0[0][0] == 0.0);
    CHECK(c0[1][1] == 0.0);

    // brute force over the four unit wave vectors
    const double inf = std::numeric_limits<double>::infinity();
    double brute[2][2] = {{0, 0}, {0, 0}};
    for (auto [k1, k2] : std::vector<std::pair<int, int>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        brute[0][0] += (1.0 - k1 * k1) / 2.0;
        brute[0][1] += (-k1 * k2) / 2.0;
        brute[1][1] += (1.0 - k2 * k2) / 2.0;
    }
    auto disc = wick_constant(1, 1.0, inf, Truncation::Disc);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(disc[i][j] == doctest::Approx(brute[i][j] / (4 * kPi * kPi)).epsilon(1e-14));
    CHECK(disc[0][0] == doctest::Approx(1.0 / (4 * kPi * kPi)));

    double prev = 0.0;
    for (int N = 1; N <= 10; ++N) {
        auto c = wick_constant(N, 1.0, 0.3);
        CHECK(c[0][0] >= prev);
        CHECK(c[0][0] == doctest::Approx(c[1][1]));
        CHECK(std::abs(c[0][1]) < 1e-15);
        prev = c[0][0];
    }
    auto fin = wick_constant(6, 2.0, 50.0), lim = wick_constant(6, 2.0, inf);
    CHECK(fin[0][0] == doctest::Approx(lim[0][0]).epsilon(1e-12));
}

TEST_CASE("wick pair: centred ensemble, isotropic constant") {
    const int N = 4, samples = 10000;
    const double nu = 1.0;
    OUProvenance prov{OUOrigin::Stationary, nu, 0.0};
    Stat d11, d12, d22;
    for (int s = 0; s < samples; ++s) {
        auto z = sample_stationary(N, nu, 4242, s);
        auto w = wick_pair(z, prov);
        double a[3] = {0, 0, 0};
        for (int e = 0; e < 3; ++e) {
            for (double x : w.values[e]) a[e] += x;
            a[e] /= double(w.values[e].size());
        }
        d11.add(a[0]);
        d12.add(a[1]);
        d22.add(a[2]);
    }
    CHECK(std::abs(d11.mean()) < 3 * d11.se());
    CHECK(std::abs(d12.mean()) < 3 * d12.se());
    CHECK(std::abs(d22.mean()) < 3 * d22.se());

    SpectralField zero(N);
    auto w0 = wick_pair(zero, prov);
    auto c = wick_constant(N, nu, std::numeric_limits<double>::infinity());
    CHECK(w0.values[0][5] == doctest::Approx(-c[0][0]));
    auto wz = wick_pair(zero, OUProvenance{OUOrigin::ZeroStart, nu, 0.0});
    CHECK(wz.values[0][5] == 0.0);
    CHECK(wz.values[2][7] == 0.0);
}

TEST_CASE("holder norm: zero field, single modes") {
    CHECK(holder_norm(SpectralField(8), -0.5) == 0.0);
    CHECK(holder_norm(SpectralField(8), 0.5) == 0.0);
    for (double alpha : {-0.5, -1.0, -0.3}) {
        double lo = 1e300, hi = 0;
        for (auto [k1, k2] : std::vector<std::pair<int, int>>{{1, 0}, {2, 1}, {3, 3}, {5, 0}, {7, 6}, {12, 5}, {20, 1}, {31, 30}}) {
            SpectralField f(32);
            f.set_mode(0, k1, k2, 0.5);  // real part cos(k.x)
            const double r = holder_norm(f, alpha) / std::pow(std::hypot(k1, k2), alpha);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        INFO("alpha " << alpha);
        CHECK(hi / lo <= 2.0);
    }
    double lo = 1e300, hi = 0;
    for (int k : {4, 8, 16, 32}) {
        SpectralField f(32);
        f.set_mode(1, k, 0, 0.5);
        const double r = (holder_norm(f, 0.5) - 1.0) / std::pow(k, 0.5);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    CHECK(hi / lo <= 2.0);
}

namespace {

// log-log slope of y against x
double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::log(x[i]), b = std::log(y[i]);
        sx += a, sy += b, sxx += a * a, sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Predicted holder proxy of a Gaussian field with per-component mode variance
// amp2(q): block j has pointwise standard deviation sigma_j and its sup over
// the torus behaves like sigma_j sqrt(2 log n_j), n_j the block's mode count.
template <class Amp2>
double predicted_norm(int N, double alpha, Amp2 amp2) {
    std::vector<double> var(32, 0.0), cnt(32, 0.0);
    for (int k1 = -N; k1 <= N; ++k1)
        for (int k2 = -N; k2 <= N; ++k2) {
            const int q = k1 * k1 + k2 * k2;
            if (q == 0) continue;
            int j = 1;
            while ((1LL << (2 * j)) <= q) ++j;
            var[j] += amp2(q) * 0.5;  // one component of a Leray-projected field
            cnt[j] += 1;
        }
    double best = 0;
    for (int j = 1; j < 32; ++j)
        if (cnt[j] > 1) best = std::max(best, std::exp2(alpha * j) * std::sqrt(var[j] * 2 * std::log(cnt[j])));
    return best;
}

}  // namespace

TEST_CASE("holder norm of white noise: divergence above -1, bounded below") {
    std::vector<double> Ns{16, 32, 64, 128};
    for (double alpha : {-0.5, -1.5}) {
        std::vector<double> meas, pred;
        for (double Nd : Ns) {
            const int N = int(Nd);
            auto xi = sample_white_noise(N, 1.0, 1, 808);
            auto w = xi.increment(0);
            spectral::leray_project_inplace(w);
            meas.push_back(holder_norm(w, alpha));
            pred.push_back(predicted_norm(N, alpha, [](int) { return 1.0; }));
        }
        const double sm = slope(Ns, meas), sp = slope(Ns, pred);
        INFO("alpha " << alpha << " measured slope " << sm << " oracle slope " << sp);
        CHECK(std::abs(sm - sp) <= 0.15);
        if (alpha > -1) CHECK(sm > 0.3);
        else CHECK(std::abs(sm) < 0.15);
    }
}

TEST_CASE("rough initial data: regularity slope, divergence, independence") {
    const double eta = -0.4;
    std::vector<double> Ns{16, 32, 64, 128}, meas, pred;
    for (double Nd : Ns) {
        const int N = int(Nd);
        auto u = sample_rough_initial(eta, N, 55);
        CHECK(max_divergence(u) <= 1e-12 * norm(u));
        CHECK(u.at(0, 0, 0) == cplx{});
        meas.push_back(holder_norm(u, 0.0));
        pred.push_back(predicted_norm(N, 0.0, [&](int q) { return std::pow(double(q), -(eta + 1)) / (4 * kPi * kPi); }));
    }
    // the sup of the finest block grows like N^{-eta}: the regularity is eta
    const double sm = slope(Ns, meas), sp = slope(Ns, pred);
    INFO("measured " << sm << " oracle " << sp);
    CHECK(std::abs(sm - sp) <= 0.15);
    CHECK(std::abs(-sm - eta) <= 0.3);

    auto a = sample_rough_initial(eta, 32, 1), b = sample_rough_initial(eta, 32, 2);
    double s = 0, s2 = 0;
    for (int c = 0; c < 2; ++c)
        spectral::for_each_stored_mode(32, [&](int k1, int k2, int w) {
            const cplx x = a.at(c, k1, k2), y = b.at(c, k1, k2);
            const double t = w * (x.real() * y.real() + x.imag() * y.imag());
            s += t;
            s2 += t * t;
        });
    CHECK(std::abs(s) < 3 * std::sqrt(s2));
    CHECK(max_abs_diff(sample_rough_initial(eta, 32, 1), a) == 0.0);
}
