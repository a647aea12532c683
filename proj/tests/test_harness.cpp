#include <doctest.h>

#include "sns/harness/harness.hpp"

#include <cmath>
#include <numbers>

using namespace sns;
using namespace sns::harness;
using spectral::cplx;

namespace {

SolverConfig cfg_of(int N, double dt, double T, bool nonlinear = true) {
    SolverConfig c;
    c.N = N;
    c.dt = dt;
    c.T = T;
    c.nonlinear = nonlinear;
    return c;
}

McOptions mc_of(std::uint64_t seed, int threads = 1) {
    McOptions m;
    m.seed = seed;
    m.threads = threads;
    return m;
}

// unit divergence-free direction on a single mode
SpectralField mode_direction(int N, int k1, int k2, cplx phase = {1.0, 0.0}) {
    SpectralField e(N);
    const double q = std::hypot(double(k1), double(k2));
    e.set_mode(0, k1, k2, phase * (-k2 / q));
    e.set_mode(1, k1, k2, phase * (k1 / q));
    e *= 1.0 / norm(e);
    return e;
}

Observable logistic_cylinder(const SpectralField& e, double c, double w) {
    return Observable::cylinder({e}, [c, w](std::span<const double> y) { return logistic((y[0] - c) / w); }, 1.0);
}

}  // namespace

TEST_CASE("batch means standard error") {
    std::vector<double> x(20);
    for (int i = 0; i < 20; ++i) x[static_cast<std::size_t>(i)] = i + 1;
    auto e = batch_estimate(x, 4);
    CHECK(e.value == doctest::Approx(10.5));
    // batch means 3, 8, 13, 18: sd = sqrt(125/3), se = sd / 2
    CHECK(e.se == doctest::Approx(std::sqrt(125.0 / 3.0) / 2.0));
    CHECK(e.pooled_stderr == doctest::Approx(std::sqrt(35.0 / 20.0)));
    CHECK(e.batches == 4);
    std::vector<double> one{2.0};
    CHECK(batch_estimate(one, 20).se == 0.0);
}

TEST_CASE("observables: bounds and the cemetery") {
    const int N = 4;
    auto u = noise::sample_stationary(N, 1.0, 3);
    auto c = Observable::constant(0.7);
    CHECK(c(u) == 0.7);
    CHECK(c(std::optional<SpectralField>{}) == 0.0);
    auto ind = Observable::smoothed_indicator({1, 2}, SpectralField(N), 0.5, 0.0);
    CHECK(ind(SpectralField(N)) == 1.0);
    SpectralField big = 10.0 * mode_direction(N, 1, 0);
    CHECK(ind(big) == 0.0);
    // a mode outside the band is ignored
    CHECK(ind(10.0 * mode_direction(N, 3, 1)) == 1.0);
    auto smooth = Observable::smoothed_indicator({1, 2}, SpectralField(N), 0.5, 0.1);
    CHECK(smooth(0.5 * mode_direction(N, 1, 1)) == doctest::Approx(0.5));
    auto bad = Observable::cylinder({mode_direction(N, 1, 0)}, [](std::span<const double> y) { return 5.0 * y[0]; }, 1.0);
    CHECK_THROWS_AS(bad(big), HarnessError);
    CHECK(logistic(-800.0) == 0.0);
    CHECK(logistic(800.0) == 1.0);
}

TEST_CASE("semigroup estimates: trivial cases and thread independence") {
    const int N = 8;
    auto cfg = cfg_of(N, 1.0 / 64, 0.25);
    auto u0 = noise::sample_stationary(N, 1.0, 5);
    auto one = Observable::constant(1.0);
    auto e = estimate_semigroup(one, u0, 0.25, 30, cfg, mc_of(1));
    CHECK(e.value == 1.0);
    CHECK(e.se == 0.0);
    CHECK(e.n_exploded == 0);
    auto psi = logistic_cylinder(mode_direction(N, 1, 0), 0.0, 0.05);
    auto t0 = estimate_semigroup(psi, u0, 0.0, 10, cfg, mc_of(1));
    CHECK(t0.value == psi(u0));
    CHECK(t0.se == 0.0);
    std::vector<double> s1, s3;
    auto a = estimate_semigroup(psi, u0, 0.25, 12, cfg, mc_of(9, 1), &s1);
    auto b = estimate_semigroup(psi, u0, 0.25, 12, cfg, mc_of(9, 3), &s3);
    CHECK(s1 == s3);
    CHECK(a.value == b.value);
    CHECK_THROWS_AS(estimate_semigroup(psi, u0, 0.5, 4, cfg, mc_of(1)), HarnessError);
    CHECK_THROWS_AS(estimate_semigroup(psi, u0, 0.01, 4, cfg, mc_of(1)), HarnessError);
}

TEST_CASE("Chapman-Kolmogorov: direct vs nested estimate") {
    const int N = 6;
    const double t = 0.25, s = 0.25;
    auto cfg = cfg_of(N, 1.0 / 64, t + s);
    auto u0 = 0.5 * noise::sample_stationary(N, 1.0, 21);
    auto psi = logistic_cylinder(mode_direction(N, 1, 0), 0.02, 0.05);
    auto direct = estimate_semigroup(psi, u0, t + s, 1600, cfg, mc_of(100));
    // outer paths to t, then an inner estimate of P_s psi from each endpoint
    const int outer = 80, inner_n = 20;
    std::vector<double> vals(outer);
    for (int i = 0; i < outer; ++i) {
        auto xi = path_noise(cfg, step_of(t, cfg), mc_of(200), i);
        solver::Propagator p(cfg, xi);
        p.reset(u0, xi);
        for (int m = 0; m < step_of(t, cfg); ++m) p.step();
        McOptions in = mc_of(300);
        in.stream_offset = static_cast<std::uint64_t>(i) * 1000;
        vals[static_cast<std::size_t>(i)] = estimate_semigroup(psi, p.u(), s, inner_n, cfg, in).value;
    }
    auto nested = batch_estimate(vals, 20);
    CHECK(std::abs(direct.value - nested.value) <= 3.0 * std::hypot(direct.se, nested.se));
}

TEST_CASE("control: zero direction, heat-flow closed form, residual, adaptedness") {
    const int N = 8;
    auto cfg = cfg_of(N, 1.0 / 64, 0.25);
    cfg.snapshot_stride = 1;
    const int n = cfg.steps();
    noise::OUStepper ou(N, cfg.nu, cfg.dt);
    auto v0 = mode_direction(N, 2, 1) + mode_direction(N, -1, 1, cplx(0.0, 1.0));

    // u = 0 (zero data, zero noise): h_m = -S^{-1} e^{nu t_{m+1} Laplace} v0 / t
    auto zero = solver::solve(SpectralField(N), noise::zero_noise(N, cfg.dt, n), cfg);
    auto h0 = build_control(zero, v0, cfg.T);
    REQUIRE(h0.steps() == n);
    double err = 0.0;
    for (int m = 0; m < n; ++m)
        for (int c = 0; c < 2; ++c)
            for (int k1 = -N; k1 <= N; ++k1)
                for (int k2 = 0; k2 <= N; ++k2) {
                    if (k1 == 0 && k2 == 0) continue;
                    const double lam = cfg.nu * (k1 * k1 + k2 * k2);
                    const cplx want = -v0.at(c, k1, k2) * std::exp(-lam * (m + 1) * cfg.dt) / ou.noise_scale(k1, k2) / cfg.T;
                    err = std::max(err, std::abs(h0.h[static_cast<std::size_t>(m)].at(c, k1, k2) - want));
                }
    CHECK(err <= 1e-12);
    CHECK(control_residual(zero, h0, v0, cfg.T) <= 1e-3);

    auto xi = noise::sample_white_noise(N, cfg.dt, n, 4);
    auto u0 = noise::sample_rough_initial(-0.4, N, 8);
    auto tr = solver::solve(u0, xi, cfg);
    auto h = build_control(tr, v0, cfg.T);
    CHECK(control_residual(tr, h, v0, cfg.T) <= 1e-3);
    auto hz = build_control(tr, SpectralField(N), cfg.T);
    for (const auto& f : hz.h) CHECK(max_abs(f) == 0.0);

    // adaptedness: change the noise from step 10 on; h_0..h_10 do not move
    noise::Shift kick(N, cfg.dt, n - 10, 10);
    for (auto& f : kick.h) f = 3.0 * mode_direction(N, 1, 1);
    auto tr2 = solver::solve(u0, noise::apply_shift(xi, kick), cfg);
    auto h2 = build_control(tr2, v0, cfg.T);
    for (int m = 0; m <= 10; ++m) CHECK(max_abs_diff(h.h[static_cast<std::size_t>(m)], h2.h[static_cast<std::size_t>(m)]) == 0.0);
    CHECK(max_abs_diff(h.h[11], h2.h[11]) > 0.0);
}

TEST_CASE("linear Gaussian oracle against direct quadrature and Monte Carlo") {
    const int N = 6;
    auto cfg = cfg_of(N, 1.0 / 32, 0.5, false);
    auto e = mode_direction(N, 1, 1);
    auto u0 = 0.05 * mode_direction(N, 1, 1) + 0.02 * mode_direction(N, 2, 0);
    auto v0 = mode_direction(N, 1, 1, cplx(0.6, 0.8));
    auto psi = logistic_cylinder(e, 0.01, 0.03);
    auto o = linear_gaussian_oracle(psi, u0, v0, cfg.T, cfg);
    // mean: e^{-2 t} <u0, e>; variance of <u_t, e> from the per-step sum
    CHECK(o.mean == doctest::Approx(0.05 * std::exp(-2.0 * 0.5)).epsilon(1e-12));
    noise::OUStepper ou(N, 1.0, cfg.dt);
    double var = 0.0;
    for (int j = 0; j < 16; ++j) var += cfg.dt * std::pow(ou.noise_scale(1, 1) * std::pow(ou.decay(1, 1), j), 2);
    CHECK(o.sd == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    // gradient equals the derivative of the value along v0
    const double h = 1e-4;
    const double fd = (linear_gaussian_oracle(psi, u0 + h * v0, v0, cfg.T, cfg).value -
                       linear_gaussian_oracle(psi, u0 - h * v0, v0, cfg.T, cfg).value) /
                      (2 * h);
    CHECK(o.gradient == doctest::Approx(fd).epsilon(1e-6));
    auto mc = estimate_semigroup(psi, u0, cfg.T, 4000, cfg, mc_of(77));
    CHECK(std::abs(mc.value - o.value) <= 3.0 * mc.se);
}

TEST_CASE("BEL: constant observable, linear calibration, agreement with finite differences") {
    const int N = 6;
    auto cfg = cfg_of(N, 1.0 / 32, 0.5, false);
    auto e = mode_direction(N, 1, 0);
    auto u0 = 0.03 * mode_direction(N, 1, 0) + 0.05 * mode_direction(N, 0, 1);
    auto v0 = mode_direction(N, 1, 0);
    auto cst = bel_gradient(Observable::constant(1.0), u0, v0, cfg.T, 2000, cfg, mc_of(3));
    CHECK(std::abs(cst.value) <= 3.0 * cst.se);

    auto psi = logistic_cylinder(e, 0.0, 0.04);
    auto oracle = linear_gaussian_oracle(psi, u0, v0, cfg.T, cfg);
    auto bel = bel_gradient(psi, u0, v0, cfg.T, 6000, cfg, mc_of(5));
    CHECK(std::abs(bel.value - oracle.gradient) <= 3.0 * bel.se);
    CHECK(bel.se < 0.2 * std::abs(oracle.gradient));

    // nonlinear, small cutoff
    auto cn = cfg_of(N, 1.0 / 64, 0.25);
    auto u1 = noise::sample_stationary(N, 1.0, 12);
    auto v1 = mode_direction(N, 1, 0);
    auto psi1 = Observable::smoothed_indicator({1, 1}, SpectralField(N), 0.15, 0.05);
    auto cmp = gradient_comparison(psi1, u1, v1, cn.T, 1e-4, 3000, cn, mc_of(8));
    CHECK(std::abs(cmp.bel.value - cmp.fd.value) <= 3.0 * std::hypot(cmp.bel.se, cmp.fd.se));
    auto bel1 = bel_gradient(psi1, u1, v1, cn.T, 3000, cn, mc_of(8));
    CHECK(bel1.value == doctest::Approx(cmp.bel.value).epsilon(1e-12));
    auto fd1 = fd_gradient(psi1, u1, v1, cn.T, 1e-4, 400, cn, mc_of(8));
    CHECK(std::abs(fd1.value - cmp.fd.value) <= 3.0 * std::hypot(fd1.se, cmp.fd.se) + 1e-3);
}

TEST_CASE("strong Feller probe: y = x and the sharp t -> 0 limit") {
    const int N = 6;
    auto cfg = cfg_of(N, 1.0 / 1024, 1.0 / 1024);
    auto x = SpectralField(N);
    auto psi = Observable::smoothed_indicator({1, 2}, SpectralField(N), 0.2, 0.0);
    auto same = strong_feller_probe(x, {x}, {psi}, cfg.T, 50, cfg, mc_of(2));
    REQUIRE(same.points.size() == 1);
    CHECK(same.points[0].gap == 0.0);
    CHECK(same.points[0].gap_stderr == 0.0);
    // y outside the ball: one tiny step keeps both on their side
    auto y = 0.5 * mode_direction(N, 1, 1);
    auto far = strong_feller_probe(x, {y}, {psi}, cfg.T, 50, cfg, mc_of(2));
    CHECK(far.points[0].gap == doctest::Approx(std::abs(psi(x) - psi(y))));
    CHECK(far.points[0].distance_l2 == doctest::Approx(0.5));

    // a short monotone sweep on a smooth family
    auto c2 = cfg_of(N, 1.0 / 64, 0.25);
    auto x2 = noise::sample_stationary(N, 1.0, 31);
    auto d = mode_direction(N, 1, 0);
    std::vector<SpectralField> ys{x2 + 0.1 * d, x2 + 0.05 * d, x2 + 0.025 * d};
    std::vector<Observable> fam{Observable::smoothed_indicator({1, 1}, SpectralField(N), 0.15, 0.1),
                                Observable::smoothed_indicator({1, 1}, SpectralField(N), 0.15, 0.05)};
    auto rep = strong_feller_probe(x2, ys, fam, c2.T, 400, c2, mc_of(4));
    CHECK(rep.monotone);
    CHECK(rep.pass);
    CHECK(rep.points[0].gap > rep.points[2].gap);
}

TEST_CASE("invariance: Stokes ratios, mu_N sampler, short nonlinear run") {
    auto st = stokes_invariance(4, 1.0, 0.05, 3.0, 20.0, 1, 200, mc_of(6));
    for (const auto& m : st.ratios) CHECK(std::abs(m.value - 1.0) <= 4.0 * m.se);
    CHECK(st.samples == 200LL * 400);

    auto cfg = cfg_of(8, 1.0 / 64, 0.25);
    auto rep = nonlinear_invariance(cfg, 200, {1, 2}, mc_of(7));
    CHECK(rep.n_exploded == 0);
    CHECK(std::abs(rep.kurtosis0) <= 3.0 * rep.kurtosis0_stderr);
    for (const auto& m : rep.var0) CHECK(std::abs(m.value - 1.0) <= 4.0 * m.se);
    CHECK(std::abs(rep.drift) <= 4.0 * rep.drift_stderr);
}

TEST_CASE("global existence plumbing and the derivative sweep") {
    const int N = 8;
    auto adv = adversarial_rough_initial(-0.4, N, 2.0);
    CHECK(noise::holder_norm(adv, -0.4) == doctest::Approx(2.0));
    CHECK(max_divergence(adv) <= 1e-12 * norm(adv));
    auto cfg = cfg_of(N, 1.0 / 64, 0.25);
    auto none = global_existence_experiment(-0.4, 4, 0.0, cfg, mc_of(3));
    CHECK(none.n_exploded == 0);
    auto g = global_existence_experiment(-0.4, 6, 0.25, cfg, mc_of(3));
    CHECK(g.n_exploded == 0);
    CHECK(g.r_max < 1e6);
    CHECK_THROWS_AS(global_existence_experiment(-0.6, 2, 0.25, cfg, mc_of(3)), HarnessError);

    auto xi = noise::sample_white_noise(N, cfg.dt, cfg.steps(), 19);
    auto u0 = noise::sample_rough_initial(-0.4, N, 1);
    auto d = derivative_vs_fd(u0, mode_direction(N, 2, 1), 0.25, cfg, xi);
    CHECK(d.pass);
    CHECK(d.eps.size() == 5);
    auto z = derivative_vs_fd(u0, SpectralField(N), 0.25, cfg, xi);
    CHECK(z.min_error == 0.0);
    auto js = jacobian_suite(u0, mode_direction(N, 2, 1), mode_direction(N, 1, 3), 0.25, cfg, xi);
    CHECK(js.fd_error <= 1e-3);
    CHECK(js.chain_error <= 1e-8);
    CHECK(js.linearity_error <= 1e-10);
}
