#include <doctest.h>

#include "sns/noise/noise.hpp"
#include "sns/solver/solver.hpp"

#include <cmath>
#include <numbers>

using namespace sns;
using namespace sns::solver;
using spectral::cplx;

namespace {

SpectralField random_divfree(int N, std::uint64_t seed, double amp = 1.0) {
    auto u = noise::sample_stationary(N, 1.0, seed);
    u *= amp;
    return u;
}

double rel_diff(const SpectralField& a, const SpectralField& b) { return norm(a - b) / std::max(norm(b), 1e-300); }

SolverConfig small_cfg(int N, double dt, double T) {
    SolverConfig c;
    c.N = N;
    c.dt = dt;
    c.T = T;
    return c;
}

}  // namespace

TEST_CASE("nonlinearity: parallel shear flow, zero field, divergence form") {
    const int N = 8;
    SpectralField shear(N);
    shear.set_mode(1, 1, 0, cplx(0.0, -0.5));  // u = (0, sin x1)
    CHECK(max_abs(nonlinearity(shear)) < 1e-15);
    CHECK(max_abs(nonlinearity(SpectralField(N))) == 0.0);

    Nonlinearity nl(N);
    for (std::uint64_t s = 1; s <= 5; ++s) {
        auto u = random_divfree(N, s, 10.0);
        SpectralField b, adv;
        nl.apply(u, b);
        nl.advective(u, adv);
        // B = -(1/2) P div(u u) and P div(u u) = P (u.grad) u for div-free u
        CHECK(rel_diff(-2.0 * b, adv) < 1e-12);
        CHECK(std::abs(inner(b, u)) <= 1e-10 * std::pow(norm(u), 3));
        CHECK(max_divergence(b) <= 1e-12 * norm(b));
    }
}

TEST_CASE("Leray projection is self adjoint and idempotent") {
    auto f = noise::sample_rough_initial(-0.3, 10, 1);
    SpectralField g(10);
    NormalSource r(3);
    spectral::for_each_stored_mode(10, [&](int k1, int k2, int) {
        if (k2 == 0 && k1 <= 0) return;
        g.set_mode(0, k1, k2, cplx(r.normal(), r.normal()));
        g.set_mode(1, k1, k2, cplx(r.normal(), r.normal()));
    });
    CHECK(std::abs(inner(leray_project(g), f) - inner(g, leray_project(f))) <= 1e-12 * norm(f) * norm(g));
    CHECK(max_abs_diff(leray_project(f), f) < 1e-15 * max_abs(f));
}

TEST_CASE("step_v: trivial cases and the Wick counterterm") {
    auto cfg = small_cfg(8, 1e-3, 1e-3);
    SpectralField zero(8);
    CHECK(max_abs(step_v(zero, zero, cfg, 0.0)) == 0.0);
    auto v = random_divfree(8, 4), z = random_divfree(8, 5);
    auto off = step_v(v, z, cfg, 0.3);
    cfg.wick = true;
    auto on = step_v(v, z, cfg, 0.3);
    CHECK(rel_diff(on, off) <= 1e-14);
}

TEST_CASE("Taylor-Green vortex decays like exp(-2 nu t)") {
    const int N = 16;
    auto cfg = small_cfg(N, 1e-3, 1.0);
    cfg.nu = 0.8;
    cfg.snapshot_stride = 100;
    const double A = 1e-2;
    SpectralField u0(N);
    // (sin x cos y, -cos x sin y)
    u0.set_mode(0, 1, 1, cplx(0, -A / 4));
    u0.set_mode(0, 1, -1, cplx(0, -A / 4));
    u0.set_mode(1, 1, 1, cplx(0, A / 4));
    u0.set_mode(1, -1, 1, cplx(0, A / 4));
    auto tr = solve(u0, noise::zero_noise(N, cfg.dt, cfg.steps()), cfg);
    REQUIRE(tr.u.size() == 11);
    for (std::size_t i = 0; i < tr.u.size(); ++i) {
        const double expect = std::exp(-2 * cfg.nu * tr.times[i]);
        CHECK(rel_diff(tr.u[i], expect * u0) <= 1e-4);
    }
}

TEST_CASE("solve: zero data and zero noise stay zero") {
    auto cfg = small_cfg(8, 1e-3, 0.05);
    cfg.snapshot_stride = 1;
    auto tr = solve(SpectralField(8), noise::zero_noise(8, cfg.dt, cfg.steps()), cfg);
    for (const auto& u : tr.u) CHECK(max_abs(u) == 0.0);
    for (double r : tr.r) CHECK(r == 0.0);
    CHECK(tr.status == Status::Completed);
}

TEST_CASE("full-state identity and divergence-free output") {
    const int N = 12;
    auto cfg = small_cfg(N, 2e-3, 0.02);
    cfg.snapshot_stride = 1;
    auto xi = noise::sample_white_noise(N, cfg.dt, cfg.steps(), 17);
    auto tr = solve(random_divfree(N, 9, 3.0), xi, cfg);
    LinearPart lin(N, cfg.nu, cfg.dt);
    noise::OUStepper ou(N, cfg.nu, cfg.dt);
    for (int n = 0; n < cfg.steps(); ++n) {
        SpectralField pred = tr.u[n];
        lin.apply_E(pred);
        lin.add_phi(pred, nonlinearity(tr.u[n]));
        SpectralField f;
        ou.forcing(xi.increment(n), f);
        pred += f;
        CHECK(rel_diff(tr.u[n + 1], pred) <= 1e-13);
        CHECK(max_divergence(tr.u[n + 1]) <= 1e-12 * norm(tr.u[n + 1]));
        CHECK(max_divergence(tr.v[n + 1]) <= 1e-12 * norm(tr.v[n + 1]));
    }
}

TEST_CASE("flow property: restart with the noise tail") {
    const int N = 16;
    auto cfg = small_cfg(N, 1e-3, 0.3);
    auto xi = noise::sample_white_noise(N, cfg.dt, cfg.steps(), 2718);
    auto u0 = noise::sample_rough_initial(-0.4, N, 6);
    auto full = solve(u0, xi, cfg);
    auto first_cfg = cfg;
    first_cfg.T = 0.1;
    auto first = solve(u0, xi, first_cfg);
    auto second_cfg = cfg;
    second_cfg.T = 0.2;
    auto second = solve(*first.final_state(), xi.tail(first_cfg.steps()), second_cfg);
    CHECK(rel_diff(*second.final_state(), *full.final_state()) <= 1e-10);
}

TEST_CASE("shift compatibility and the one-step drift identity") {
    const int N = 12;
    auto cfg = small_cfg(N, 1e-3, 0.05);
    cfg.snapshot_stride = 1;
    const int steps = cfg.steps();
    auto xi = noise::sample_white_noise(N, cfg.dt, steps, 5);
    noise::Shift h(N, cfg.dt, 20, 25);  // supported on steps 25..44
    NormalSource r(1);
    for (auto& f : h.h)
        for (auto [k1, k2] : spectral::shell_order(N)) f.set_mode(0, k1, k2, cplx(r.normal(), r.normal()));
    auto u0 = random_divfree(N, 2, 2.0);
    auto a = solve(u0, xi, cfg), b = solve(u0, noise::apply_shift(xi, h), cfg);
    for (int n = 0; n <= 25; ++n) CHECK(a.u[n].data() == b.u[n].data());
    CHECK(rel_diff(b.u[26], a.u[26]) > 1e-8);

    // one step: shifted noise equals unshifted noise plus the drift S P h dt
    auto one = cfg;
    one.T = cfg.dt;
    noise::Shift h1(N, cfg.dt, 1);
    h1.h[0] = h.h[3];
    auto xs = noise::apply_shift(xi.truncated(1), h1);
    auto shifted = solve(u0, xs, one);
    auto plain = solve(u0, xi.truncated(1), one);
    noise::OUStepper ou(N, cfg.nu, cfg.dt);
    SpectralField drift;
    ou.forcing(cfg.dt * h1.h[0], drift);
    CHECK(rel_diff(*shifted.final_state(), *plain.final_state() + drift) <= 1e-10);
}

TEST_CASE("Jacobian: heat flow, linearity, chain rule, finite differences") {
    const int N = 16;
    auto cfg = small_cfg(N, 2e-3, 0.2);
    cfg.snapshot_stride = 1;
    const int steps = cfg.steps();

    // u = 0: heat flow
    auto zero = solve(SpectralField(N), noise::zero_noise(N, cfg.dt, steps), cfg);
    auto v0 = random_divfree(N, 40);
    auto J0 = jacobian_apply(zero, v0, 0.0, cfg.T);
    SpectralField heat = v0;
    for (int c = 0; c < 2; ++c)
        for (int k1 = -N; k1 <= N; ++k1)
            for (int k2 = 0; k2 <= N; ++k2) heat.at(c, k1, k2) *= std::exp(-cfg.nu * (k1 * k1 + k2 * k2) * cfg.T);
    CHECK(rel_diff(J0, heat) <= 1e-8);

    auto xi = noise::sample_white_noise(N, cfg.dt, steps, 11);
    auto u0 = noise::sample_rough_initial(-0.4, N, 3);
    auto tr = solve(u0, xi, cfg);
    auto w0 = random_divfree(N, 41);
    auto Jv = jacobian_apply(tr, v0, 0.0, cfg.T), Jw = jacobian_apply(tr, w0, 0.0, cfg.T);
    auto Jc = jacobian_apply(tr, 2.5 * v0 - 0.75 * w0, 0.0, cfg.T);
    CHECK(rel_diff(Jc, 2.5 * Jv - 0.75 * Jw) <= 1e-10);
    CHECK(max_divergence(Jv) <= 1e-12 * norm(Jv));

    auto mid = jacobian_apply(tr, v0, 0.0, 0.08);
    auto chain = jacobian_apply(tr, mid, 0.08, cfg.T);
    CHECK(rel_diff(chain, Jv) <= 1e-8);
    CHECK(rel_diff(jacobian_apply(tr, v0, 0.1, 0.1), v0) == 0.0);

    const double eps = 1e-5;
    auto pert = solve(u0 + eps * v0, xi, cfg);
    auto fd = (1.0 / eps) * (*pert.final_state() - *tr.final_state());
    CHECK(rel_diff(fd, Jv) <= 1e-3);
    CHECK_THROWS_AS(jacobian_apply(tr, v0, 0.0, 0.0015), SolverError);

    // tangents carried along by the propagator: same arithmetic as jacobian_apply
    Propagator p(cfg, xi);
    p.reset(u0, xi);
    std::vector<SpectralField> tang{v0, w0};
    for (int n = 0; n < steps; ++n) p.step(tang);
    CHECK(max_abs_diff(tang[0], Jv) == 0.0);
    CHECK(max_abs_diff(tang[1], Jw) == 0.0);
    CHECK(max_abs_diff(p.u(), *tr.final_state()) == 0.0);
}

TEST_CASE("explosion monitor: zero, monotone, cemetery") {
    const int N = 12;
    auto cfg = small_cfg(N, 1e-3, 0.1);
    cfg.snapshot_stride = 1;
    auto xi = noise::sample_white_noise(N, cfg.dt, cfg.steps(), 8);
    auto tr = solve(noise::sample_rough_initial(-0.4, N, 1), xi, cfg);
    auto r = explosion_radius(tr);
    REQUIRE(r.size() == static_cast<std::size_t>(cfg.steps()) + 1);
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] >= r[i - 1]);
    CHECK(std::isfinite(r.front()));
    CHECK(tr.status == Status::Completed);

    auto big = cfg;
    big.R_max = 50.0;
    big.u_ref = 1.0;
    big.dt = 1e-4;
    big.T = 0.05;
    auto xb = noise::sample_white_noise(N, big.dt, big.steps(), 8);
    auto ex = solve(random_divfree(N, 3, 400.0), xb, big);
    CHECK(ex.exploded());
    CHECK(ex.r.back() >= big.R_max);
    CHECK_FALSE(ex.final_state().has_value());
    CHECK(std::isinf(explosion_radius(ex).back()));

    // stride: same trajectory, monitor evaluated less often but still monotone
    auto strided = cfg;
    strided.monitor_stride = 7;
    auto ts = solve(noise::sample_rough_initial(-0.4, N, 1), xi, strided);
    CHECK(ts.final_state()->data() == tr.final_state()->data());
    CHECK(ts.r.back() <= tr.r.back());
}

TEST_CASE("configuration checks") {
    SolverConfig c;
    CHECK_NOTHROW(c.validate());  // defaults: N=64, dt=1e-3, T=1
    c.dt = 1e-2;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("stability"), SolverError);
    c.dt = 3e-4;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("multiple"), SolverError);
    c = SolverConfig{};
    c.eta = 0.2;
    CHECK_THROWS_AS(c.validate(), SolverError);
    SpectralField bad(8);
    bad.set_mode(0, 1, 0, 1.0);  // compressible
    auto cfg = small_cfg(8, 1e-3, 1e-2);
    CHECK_THROWS_AS(solve(bad, noise::zero_noise(8, cfg.dt, 10), cfg), SolverError);
}
