#include "sns/solver/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sns::solver {

using spectral::cplx;
using spectral::RealGrid;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

int SolverConfig::steps() const {
    if (!(dt > 0.0)) throw SolverError("dt must be positive");
    const double n = T / dt;
    const double r = std::round(n);
    if (std::abs(n - r) > 1e-9 * std::max(1.0, n)) throw SolverError("T must be a multiple of dt");
    return static_cast<int>(r);
}

int SolverConfig::grid() const { return spectral::dealiased_grid_size(N); }

void SolverConfig::validate() const {
    if (N < 1) throw SolverError("N must be >= 1");
    if (!(nu > 0.0)) throw SolverError("nu must be positive");
    if (!(T >= 0.0)) throw SolverError("T must be non-negative");
    (void)steps();
    if (!(R_max > 0.0)) throw SolverError("R_max must be positive");
    if (monitor_stride < 1) throw SolverError("monitor_stride must be >= 1");
    if (snapshot_stride < 0) throw SolverError("snapshot_stride must be >= 0");
    if (!(courant > 0.0) || !(u_ref > 0.0)) throw SolverError("courant and u_ref must be positive");
    if (nonlinear && dt > max_stable_dt() * (1.0 + 1e-12))
        throw SolverError("time step violates the stability rule dt <= courant/(N u_ref) = " +
                          std::to_string(max_stable_dt()) + " (dt = " + std::to_string(dt) + ")");
    if (!(eta > -1.0 && eta < 0.0)) throw SolverError("eta must lie in (-1, 0)");
}

// ---------------------------------------------------------------------------

Nonlinearity::Nonlinearity(int N) : n_(N), m_(spectral::dealiased_grid_size(N)) {
    tr_ = std::make_unique<spectral::GridTransform>(N, m_);
    for (auto* g : {&a1_, &a2_, &b1_, &b2_, &p11_, &p12_, &p22_}) *g = tr_->make_grid();
    h11_ = SpectralField(N, 1);
    h12_ = SpectralField(N, 1);
    h22_ = SpectralField(N, 1);
}

void Nonlinearity::to_grid(const SpectralField& u, RealGrid& g1, RealGrid& g2) {
    if (g1.size() != tr_->grid_points()) g1 = tr_->make_grid();
    if (g2.size() != tr_->grid_points()) g2 = tr_->make_grid();
    tr_->to_grid(u, 0, g1.data());
    tr_->to_grid(u, 1, g2.data());
}

// out_i = -(1/2) P_k (i k_j h_ij)
void Nonlinearity::from_products(SpectralField& out) {
    tr_->from_grid(p11_.data(), h11_, 0);
    tr_->from_grid(p12_.data(), h12_, 0);
    tr_->from_grid(p22_.data(), h22_, 0);
    if (out.cutoff() != n_ || out.components() != 2) out = SpectralField(n_);
    const int N = n_;
    for (int k1 = -N; k1 <= N; ++k1) {
        for (int k2 = 0; k2 <= N; ++k2) {
            const int q = k1 * k1 + k2 * k2;
            if (q == 0) {
                out.at(0, k1, k2) = out.at(1, k1, k2) = cplx{};
                continue;
            }
            // real arithmetic only: d = i s, out = -(1/2) i (s - k (k.s)/|k|^2)
            const double a = k1, b = k2;
            const cplx h12 = h12_.at(0, k1, k2);
            const cplx s1 = a * h11_.at(0, k1, k2) + b * h12;
            const cplx s2 = a * h12 + b * h22_.at(0, k1, k2);
            const cplx ks = (a * s1 + b * s2) * (1.0 / q);
            const cplx r1 = s1 - a * ks, r2 = s2 - b * ks;
            out.at(0, k1, k2) = cplx(0.5 * r1.imag(), -0.5 * r1.real());
            out.at(1, k1, k2) = cplx(0.5 * r2.imag(), -0.5 * r2.real());
        }
    }
}

void Nonlinearity::apply(const SpectralField& u, SpectralField& out, const std::array<double, 3>& wick) {
    if (u.cutoff() != n_) throw SolverError("nonlinearity: cutoff mismatch");
    to_grid(u, a1_, a2_);
    const std::size_t n = a1_.size();
    for (std::size_t i = 0; i < n; ++i) {
        p11_[i] = a1_[i] * a1_[i] - wick[0];
        p12_[i] = a1_[i] * a2_[i] - wick[1];
        p22_[i] = a2_[i] * a2_[i] - wick[2];
    }
    from_products(out);
}

void Nonlinearity::tangent(const SpectralField& u, const SpectralField& w, SpectralField& out) {
    if (u.cutoff() != n_) throw SolverError("tangent: cutoff mismatch");
    to_grid(u, a1_, a2_);
    tangent_at_last(w, out);
}

void Nonlinearity::tangent_at_last(const SpectralField& w, SpectralField& out) {
    if (w.cutoff() != n_) throw SolverError("tangent: cutoff mismatch");
    to_grid(w, b1_, b2_);
    const std::size_t n = a1_.size();
    for (std::size_t i = 0; i < n; ++i) {
        p11_[i] = 2.0 * a1_[i] * b1_[i];
        p12_[i] = a1_[i] * b2_[i] + a2_[i] * b1_[i];
        p22_[i] = 2.0 * a2_[i] * b2_[i];
    }
    from_products(out);
}

void Nonlinearity::advective(const SpectralField& u, SpectralField& out) {
    const int N = n_;
    to_grid(u, a1_, a2_);
    // gradients: d_j u_i
    SpectralField du(N, 2);
    RealGrid g[2][2];
    for (int j = 0; j < 2; ++j) {
        for (int k1 = -N; k1 <= N; ++k1)
            for (int k2 = 0; k2 <= N; ++k2) {
                const cplx ik(0.0, j == 0 ? k1 : k2);
                du.at(0, k1, k2) = ik * u.at(0, k1, k2);
                du.at(1, k1, k2) = ik * u.at(1, k1, k2);
            }
        to_grid(du, g[0][j], g[1][j]);
    }
    out = SpectralField(N, 2);
    SpectralField tmp(N, 1);
    RealGrid p = tr_->make_grid();
    for (int i = 0; i < 2; ++i) {
        for (std::size_t x = 0; x < p.size(); ++x) p[x] = a1_[x] * g[i][0][x] + a2_[x] * g[i][1][x];
        tr_->from_grid(p.data(), tmp, 0);
        for (int k1 = -N; k1 <= N; ++k1)
            for (int k2 = 0; k2 <= N; ++k2) out.at(i, k1, k2) = tmp.at(0, k1, k2);
    }
    spectral::leray_project_inplace(out);
}

SpectralField nonlinearity(const SpectralField& u) {
    Nonlinearity nl(u.cutoff());
    SpectralField out;
    nl.apply(u, out);
    return out;
}


// ---------------------------------------------------------------------------

LinearPart::LinearPart(int N, double nu, double dt) : n_(N) {
    const std::size_t n = static_cast<std::size_t>(2 * N + 1) * static_cast<std::size_t>(N + 1);
    e_.assign(n, 1.0);
    p_.assign(n, dt);
    for (int k1 = -N; k1 <= N; ++k1)
        for (int k2 = 0; k2 <= N; ++k2) {
            const double lam = nu * double(k1 * k1 + k2 * k2);
            if (lam == 0.0) continue;
            e_[idx(k1, k2)] = std::exp(-lam * dt);
            p_[idx(k1, k2)] = -std::expm1(-lam * dt) / lam;
        }
}

void LinearPart::apply_E(SpectralField& f) const {
    for (int c = 0; c < f.components(); ++c)
        for (int k1 = -n_; k1 <= n_; ++k1)
            for (int k2 = 0; k2 <= n_; ++k2) f.at(c, k1, k2) *= e_[idx(k1, k2)];
}

void LinearPart::add_phi(SpectralField& f, const SpectralField& g) const {
    for (int c = 0; c < f.components(); ++c)
        for (int k1 = -n_; k1 <= n_; ++k1)
            for (int k2 = 0; k2 <= n_; ++k2) f.at(c, k1, k2) += p_[idx(k1, k2)] * g.at(c, k1, k2);
}

namespace {

std::array<double, 3> wick_entries(const SolverConfig& cfg, double t) {
    if (!cfg.wick) return {0.0, 0.0, 0.0};
    const auto c = noise::wick_constant(cfg.N, cfg.nu, t, noise::Truncation::Square);
    return {c[0][0], c[0][1], c[1][1]};
}

}  // namespace

SpectralField step_v(const SpectralField& v, const SpectralField& z, const SolverConfig& cfg, double t) {
    if (v.cutoff() != cfg.N || z.cutoff() != cfg.N) throw SolverError("step_v: cutoff mismatch");
    LinearPart lin(cfg.N, cfg.nu, cfg.dt);
    SpectralField out = v;
    lin.apply_E(out);
    if (cfg.nonlinear) {
        Nonlinearity nl(cfg.N);
        SpectralField b;
        nl.apply(v + z, b, wick_entries(cfg, t));
        lin.add_phi(out, b);
    }
    if (!std::isfinite(max_abs(out))) throw SolverError("step_v: non-finite state (explosion)");
    return out;
}

// ---------------------------------------------------------------------------

double Monitor::value(const RealGrid& v1, const RealGrid& v2, int M, double t) const {
    const double sup = std::max(noise::sup_norm_grid(v1.data(), M), noise::sup_norm_grid(v2.data(), M));
    const double semi = std::max(noise::holder_seminorm_grid(v1.data(), M, beta),
                                 noise::holder_seminorm_grid(v2.data(), M, beta));
    return std::max(sup + semi, std::pow(t, rho) * sup);
}

Propagator::Propagator(const SolverConfig& cfg, const noise::NoiseRealization& xi)
    : cfg_(cfg), xi_(xi), nl_(cfg.N), lin_(cfg.N, cfg.nu, cfg.dt), ou_(cfg.N, cfg.nu, cfg.dt) {
    v_ = SpectralField(cfg.N);
    z_ = SpectralField(cfg.N);
    dW_ = SpectralField(cfg.N);
}

void Propagator::reset(const SpectralField& u0, const noise::NoiseRealization& xi) {
    if (xi.cutoff() != cfg_.N) throw SolverError("noise cutoff differs from the solver cutoff");
    if (std::abs(xi.dt() - cfg_.dt) > 1e-15 * cfg_.dt) throw SolverError("noise dt differs from the solver dt");
    xi_ = xi;
    v_ = u0.cutoff() == cfg_.N ? u0 : u0.resized(cfg_.N);
    if (v_.components() != 2) throw SolverError("initial condition must have 2 components");
    if (max_divergence(v_) > 1e-12 * std::max(norm(v_), 1e-300) || v_.at(0, 0, 0) != cplx{} || v_.at(1, 0, 0) != cplx{})
        throw SolverError("initial condition must be divergence free with zero mean");
    z_.set_zero();
    n_ = 0;
    r_ = 0.0;
    exploded_ = false;
    update_monitor(true);
}

void Propagator::update_monitor(bool full) {
    const double m = max_abs(v_);
    if (!std::isfinite(m)) {
        exploded_ = true;
        r_ = INFINITY;
        return;
    }
    if (full) {
        nl_.to_grid(v_, g1_, g2_);
        r_ = std::max(r_, mon_.value(g1_, g2_, nl_.grid(), time()));
    }
    if (r_ >= cfg_.R_max) exploded_ = true;
}

bool Propagator::step() { return step(std::span<SpectralField>{}); }

bool Propagator::step(std::span<SpectralField> tangents) {
    if (exploded_) return false;
    if (n_ >= xi_.steps()) throw SolverError("noise realisation exhausted");
    xi_.increment(n_, dW_);
    return advance(tangents);
}

bool Propagator::step_with(const SpectralField& dW, std::span<SpectralField> tangents) {
    if (exploded_) return false;
    if (!dW.same_shape(dW_)) throw SolverError("increment shape mismatch");
    dW_ = dW;
    return advance(tangents);
}

bool Propagator::advance(std::span<SpectralField> tangents) {
    for (auto& J : tangents)
        if (J.cutoff() != cfg_.N) throw SolverError("tangent: cutoff mismatch");
    if (cfg_.nonlinear) {
        u_ = v_;
        u_ += z_;
        nl_.apply(u_, b_, wick_entries(cfg_, time()));
        // the grid values of u_n are still held by nl_
        for (auto& J : tangents) {
            nl_.tangent_at_last(J, work_);
            lin_.apply_E(J);
            lin_.add_phi(J, work_);
        }
    } else {
        for (auto& J : tangents) lin_.apply_E(J);
    }
    lin_.apply_E(v_);
    if (cfg_.nonlinear) lin_.add_phi(v_, b_);
    ou_.step(z_, dW_);
    ++n_;
    const bool full = (n_ % cfg_.monitor_stride == 0) || n_ == xi_.steps();
    update_monitor(full);
    return !exploded_;
}

void Propagator::tangent_step(SpectralField& J) {
    if (J.cutoff() != cfg_.N) throw SolverError("tangent: cutoff mismatch");
    if (cfg_.nonlinear) {
        u_ = v_;
        u_ += z_;
        nl_.tangent(u_, J, work_);
    }
    lin_.apply_E(J);
    if (cfg_.nonlinear) lin_.add_phi(J, work_);
}

// ---------------------------------------------------------------------------

std::optional<SpectralField> Trajectory::final_state() const {
    if (exploded() || u.empty()) return std::nullopt;
    return u.back();
}

std::optional<SpectralField> Trajectory::state_at_step(int n) const {
    if (exploded() && n >= steps_done) return std::nullopt;
    const double t = n * cfg.dt;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - t) <= 1e-9 * cfg.dt) return u[i];
    return std::nullopt;
}

Trajectory solve(const SpectralField& u0, const noise::NoiseRealization& xi, const SolverConfig& cfg) {
    cfg.validate();
    const int steps = cfg.steps();
    if (xi.steps() < steps) throw SolverError("noise realisation shorter than the horizon");
    Trajectory tr;
    tr.cfg = cfg;
    tr.xi = xi;
    Propagator p(cfg, xi);
    p.reset(u0, xi);
    auto record = [&](int n) {
        tr.times.push_back(n * cfg.dt);
        tr.v.push_back(p.v());
        tr.z.push_back(p.z());
        tr.u.push_back(p.u());
    };
    auto log_monitor = [&] {
        tr.r.push_back(p.monitor());
        tr.r_times.push_back(p.time());
        tr.energy.push_back(0.5 * kTwoPi * kTwoPi * [&] {
            const SpectralField u = p.u();
            return inner(u, u);
        }());
    };
    record(0);
    log_monitor();
    if (p.exploded()) {
        tr.status = Status::Exploded;
        tr.t_explode = 0.0;
        tr.u.clear(), tr.v.clear(), tr.z.clear(), tr.times.clear();
        return tr;
    }
    for (int n = 0; n < steps; ++n) {
        const bool ok = p.step();
        log_monitor();
        tr.steps_done = n + 1;
        if (!ok) {
            tr.status = Status::Exploded;
            tr.t_explode = p.time();
            tr.energy.back() = INFINITY;
            return tr;
        }
        const int m = n + 1;
        if ((cfg.snapshot_stride > 0 && m % cfg.snapshot_stride == 0) || m == steps) record(m);
    }
    return tr;
}

SpectralField jacobian_apply(const Trajectory& traj, const SpectralField& v0, double s, double t) {
    const SolverConfig& cfg = traj.cfg;
    const double ns_d = s / cfg.dt, nt_d = t / cfg.dt;
    const int ns = static_cast<int>(std::lround(ns_d)), nt = static_cast<int>(std::lround(nt_d));
    if (std::abs(ns_d - ns) > 1e-9 || std::abs(nt_d - nt) > 1e-9) throw SolverError("jacobian_apply: s and t must lie on the time grid");
    if (ns < 0 || nt < ns) throw SolverError("jacobian_apply: need 0 <= s <= t");
    if (traj.exploded() && nt >= traj.steps_done) throw SolverError("jacobian_apply: trajectory exploded before t");
    if (nt > traj.steps_done) throw SolverError("jacobian_apply: t beyond the trajectory");
    if (cfg.snapshot_stride != 1 || traj.u.size() != static_cast<std::size_t>(traj.steps_done) + 1)
        throw SolverError("jacobian_apply: trajectory must store every step (snapshot_stride = 1)");
    if (v0.cutoff() != cfg.N || v0.components() != 2) throw SolverError("jacobian_apply: direction shape mismatch");
    SpectralField J = v0;
    LinearPart lin(cfg.N, cfg.nu, cfg.dt);
    Nonlinearity nl(cfg.N);
    SpectralField w;
    for (int n = ns; n < nt; ++n) {
        if (cfg.nonlinear) nl.tangent(traj.u[static_cast<std::size_t>(n)], J, w);
        lin.apply_E(J);
        if (cfg.nonlinear) lin.add_phi(J, w);
    }
    return J;
}

std::vector<double> explosion_radius(const Trajectory& traj) {
    std::vector<double> r = traj.r;
    if (traj.exploded() && (r.empty() || std::isfinite(r.back()))) r.push_back(INFINITY);
    return r;
}

}  // namespace sns::solver
