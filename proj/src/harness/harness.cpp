#include "sns/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace sns::harness {

using solver::Propagator;
using spectral::cplx;

namespace {

constexpr double kPi = std::numbers::pi;
// sub-stream tags for initial data, disjoint from the noise streams
constexpr std::uint64_t kInitialTag = 0x1d1d;
constexpr std::uint64_t kAdversarialStream = ~0ull;

double square(double x) { return x * x; }

SpectralField fit(const SpectralField& f, int N) { return f.cutoff() == N ? f : f.resized(N); }

SolverConfig with_horizon(SolverConfig cfg, double T) {
    cfg.T = T;
    return cfg;
}

// per-worker propagators, built lazily
struct Workers {
    Workers(const SolverConfig& cfg, int threads, int per_worker)
        : cfg(cfg), slots(static_cast<std::size_t>(threads)) {
        for (auto& s : slots) s.resize(static_cast<std::size_t>(per_worker));
    }
    Propagator& get(int worker, int k, const noise::NoiseRealization& xi) {
        auto& p = slots[static_cast<std::size_t>(worker)][static_cast<std::size_t>(k)];
        if (!p) p = std::make_unique<Propagator>(cfg, xi);
        return *p;
    }
    SolverConfig cfg;
    std::vector<std::vector<std::unique_ptr<Propagator>>> slots;
};

std::optional<SpectralField> final_or_cemetery(const Propagator& p) {
    if (p.exploded()) return std::nullopt;
    return p.u();
}

void parallel_for_workers(int n, int threads, const std::function<void(int, int)>& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i, w);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

void check_divergence_free(const SpectralField& f, const char* what) {
    if (f.components() != 2) throw HarnessError(std::string(what) + ": need a 2-component field");
    if (max_divergence(f) > 1e-12 * std::max(norm(f), 1e-300))
        throw HarnessError(std::string(what) + ": field is not divergence free");
}

// mean and standard error over independent per-path values
struct MeanSe {
    double mean = 0.0, se = 0.0;
};
MeanSe mean_se(std::span<const double> x, int batches) {
    const Estimate e = batch_estimate(x, batches);
    return {e.value, e.se};
}

}  // namespace

// ---------------------------------------------------------------------------

double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Observable Observable::smoothed_indicator(ModeBand band, SpectralField center, double radius, double width) {
    if (!(width >= 0.0)) throw HarnessError("smoothed indicator: width must be >= 0");
    if (!(radius >= 0.0)) throw HarnessError("smoothed indicator: radius must be >= 0");
    if (band.kmin < 0 || band.kmax < band.kmin) throw HarnessError("smoothed indicator: bad mode band");
    Observable o;
    o.kind_ = Kind::SmoothedIndicator;
    o.bound_ = 1.0;
    o.band_ = band;
    o.center_ = std::move(center);
    o.radius_ = radius;
    o.width_ = width;
    return o;
}

Observable Observable::cylinder(std::vector<SpectralField> directions, PostMap f, double bound) {
    if (!f) throw HarnessError("cylinder observable: missing post map");
    if (!(bound >= 0.0) || !std::isfinite(bound)) throw HarnessError("cylinder observable: bound must be finite");
    Observable o;
    o.kind_ = Kind::BoundedCylinder;
    o.bound_ = bound;
    o.dirs_ = std::move(directions);
    o.f_ = std::move(f);
    return o;
}

Observable Observable::constant(double c) {
    return cylinder({}, [c](std::span<const double>) { return c; }, std::abs(c));
}

double Observable::operator()(const SpectralField& u) const {
    if (kind_ == Kind::SmoothedIndicator) {
        const int N = u.cutoff();
        double s = 0.0;
        for (int c = 0; c < u.components(); ++c)
            spectral::for_each_stored_mode(N, [&](int k1, int k2, int w) {
                if (!band_.contains(k1, k2)) return;
                s += w * std::norm(u.at(c, k1, k2) - center_.coef(c, k1, k2));
            });
        const double d = std::sqrt(s);
        if (width_ == 0.0) return d <= radius_ ? 1.0 : 0.0;
        return logistic((radius_ - d) / width_);
    }
    std::vector<double> y(dirs_.size());
    for (std::size_t j = 0; j < dirs_.size(); ++j) y[j] = inner(u, fit(dirs_[j], u.cutoff()));
    const double v = f_(y);
    if (!(std::abs(v) <= bound_ * (1.0 + 1e-12))) throw HarnessError("observable exceeds its declared bound");
    return v;
}

std::string Observable::describe() const {
    std::ostringstream os;
    if (kind_ == Kind::SmoothedIndicator)
        os << "smoothed-indicator(band=" << band_.kmin << ".." << band_.kmax << ", radius=" << radius_
           << ", width=" << width_ << ")";
    else
        os << "bounded-cylinder(projections=" << dirs_.size() << ", bound=" << bound_ << ")";
    return os.str();
}

// ---------------------------------------------------------------------------

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : static_cast<int>(h);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    parallel_for_workers(n, resolve_threads(threads), [&](int i, int) { fn(i); });
}

Estimate batch_estimate(std::span<const double> x, int batches) {
    Estimate e;
    const std::size_t n = x.size();
    e.n_paths = static_cast<int>(n);
    if (n == 0) return e;
    double s = 0.0;
    for (double v : x) s += v;
    e.value = s / static_cast<double>(n);
    if (n > 1) {
        double q = 0.0;
        for (double v : x) q += square(v - e.value);
        e.pooled_stderr = std::sqrt(q / static_cast<double>(n - 1) / static_cast<double>(n));
    }
    const std::size_t B = std::min<std::size_t>(static_cast<std::size_t>(std::max(batches, 1)), n);
    e.batches = static_cast<int>(B);
    if (B < 2) {
        e.se = e.pooled_stderr;
        return e;
    }
    std::vector<double> means(B);
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t lo = b * n / B, hi = (b + 1) * n / B;
        double m = 0.0;
        for (std::size_t i = lo; i < hi; ++i) m += x[i];
        means[b] = m / static_cast<double>(hi - lo);
    }
    double mm = 0.0;
    for (double m : means) mm += m;
    mm /= static_cast<double>(B);
    double q = 0.0;
    for (double m : means) q += square(m - mm);
    e.se = std::sqrt(q / static_cast<double>(B - 1) / static_cast<double>(B));
    return e;
}

int step_of(double t, const SolverConfig& cfg) {
    if (!(t >= 0.0)) throw HarnessError("time must be non-negative");
    const double x = t / cfg.dt;
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9 * std::max(1.0, x)) throw HarnessError("time is not on the step grid");
    if (t > cfg.T * (1.0 + 1e-12)) throw HarnessError("time exceeds the configured horizon T");
    return static_cast<int>(r);
}

noise::NoiseRealization path_noise(const SolverConfig& cfg, int steps, const McOptions& mc, int path) {
    return noise::sample_white_noise(cfg.N, cfg.dt, std::max(steps, 1), mc.seed,
                                     mc.stream_offset + static_cast<std::uint64_t>(path));
}

// ---------------------------------------------------------------------------

Estimate estimate_semigroup(const Observable& psi, const SpectralField& u0, double t, int n_paths,
                            const SolverConfig& cfg, const McOptions& mc, std::vector<double>* samples) {
    cfg.validate();
    if (n_paths < 1) throw HarnessError("need at least one path");
    const int n = step_of(t, cfg);
    const SpectralField x0 = fit(u0, cfg.N);
    check_divergence_free(x0, "estimate_semigroup");
    std::vector<double> vals(static_cast<std::size_t>(n_paths));
    std::vector<char> exploded(static_cast<std::size_t>(n_paths), 0);
    if (n == 0) {
        std::fill(vals.begin(), vals.end(), psi(x0));
    } else {
        const int threads = resolve_threads(mc.threads);
        Workers W(cfg, threads, 1);
        parallel_for_workers(n_paths, threads, [&](int i, int w) {
            auto xi = path_noise(cfg, n, mc, i);
            Propagator& p = W.get(w, 0, xi);
            p.reset(x0, xi);
            for (int m = 0; m < n && p.step(); ++m) {
            }
            exploded[static_cast<std::size_t>(i)] = p.exploded();
            vals[static_cast<std::size_t>(i)] = psi(final_or_cemetery(p));
        });
    }
    Estimate e = batch_estimate(vals, mc.batches);
    if (n == 0) e.se = e.pooled_stderr = 0.0;
    e.n_exploded = static_cast<int>(std::count(exploded.begin(), exploded.end(), 1));
    if (samples) *samples = std::move(vals);
    return e;
}

// ---------------------------------------------------------------------------

void apply_inverse_forcing(const noise::OUStepper& ou, const SpectralField& f, SpectralField& out) {
    const int N = ou.cutoff();
    if (f.cutoff() != N) throw HarnessError("inverse forcing: cutoff mismatch");
    if (!out.same_shape(f)) out = SpectralField(N, f.components());
    for (int c = 0; c < f.components(); ++c)
        for (int k1 = -N; k1 <= N; ++k1)
            for (int k2 = 0; k2 <= N; ++k2) {
                if (k1 == 0 && k2 == 0) {
                    out.at(c, 0, 0) = cplx{};
                    continue;
                }
                out.at(c, k1, k2) = f.at(c, k1, k2) / ou.noise_scale(k1, k2);
            }
}

noise::Shift build_control(const solver::Trajectory& traj, const SpectralField& v0, double t) {
    const SolverConfig& cfg = traj.cfg;
    const int n = step_of(t, cfg);
    if (n == 0) throw HarnessError("build_control: t must be positive");
    if (traj.exploded() && n >= traj.steps_done) throw HarnessError("build_control: trajectory exploded before t");
    if (cfg.snapshot_stride != 1 || traj.u.size() < static_cast<std::size_t>(n) + 1)
        throw HarnessError("build_control: trajectory must store every step up to t");
    const SpectralField d0 = fit(v0, cfg.N);
    check_divergence_free(d0, "build_control");
    noise::Shift h(cfg.N, cfg.dt, n, traj.xi.first_step());
    solver::LinearPart lin(cfg.N, cfg.nu, cfg.dt);
    solver::Nonlinearity nl(cfg.N);
    noise::OUStepper ou(cfg.N, cfg.nu, cfg.dt);
    SpectralField J = d0, w, g;
    for (int m = 0; m < n; ++m) {
        // J_{0,m+1} from J_{0,m} along u_m, the arithmetic of jacobian_apply
        if (cfg.nonlinear) nl.tangent(traj.u[static_cast<std::size_t>(m)], J, w);
        lin.apply_E(J);
        if (cfg.nonlinear) lin.add_phi(J, w);
        apply_inverse_forcing(ou, J, g);
        g *= -1.0 / t;
        h.h[static_cast<std::size_t>(m)] = g;
    }
    h.divergence_free = true;
    return h;
}

double control_residual(const solver::Trajectory& traj, const noise::Shift& h, const SpectralField& v0, double t) {
    const SolverConfig& cfg = traj.cfg;
    const int n = step_of(t, cfg);
    if (h.steps() < n) throw HarnessError("control_residual: shift shorter than the horizon");
    noise::OUStepper ou(cfg.N, cfg.nu, cfg.dt);
    SpectralField total = solver::jacobian_apply(traj, fit(v0, cfg.N), 0.0, t);
    const double ref = norm(total);
    SpectralField f;
    for (int m = 0; m < n; ++m) {
        SpectralField hd = h.h[static_cast<std::size_t>(m)];
        hd *= cfg.dt;
        ou.forcing(hd, f);
        total += solver::jacobian_apply(traj, f, (m + 1) * cfg.dt, t);
    }
    return norm(total) / std::max(ref, 1e-300);
}

// ---------------------------------------------------------------------------

GradientEstimate bel_gradient(const Observable& psi, const SpectralField& u0, const SpectralField& v0, double t,
                              int n_paths, const SolverConfig& cfg, const McOptions& mc, std::vector<double>* samples,
                              std::vector<double>* values) {
    cfg.validate();
    if (n_paths < 1) throw HarnessError("need at least one path");
    const int n = step_of(t, cfg);
    if (n == 0) throw HarnessError("bel_gradient: t must be positive");
    const SpectralField x0 = fit(u0, cfg.N), d0 = fit(v0, cfg.N);
    check_divergence_free(x0, "bel_gradient");
    check_divergence_free(d0, "bel_gradient");
    std::vector<double> vals(static_cast<std::size_t>(n_paths));
    std::vector<char> exploded(static_cast<std::size_t>(n_paths), 0);
    if (values) values->assign(static_cast<std::size_t>(n_paths), 0.0);
    const int threads = resolve_threads(mc.threads);
    Workers W(cfg, threads, 1);
    parallel_for_workers(n_paths, threads, [&](int i, int w) {
        auto xi = path_noise(cfg, n, mc, i);
        Propagator& p = W.get(w, 0, xi);
        p.reset(x0, xi);
        std::vector<SpectralField> J{d0};
        SpectralField g;
        double weight = 0.0;
        for (int m = 0; m < n; ++m) {
            if (!p.step(J)) break;
            apply_inverse_forcing(p.ou(), J[0], g);
            weight += inner(g, p.last_increment());
        }
        exploded[static_cast<std::size_t>(i)] = p.exploded();
        vals[static_cast<std::size_t>(i)] = p.exploded() ? 0.0 : psi(p.u()) * weight / t;
        if (values) (*values)[static_cast<std::size_t>(i)] = psi(final_or_cemetery(p));
    });
    const Estimate e = batch_estimate(vals, mc.batches);
    GradientEstimate g;
    g.value = e.value;
    g.se = e.se;
    g.n_paths = n_paths;
    g.n_exploded = static_cast<int>(std::count(exploded.begin(), exploded.end(), 1));
    g.method = GradientMethod::BEL;
    if (samples) *samples = std::move(vals);
    return g;
}

GradientEstimate fd_gradient(const Observable& psi, const SpectralField& u0, const SpectralField& v0, double t,
                             double eps, int n_paths, const SolverConfig& cfg, const McOptions& mc,
                             std::vector<double>* samples) {
    cfg.validate();
    if (n_paths < 1) throw HarnessError("need at least one path");
    if (!(eps > 0.0)) throw HarnessError("fd_gradient: eps must be positive");
    const int n = step_of(t, cfg);
    const SpectralField x0 = fit(u0, cfg.N), d0 = fit(v0, cfg.N);
    check_divergence_free(x0, "fd_gradient");
    check_divergence_free(d0, "fd_gradient");
    const SpectralField xp = x0 + eps * d0, xm = x0 - eps * d0;
    std::vector<double> vals(static_cast<std::size_t>(n_paths));
    std::vector<char> exploded(static_cast<std::size_t>(n_paths), 0);
    const int threads = resolve_threads(mc.threads);
    Workers W(cfg, threads, 2);
    parallel_for_workers(n_paths, threads, [&](int i, int w) {
        auto xi = path_noise(cfg, n, mc, i);
        Propagator& a = W.get(w, 0, xi);
        Propagator& b = W.get(w, 1, xi);
        a.reset(xp, xi);
        b.reset(xm, xi);
        for (int m = 0; m < n; ++m) {
            a.step();
            b.step_with(a.last_increment());
        }
        exploded[static_cast<std::size_t>(i)] = a.exploded() || b.exploded();
        vals[static_cast<std::size_t>(i)] = (psi(final_or_cemetery(a)) - psi(final_or_cemetery(b))) / (2.0 * eps);
    });
    const Estimate e = batch_estimate(vals, mc.batches);
    GradientEstimate g;
    g.value = e.value;
    g.se = e.se;
    g.n_paths = n_paths;
    g.n_exploded = static_cast<int>(std::count(exploded.begin(), exploded.end(), 1));
    g.method = GradientMethod::FiniteDifference;
    if (samples) *samples = std::move(vals);
    return g;
}

GradientComparison gradient_comparison(const Observable& psi, const SpectralField& u0, const SpectralField& v0,
                                       double t, double eps, int n_paths, const SolverConfig& cfg,
                                       const McOptions& mc) {
    cfg.validate();
    if (n_paths < 1) throw HarnessError("need at least one path");
    if (!(eps > 0.0)) throw HarnessError("gradient_comparison: eps must be positive");
    const int n = step_of(t, cfg);
    if (n == 0) throw HarnessError("gradient_comparison: t must be positive");
    const SpectralField x0 = fit(u0, cfg.N), d0 = fit(v0, cfg.N);
    check_divergence_free(x0, "gradient_comparison");
    check_divergence_free(d0, "gradient_comparison");
    const SpectralField xp = x0 + eps * d0;
    GradientComparison out;
    out.eps = eps;
    out.bel_samples.assign(static_cast<std::size_t>(n_paths), 0.0);
    out.fd_samples.assign(static_cast<std::size_t>(n_paths), 0.0);
    std::vector<char> ex_a(static_cast<std::size_t>(n_paths), 0), ex_b(static_cast<std::size_t>(n_paths), 0);
    const int threads = resolve_threads(mc.threads);
    Workers W(cfg, threads, 2);
    parallel_for_workers(n_paths, threads, [&](int i, int w) {
        auto xi = path_noise(cfg, n, mc, i);
        Propagator& a = W.get(w, 0, xi);
        Propagator& b = W.get(w, 1, xi);
        a.reset(x0, xi);
        b.reset(xp, xi);
        std::vector<SpectralField> J{d0};
        SpectralField g;
        double weight = 0.0;
        for (int m = 0; m < n; ++m) {
            const bool alive = a.step(J);
            if (alive) {
                apply_inverse_forcing(a.ou(), J[0], g);
                weight += inner(g, a.last_increment());
            }
            b.step_with(a.last_increment());
        }
        const auto ua = final_or_cemetery(a);
        const double pa = psi(ua);
        ex_a[static_cast<std::size_t>(i)] = a.exploded();
        ex_b[static_cast<std::size_t>(i)] = b.exploded();
        out.bel_samples[static_cast<std::size_t>(i)] = ua ? pa * weight / t : 0.0;
        out.fd_samples[static_cast<std::size_t>(i)] = (psi(final_or_cemetery(b)) - pa) / eps;
    });
    const Estimate eb = batch_estimate(out.bel_samples, mc.batches), ef = batch_estimate(out.fd_samples, mc.batches);
    out.bel = {eb.value, eb.se, n_paths, static_cast<int>(std::count(ex_a.begin(), ex_a.end(), 1)), GradientMethod::BEL};
    out.fd = {ef.value, ef.se, n_paths, static_cast<int>(std::count(ex_b.begin(), ex_b.end(), 1)),
              GradientMethod::FiniteDifference};
    out.relative_deviation = std::abs(out.bel.value - out.fd.value) / std::max(std::abs(out.fd.value), 1e-300);
    return out;
}

LinearGaussianOracle linear_gaussian_oracle(const Observable& psi, const SpectralField& u0, const SpectralField& v0,
                                            double t, const SolverConfig& cfg) {
    if (cfg.nonlinear) throw HarnessError("linear oracle: the nonlinearity must be disabled");
    if (psi.kind() != Observable::Kind::BoundedCylinder || psi.directions().size() != 1)
        throw HarnessError("linear oracle: needs a cylinder observable with one projection");
    const int n = step_of(t, cfg);
    const int N = cfg.N;
    const SpectralField e = fit(psi.directions()[0], N), x0 = fit(u0, N), d0 = fit(v0, N);
    check_divergence_free(e, "linear oracle");
    noise::OUStepper ou(N, cfg.nu, cfg.dt);
    double mean = 0.0, slope = 0.0, var = 0.0;
    for (int c = 0; c < 2; ++c)
        spectral::for_each_stored_mode(N, [&](int k1, int k2, int w) {
            if (k1 == 0 && k2 == 0) return;
            const double E = ou.decay(k1, k2), s = ou.noise_scale(k1, k2);
            const double En = std::pow(E, n);
            const cplx ek = e.at(c, k1, k2);
            mean += w * En * (std::conj(x0.at(c, k1, k2)) * ek).real();
            slope += w * En * (std::conj(d0.at(c, k1, k2)) * ek).real();
            // sum_{j<n} E^{2j}
            const double geo = E < 1.0 ? -std::expm1(2.0 * n * std::log(E)) / (-std::expm1(2.0 * std::log(E))) : n;
            var += cfg.dt * w * s * s * geo * std::norm(ek);
        });
    LinearGaussianOracle o;
    o.mean = mean;
    o.sd = std::sqrt(var);
    const auto& f = psi.post_map();
    auto F = [&](double x) {
        const double y = mean + o.sd * x;
        return f(std::span<const double>(&y, 1));
    };
    // Simpson on [-12, 12]
    const int m = 4800;
    const double a = -12.0, hstep = 24.0 / m;
    double s0 = 0.0, s1 = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double x = a + i * hstep;
        const double wgt = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
        const double fx = F(x);
        s0 += wgt * fx * phi;
        s1 += wgt * fx * x * phi;
    }
    o.value = s0 * hstep / 3.0;
    if (o.sd > 0.0) o.gradient = slope * (s1 * hstep / 3.0) / o.sd;
    return o;
}

// ---------------------------------------------------------------------------

FellerReport strong_feller_probe(const SpectralField& x, const std::vector<SpectralField>& ys,
                                 const std::vector<Observable>& family, double t, int n_paths,
                                 const SolverConfig& cfg, const McOptions& mc, double eta) {
    cfg.validate();
    if (ys.empty() || family.empty()) throw HarnessError("strong_feller_probe: need points and observables");
    if (n_paths < 1) throw HarnessError("need at least one path");
    const int n = step_of(t, cfg);
    const int N = cfg.N;
    const SpectralField x0 = fit(x, N);
    check_divergence_free(x0, "strong_feller_probe");
    const std::size_t P = ys.size(), F = family.size();
    std::vector<SpectralField> y0(P), dir(P);
    for (std::size_t i = 0; i < P; ++i) {
        y0[i] = fit(ys[i], N);
        check_divergence_free(y0[i], "strong_feller_probe");
        dir[i] = y0[i] - x0;
    }
    // collinear directions share one tangent: dir[i] = scale[i] * dir[base[i]]
    std::vector<int> base(P, -1), tangent_of(P, -1);
    std::vector<double> scale(P, 1.0);
    std::vector<SpectralField> tangents0;
    for (std::size_t i = 0; i < P; ++i) {
        for (std::size_t b = 0; b < i && base[i] < 0; ++b) {
            if (base[b] != static_cast<int>(b)) continue;
            const double dd = inner(dir[b], dir[b]);
            if (dd == 0.0) continue;
            const double c = inner(dir[i], dir[b]) / dd;
            if (norm(dir[i] - c * dir[b]) <= 1e-12 * std::max(norm(dir[i]), 1e-300)) {
                base[i] = static_cast<int>(b);
                scale[i] = c;
            }
        }
        if (base[i] < 0) {
            base[i] = static_cast<int>(i);
            tangent_of[i] = static_cast<int>(tangents0.size());
            tangents0.push_back(dir[i]);
        }
    }
    // per path: psi_j(x), then per point psi_j(y_i), then per tangent the BEL weight
    const std::size_t T0 = tangents0.size();
    const std::size_t stride = F + P * F + T0;
    std::vector<double> rec(static_cast<std::size_t>(n_paths) * stride, 0.0);
    std::vector<int> nexp(static_cast<std::size_t>(n_paths), 0);
    const int threads = resolve_threads(mc.threads);
    Workers W(cfg, threads, static_cast<int>(P) + 1);
    parallel_for_workers(n_paths, threads, [&](int i, int w) {
        auto xi = path_noise(cfg, n, mc, i);
        Propagator& px = W.get(w, 0, xi);
        px.reset(x0, xi);
        std::vector<Propagator*> py(P);
        for (std::size_t k = 0; k < P; ++k) {
            py[k] = &W.get(w, static_cast<int>(k) + 1, xi);
            py[k]->reset(y0[k], xi);
        }
        std::vector<SpectralField> J = tangents0;
        std::vector<double> weight(T0, 0.0);
        SpectralField g;
        for (int m = 0; m < n; ++m) {
            if (px.step(J)) {
                for (std::size_t k = 0; k < T0; ++k) {
                    apply_inverse_forcing(px.ou(), J[k], g);
                    weight[k] += inner(g, px.last_increment());
                }
            }
            for (auto* q : py) q->step_with(px.last_increment());
        }
        double* r = rec.data() + static_cast<std::size_t>(i) * stride;
        const auto ux = final_or_cemetery(px);
        for (std::size_t j = 0; j < F; ++j) r[j] = family[j](ux);
        for (std::size_t k = 0; k < P; ++k) {
            const auto uy = final_or_cemetery(*py[k]);
            for (std::size_t j = 0; j < F; ++j) r[F + k * F + j] = family[j](uy);
        }
        for (std::size_t k = 0; k < T0; ++k) r[F + P * F + k] = ux ? weight[k] / t : 0.0;
        int e = px.exploded();
        for (auto* q : py) e += q->exploded();
        nexp[static_cast<std::size_t>(i)] = e;
    });

    FellerReport rep;
    rep.t = t;
    rep.n_paths = n_paths;
    for (int e : nexp) rep.n_exploded += e;
    rep.explosion_fraction = double(rep.n_exploded) / (double(n_paths) * double(P + 1));
    rep.inconclusive = rep.explosion_fraction > 0.01;
    rep.digest_samples = rec;
    std::vector<double> buf(static_cast<std::size_t>(n_paths));
    for (std::size_t k = 0; k < P; ++k) {
        FellerPoint pt;
        pt.distance_eta = noise::holder_norm(dir[k], eta);
        pt.distance_l2 = norm(dir[k]);
        pt.gap = -1.0;
        for (std::size_t j = 0; j < F; ++j) {
            for (int i = 0; i < n_paths; ++i) {
                const double* r = rec.data() + static_cast<std::size_t>(i) * stride;
                buf[static_cast<std::size_t>(i)] = r[F + k * F + j] - r[j];
            }
            const MeanSe gap = mean_se(buf, mc.batches);
            if (std::abs(gap.mean) > pt.gap) {
                pt.gap = std::abs(gap.mean);
                pt.gap_stderr = gap.se;
                pt.argmax = static_cast<int>(j);
            }
            const std::size_t tk = static_cast<std::size_t>(tangent_of[static_cast<std::size_t>(base[k])]);
            for (int i = 0; i < n_paths; ++i) {
                const double* r = rec.data() + static_cast<std::size_t>(i) * stride;
                buf[static_cast<std::size_t>(i)] = scale[k] * r[j] * r[F + P * F + tk];
            }
            const MeanSe b = mean_se(buf, mc.batches);
            if (std::abs(b.mean) >= pt.bound) {
                pt.bound = std::abs(b.mean);
                pt.bound_stderr = b.se;
            }
        }
        pt.within_bound = pt.gap <= pt.bound + 3.0 * std::hypot(pt.gap_stderr, pt.bound_stderr);
        rep.points.push_back(pt);
    }
    rep.monotone = true;
    for (std::size_t k = 1; k < P; ++k) {
        const auto &a = rep.points[k - 1], &b = rep.points[k];
        if (b.gap > a.gap + 3.0 * std::hypot(a.gap_stderr, b.gap_stderr)) rep.monotone = false;
    }
    rep.pass = !rep.inconclusive && rep.monotone &&
               std::all_of(rep.points.begin(), rep.points.end(), [](const FellerPoint& p) { return p.within_bound; });
    return rep;
}

// ---------------------------------------------------------------------------

double stationary_mode_variance(double nu, int k1, int k2) {
    const double q = double(k1 * k1 + k2 * k2);
    if (q == 0.0) return 0.0;
    return 1.0 / (8.0 * kPi * kPi * nu * q);
}

namespace {

std::vector<std::pair<int, int>> representatives(int N, const ModeBand& band) {
    std::vector<std::pair<int, int>> out;
    for (const auto& k : spectral::shell_order(N))
        if (band.contains(k.first, k.second)) out.push_back(k);
    return out;
}

double mode_energy(const SpectralField& u, int k1, int k2) {
    double s = 0.0;
    for (int c = 0; c < u.components(); ++c) s += std::norm(u.at(c, k1, k2));
    return s;
}

}  // namespace

StokesReport stokes_invariance(int N, double nu, double dt, double burn_in, double window, int sample_stride,
                               int n_paths, const McOptions& mc) {
    if (N < 1 || !(nu > 0.0) || !(dt > 0.0)) throw HarnessError("stokes_invariance: bad parameters");
    if (sample_stride < 1 || n_paths < 2) throw HarnessError("stokes_invariance: bad sampling parameters");
    const int nb = static_cast<int>(std::lround(burn_in / dt));
    const int nw = static_cast<int>(std::lround(window / dt));
    const int ns = nw / sample_stride;
    if (ns < 2) throw HarnessError("stokes_invariance: window too short for the sampling stride");
    const auto reps = representatives(N, ModeBand{1, N});
    const std::size_t K = reps.size();
    std::vector<double> sigma(K);
    for (std::size_t k = 0; k < K; ++k) sigma[k] = stationary_mode_variance(nu, reps[k].first, reps[k].second);
    // per path: per-mode window mean, then pooled first/second half
    const std::size_t stride = K + 2;
    std::vector<double> rec(static_cast<std::size_t>(n_paths) * stride, 0.0);
    SolverConfig cfg;
    cfg.N = N;
    cfg.nu = nu;
    cfg.dt = dt;
    parallel_for(n_paths, mc.threads, [&](int i) {
        auto xi = path_noise(cfg, nb + nw, mc, i);
        noise::OUStepper ou(N, nu, dt);
        SpectralField z(N), dW(N);
        double* r = rec.data() + static_cast<std::size_t>(i) * stride;
        int taken = 0;
        for (int m = 0; m < nb + nw; ++m) {
            xi.increment(m, dW);
            ou.step(z, dW);
            const int w = m + 1 - nb;
            if (w <= 0 || w % sample_stride != 0 || taken >= ns) continue;
            double pooled = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double a = mode_energy(z, reps[k].first, reps[k].second) / sigma[k];
                r[k] += a;
                pooled += a;
            }
            r[K + (taken < ns / 2 ? 0 : 1)] += pooled / double(K);
            ++taken;
        }
        for (std::size_t k = 0; k < K; ++k) r[k] /= ns;
        r[K] /= ns / 2;
        r[K + 1] /= ns - ns / 2;
    });
    StokesReport rep;
    rep.samples = static_cast<long long>(n_paths) * ns;
    rep.digest_samples = rec;
    std::vector<double> buf(static_cast<std::size_t>(n_paths));
    for (std::size_t k = 0; k < K; ++k) {
        for (int i = 0; i < n_paths; ++i) buf[static_cast<std::size_t>(i)] = rec[static_cast<std::size_t>(i) * stride + k];
        const MeanSe m = mean_se(buf, mc.batches);
        rep.ratios.push_back({reps[k].first, reps[k].second, m.mean, m.se, 1.0});
        rep.max_deviation = std::max(rep.max_deviation, std::abs(m.mean - 1.0));
    }
    for (int i = 0; i < n_paths; ++i)
        buf[static_cast<std::size_t>(i)] =
            rec[static_cast<std::size_t>(i) * stride + K + 1] - rec[static_cast<std::size_t>(i) * stride + K];
    const MeanSe d = mean_se(buf, mc.batches);
    rep.trend_z = d.se > 0 ? d.mean / d.se : 0.0;
    rep.trend = std::abs(rep.trend_z) > 3.0;
    return rep;
}

InvarianceReport nonlinear_invariance(const SolverConfig& cfg, int n_paths, ModeBand band, const McOptions& mc) {
    cfg.validate();
    if (n_paths < 2) throw HarnessError("nonlinear_invariance: need at least two paths");
    const int n = cfg.steps();
    const int N = cfg.N;
    const auto reps = representatives(N, band);
    if (reps.empty()) throw HarnessError("nonlinear_invariance: empty mode band");
    const std::size_t K = reps.size();
    std::vector<double> sigma(K);
    for (std::size_t k = 0; k < K; ++k) sigma[k] = stationary_mode_variance(cfg.nu, reps[k].first, reps[k].second);
    // per path: a0[K], aT[K], kurtosis terms (x^4 - 3 averaged over 2K coordinates), exploded
    const std::size_t stride = 2 * K + 2;
    std::vector<double> rec(static_cast<std::size_t>(n_paths) * stride, 0.0);
    const std::uint64_t init_seed = derive_seed(mc.seed, {kInitialTag});
    const int threads = resolve_threads(mc.threads);
    Workers W(cfg, threads, 1);
    parallel_for_workers(n_paths, threads, [&](int i, int w) {
        auto xi = path_noise(cfg, n, mc, i);
        const SpectralField u0 =
            noise::sample_stationary(N, cfg.nu, init_seed, mc.stream_offset + static_cast<std::uint64_t>(i));
        Propagator& p = W.get(w, 0, xi);
        p.reset(u0, xi);
        for (int m = 0; m < n && p.step(); ++m) {
        }
        double* r = rec.data() + static_cast<std::size_t>(i) * stride;
        double kurt = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const auto [k1, k2] = reps[k];
            r[k] = mode_energy(u0, k1, k2) / sigma[k];
            // scalar coefficient along k-perp: Re and Im each N(0, sigma/2)
            const double q = std::hypot(double(k1), double(k2));
            const cplx a = (-double(k2) * u0.at(0, k1, k2) + double(k1) * u0.at(1, k1, k2)) / q;
            const double s = std::sqrt(sigma[k] / 2.0);
            kurt += std::pow(a.real() / s, 4) - 3.0 + std::pow(a.imag() / s, 4) - 3.0;
        }
        r[2 * K] = kurt / double(2 * K);
        if (p.exploded()) {
            r[2 * K + 1] = 1.0;
            return;
        }
        const SpectralField uT = p.u();
        for (std::size_t k = 0; k < K; ++k) r[K + k] = mode_energy(uT, reps[k].first, reps[k].second) / sigma[k];
    });
    InvarianceReport rep;
    rep.band = band;
    rep.n_paths = n_paths;
    rep.digest_samples = rec;
    // exploded paths carry no state at T; they are counted and left out
    std::vector<int> alive;
    for (int i = 0; i < n_paths; ++i) {
        if (rec[static_cast<std::size_t>(i) * stride + 2 * K + 1] != 0.0) ++rep.n_exploded;
        else alive.push_back(i);
    }
    if (alive.size() < 2) throw HarnessError("nonlinear_invariance: too many explosions");
    const std::size_t A = alive.size();
    auto col = [&](auto fn) {
        std::vector<double> b(A);
        for (std::size_t j = 0; j < A; ++j) b[j] = fn(rec.data() + static_cast<std::size_t>(alive[j]) * stride);
        return b;
    };
    for (std::size_t k = 0; k < K; ++k) {
        const auto [k1, k2] = reps[k];
        const MeanSe v0 = mean_se(col([&](const double* r) { return r[k]; }), mc.batches);
        const MeanSe vT = mean_se(col([&](const double* r) { return r[K + k]; }), mc.batches);
        const MeanSe m0 = mean_se(col([&](const double* r) { return r[k] * r[k]; }), mc.batches);
        const MeanSe mT = mean_se(col([&](const double* r) { return r[K + k] * r[K + k]; }), mc.batches);
        rep.var0.push_back({k1, k2, v0.mean, v0.se, 1.0});
        rep.varT.push_back({k1, k2, vT.mean, vT.se, v0.mean});
        rep.m4_0.push_back({k1, k2, m0.mean, m0.se, 2.0});
        rep.m4T.push_back({k1, k2, mT.mean, mT.se, m0.mean});
        const MeanSe dv = mean_se(col([&](const double* r) { return r[K + k] - r[k]; }), mc.batches);
        const MeanSe dm = mean_se(col([&](const double* r) { return r[K + k] * r[K + k] - r[k] * r[k]; }), mc.batches);
        if (dv.se > 0) rep.max_mode_z = std::max(rep.max_mode_z, std::abs(dv.mean) / dv.se);
        if (dm.se > 0) rep.max_mode_z = std::max(rep.max_mode_z, std::abs(dm.mean) / dm.se);
    }
    // pooled drift: sum_k a_k(T) / sum_k a_k(0) - 1, delta method for the ratio
    auto sum0 = col([&](const double* r) { double s = 0; for (std::size_t k = 0; k < K; ++k) s += r[k]; return s; });
    auto sumT = col([&](const double* r) { double s = 0; for (std::size_t k = 0; k < K; ++k) s += r[K + k]; return s; });
    const MeanSe s0 = mean_se(sum0, mc.batches), sT = mean_se(sumT, mc.batches);
    const double ratio = sT.mean / s0.mean;
    std::vector<double> lin(A);
    for (std::size_t j = 0; j < A; ++j) lin[j] = (sumT[j] - ratio * sum0[j]) / s0.mean;
    rep.drift = ratio - 1.0;
    rep.drift_stderr = mean_se(lin, mc.batches).se;
    std::vector<double> kall(static_cast<std::size_t>(n_paths));
    for (int i = 0; i < n_paths; ++i) kall[static_cast<std::size_t>(i)] = rec[static_cast<std::size_t>(i) * stride + 2 * K];
    const MeanSe ku = mean_se(kall, mc.batches);
    rep.kurtosis0 = ku.mean;
    rep.kurtosis0_stderr = ku.se;
    return rep;
}

LongRunReport long_run_variances(const SolverConfig& cfg0, double burn_in, double window, int sample_stride,
                                 int n_paths, const McOptions& mc) {
    const int nb = static_cast<int>(std::lround(burn_in / cfg0.dt));
    const int nw = static_cast<int>(std::lround(window / cfg0.dt));
    const SolverConfig cfg = with_horizon(cfg0, (nb + nw) * cfg0.dt);
    cfg.validate();
    if (sample_stride < 1 || n_paths < 2) throw HarnessError("long_run_variances: bad sampling parameters");
    const int ns = nw / sample_stride;
    if (ns < 2) throw HarnessError("long_run_variances: window too short for the sampling stride");
    const int N = cfg.N;
    const auto reps = representatives(N, ModeBand{1, N});
    const std::size_t K = reps.size();
    std::vector<double> sigma(K);
    for (std::size_t k = 0; k < K; ++k) sigma[k] = stationary_mode_variance(cfg.nu, reps[k].first, reps[k].second);
    const std::size_t stride = K + 3;
    std::vector<double> rec(static_cast<std::size_t>(n_paths) * stride, 0.0);
    const int threads = resolve_threads(mc.threads);
    Workers W(cfg, threads, 1);
    parallel_for_workers(n_paths, threads, [&](int i, int w) {
        auto xi = path_noise(cfg, nb + nw, mc, i);
        Propagator& p = W.get(w, 0, xi);
        p.reset(SpectralField(N), xi);
        double* r = rec.data() + static_cast<std::size_t>(i) * stride;
        int taken = 0;
        for (int m = 0; m < nb + nw; ++m) {
            if (!p.step()) {
                r[K + 2] = 1.0;
                return;
            }
            const int wi = m + 1 - nb;
            if (wi <= 0 || wi % sample_stride != 0 || taken >= ns) continue;
            const SpectralField u = p.u();
            double pooled = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double a = mode_energy(u, reps[k].first, reps[k].second) / sigma[k];
                r[k] += a;
                pooled += a;
            }
            r[K + (taken < ns / 2 ? 0 : 1)] += pooled / double(K);
            ++taken;
        }
        for (std::size_t k = 0; k < K; ++k) r[k] /= ns;
        r[K] /= ns / 2;
        r[K + 1] /= ns - ns / 2;
    });
    LongRunReport rep;
    rep.samples = static_cast<long long>(n_paths) * ns;
    rep.digest_samples = rec;
    std::vector<int> alive;
    for (int i = 0; i < n_paths; ++i) {
        if (rec[static_cast<std::size_t>(i) * stride + K + 2] != 0.0) ++rep.n_exploded;
        else alive.push_back(i);
    }
    if (alive.size() < 2) throw HarnessError("long_run_variances: too many explosions");
    std::vector<double> buf(alive.size());
    auto colk = [&](std::size_t k) {
        for (std::size_t j = 0; j < alive.size(); ++j) buf[j] = rec[static_cast<std::size_t>(alive[j]) * stride + k];
        return mean_se(buf, mc.batches);
    };
    for (std::size_t k = 0; k < K; ++k) {
        const MeanSe m = colk(k);
        rep.ratios.push_back({reps[k].first, reps[k].second, m.mean, m.se, 1.0});
        if (m.se > 0) rep.max_mode_z = std::max(rep.max_mode_z, std::abs(m.mean - 1.0) / m.se);
    }
    for (std::size_t j = 0; j < alive.size(); ++j) {
        const double* r = rec.data() + static_cast<std::size_t>(alive[j]) * stride;
        buf[j] = (r[K] * (ns / 2) + r[K + 1] * (ns - ns / 2)) / ns;
    }
    const MeanSe pooled = mean_se(buf, mc.batches);
    rep.pooled = pooled.mean;
    rep.pooled_stderr = pooled.se;
    for (std::size_t j = 0; j < alive.size(); ++j) {
        const double* r = rec.data() + static_cast<std::size_t>(alive[j]) * stride;
        buf[j] = r[K + 1] - r[K];
    }
    const MeanSe d = mean_se(buf, mc.batches);
    rep.trend = d.se > 0 && std::abs(d.mean) > 3.0 * d.se;
    return rep;
}

// ---------------------------------------------------------------------------

SpectralField adversarial_rough_initial(double eta, int N, double norm_eta) {
    if (!(eta > -1.0 && eta < 0.0)) throw HarnessError("adversarial datum: eta must lie in (-1, 0)");
    SpectralField u(N);
    for (const auto& [k1, k2] : spectral::shell_order(N)) {
        const double q = std::hypot(double(k1), double(k2));
        const double a = std::pow(q, -(eta + 1.0)) / (2.0 * kPi);
        // aligned phases: every mode peaks at the origin
        u.set_mode(0, k1, k2, cplx(-a * k2 / q, 0.0));
        u.set_mode(1, k1, k2, cplx(a * k1 / q, 0.0));
    }
    const double h = noise::holder_norm(u, eta);
    if (h > 0.0) u *= norm_eta / h;
    return u;
}

GlobalReport global_existence_experiment(double eta, int n_paths, double T, const SolverConfig& cfg0,
                                         const McOptions& mc) {
    if (!(eta > -0.5 && eta < 0.0)) throw HarnessError("global_existence_experiment: eta must lie in (-1/2, 0)");
    if (n_paths < 1) throw HarnessError("need at least one path");
    SolverConfig cfg = with_horizon(cfg0, T);
    cfg.eta = eta;
    cfg.validate();
    const int n = cfg.steps();
    const int N = cfg.N;
    const std::uint64_t init_seed = derive_seed(mc.seed, {kInitialTag});
    GlobalReport rep;
    rep.n_paths = n_paths;
    rep.r_final.assign(static_cast<std::size_t>(n_paths), 0.0);
    std::vector<char> exploded(static_cast<std::size_t>(n_paths), 0);
    const int threads = resolve_threads(mc.threads);
    Workers W(cfg, threads, 1);
    auto run = [&](const SpectralField& u0, const noise::NoiseRealization& xi, int w) {
        Propagator& p = W.get(w, 0, xi);
        p.reset(u0, xi);
        for (int m = 0; m < n && p.step(); ++m) {
        }
        return std::pair<bool, double>(p.exploded(), p.exploded() ? INFINITY : p.monitor());
    };
    parallel_for_workers(n_paths, threads, [&](int i, int w) {
        const auto u0 = noise::sample_rough_initial(eta, N, init_seed, mc.stream_offset + static_cast<std::uint64_t>(i));
        const auto [ex, r] = run(u0, path_noise(cfg, n, mc, i), w);
        exploded[static_cast<std::size_t>(i)] = ex;
        rep.r_final[static_cast<std::size_t>(i)] = r;
    });
    rep.n_exploded = static_cast<int>(std::count(exploded.begin(), exploded.end(), 1));
    rep.explosion_fraction = double(rep.n_exploded) / n_paths;
    std::vector<double> r = rep.r_final;
    std::sort(r.begin(), r.end());
    auto q = [&](double p) { return r[static_cast<std::size_t>(std::min<double>(r.size() - 1, std::floor(p * (r.size() - 1) + 0.5)))]; };
    rep.r_median = q(0.5);
    rep.r_q90 = q(0.9);
    rep.r_max = r.back();
    // adversarial datum with the eta-size of the first random datum
    const auto first = noise::sample_rough_initial(eta, N, init_seed, mc.stream_offset);
    rep.adversarial_norm_eta = noise::holder_norm(first, eta);
    const auto adv = adversarial_rough_initial(eta, N, rep.adversarial_norm_eta);
    const auto xi_adv = noise::sample_white_noise(N, cfg.dt, std::max(n, 1), mc.seed, kAdversarialStream);
    const auto [ex, ra] = run(adv, xi_adv, 0);
    rep.adversarial_exploded = ex;
    rep.adversarial_r = ra;
    return rep;
}

// ---------------------------------------------------------------------------

DerivativeReport derivative_vs_fd(const SpectralField& u0, const SpectralField& v0, double t,
                                  const SolverConfig& cfg0, const noise::NoiseRealization& xi) {
    const SolverConfig cfg = with_horizon(cfg0, t);
    cfg.validate();
    const int n = cfg.steps();
    const SpectralField x0 = fit(u0, cfg.N), d0 = fit(v0, cfg.N);
    check_divergence_free(x0, "derivative_vs_fd");
    check_divergence_free(d0, "derivative_vs_fd");
    Propagator p(cfg, xi);
    p.reset(x0, xi);
    std::vector<SpectralField> J{d0};
    for (int m = 0; m < n; ++m)
        if (!p.step(J)) throw HarnessError("derivative_vs_fd: explosion");
    const SpectralField base = p.u();
    DerivativeReport rep;
    rep.min_error = INFINITY;
    const double jn = norm(J[0]);
    for (double eps : {1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
        Propagator q(cfg, xi);
        q.reset(x0 + eps * d0, xi);
        for (int m = 0; m < n; ++m)
            if (!q.step()) throw HarnessError("derivative_vs_fd: explosion");
        SpectralField fd = q.u() - base;
        fd *= 1.0 / eps;
        const double err = jn > 0.0 ? norm(fd - J[0]) / jn : norm(fd);
        rep.eps.push_back(eps);
        rep.rel_error.push_back(err);
        if (err < rep.min_error) {
            rep.min_error = err;
            rep.best_eps = eps;
        }
    }
    rep.pass = rep.min_error <= 1e-3;
    return rep;
}

JacobianReport jacobian_suite(const SpectralField& u0, const SpectralField& v0, const SpectralField& w0, double t,
                              const SolverConfig& cfg0, const noise::NoiseRealization& xi) {
    SolverConfig cfg = with_horizon(cfg0, t);
    cfg.snapshot_stride = 1;
    const int n = cfg.steps();
    if (n < 2) throw HarnessError("jacobian_suite: need at least two steps");
    const auto tr = solver::solve(fit(u0, cfg.N), xi, cfg);
    if (tr.exploded()) throw HarnessError("jacobian_suite: explosion");
    const SpectralField a = fit(v0, cfg.N), b = fit(w0, cfg.N);
    auto rel = [](const SpectralField& x, const SpectralField& y) { return norm(x - y) / std::max(norm(y), 1e-300); };
    JacobianReport rep;
    const auto Ja = solver::jacobian_apply(tr, a, 0.0, t);
    const auto Jb = solver::jacobian_apply(tr, b, 0.0, t);
    rep.linearity_error = rel(solver::jacobian_apply(tr, 2.5 * a - 0.75 * b, 0.0, t), 2.5 * Ja - 0.75 * Jb);
    const double r = (n / 2) * cfg.dt;
    rep.chain_error = rel(solver::jacobian_apply(tr, solver::jacobian_apply(tr, a, 0.0, r), r, t), Ja);
    rep.divergence = max_divergence(Ja) / std::max(norm(Ja), 1e-300);
    const double eps = 1e-5;
    SolverConfig c2 = cfg;
    c2.snapshot_stride = 0;
    const auto pert = solver::solve(fit(u0, cfg.N) + eps * a, xi, c2);
    if (pert.exploded()) throw HarnessError("jacobian_suite: explosion");
    SpectralField fd = *pert.final_state() - *tr.final_state();
    fd *= 1.0 / eps;
    rep.fd_error = rel(fd, Ja);
    return rep;
}

}  // namespace sns::harness
