#include "sns/app/commands.hpp"

#include "sns/harness/harness.hpp"
#include "sns/kernels/kernels.hpp"
#include "sns/noise/noise.hpp"
#include "sns/solver/solver.hpp"
#include "sns/structure/structure.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

namespace sns::app {

using harness::McOptions;
using spectral::SpectralField;

namespace {

// sub-stream tags of the command layer
constexpr std::uint64_t kInitTag = 0x1a17;
constexpr std::uint64_t kDirTag = 0xd1;
constexpr std::uint64_t kControlTag = 0xc0;
constexpr std::uint64_t kGroupTag = 0x6e;
constexpr std::uint64_t kScalingTag = 0x5c;
constexpr std::uint64_t kCalibrationOffset = 1ull << 40;

std::string num(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);  // shortest round trip
    return std::string(buf, res.ptr);
}

std::string short_num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

McOptions mc_of(const RunConfig& cfg, std::uint64_t offset = 0) {
    McOptions mc;
    mc.seed = cfg.seed;
    mc.stream_offset = offset;
    mc.threads = cfg.threads;
    mc.batches = cfg.batches;
    return mc;
}

bool has_part(const RunConfig& cfg, const std::string& part) {
    std::stringstream ss(cfg.experiment.parts);
    std::string item;
    while (std::getline(ss, item, ','))
        if (item == part || item == "all") return true;
    return false;
}

SpectralField initial_field(const RunConfig& cfg, int N) {
    const auto& in = cfg.initial;
    const std::uint64_t seed = derive_seed(cfg.seed, {kInitTag});
    SpectralField u(N);
    if (in.kind == "stationary") u = noise::sample_stationary(N, cfg.solver.nu, seed, in.stream);
    else if (in.kind == "rough") u = noise::sample_rough_initial(in.eta, N, seed, in.stream);
    else if (in.kind == "adversarial") return harness::adversarial_rough_initial(in.eta, N, in.scale);
    u *= in.scale;
    return u;
}

// Unit divergence-free field along the mode (k1, k2).
SpectralField mode_direction(int N, int k1, int k2) {
    if (k2 < 0 || (k2 == 0 && k1 < 0)) k1 = -k1, k2 = -k2;
    if ((k1 == 0 && k2 == 0) || std::max(std::abs(k1), std::abs(k2)) > N)
        throw ConfigError("[experiment] direction mode must be nonzero with |k|_inf <= N");
    const double q = std::hypot(double(k1), double(k2));
    SpectralField e(N);
    e.set_mode(0, k1, k2, {-k2 / q, 0.0});
    e.set_mode(1, k1, k2, {k1 / q, 0.0});
    e *= 1.0 / norm(e);
    return e;
}

SpectralField random_direction(const RunConfig& cfg, int N, std::uint64_t tag, std::uint64_t stream) {
    SpectralField v = noise::sample_stationary(N, cfg.solver.nu, derive_seed(cfg.seed, {tag}), stream);
    v *= 1.0 / norm(v);
    return v;
}

// logistic((<u, e> - c) / width), c the linearly decayed projection of u0
harness::Observable cylinder_observable(const SpectralField& e, const SpectralField& u0, const RunConfig& cfg,
                                        double width) {
    const int k1 = cfg.experiment.direction_k1, k2 = cfg.experiment.direction_k2;
    const double c = inner(u0, e) * std::exp(-cfg.solver.nu * double(k1 * k1 + k2 * k2) * cfg.experiment.t);
    return harness::Observable::cylinder(
        {e}, [c, width](std::span<const double> x) { return harness::logistic((x[0] - c) / width); }, 1.0);
}

harness::Observable observable(const SpectralField& e, const SpectralField& u0, const RunConfig& cfg, double width) {
    if (cfg.experiment.observable == "indicator")
        return harness::Observable::smoothed_indicator({cfg.experiment.band_kmin, cfg.experiment.band_kmax}, u0,
                                                      cfg.experiment.radius, width);
    return cylinder_observable(e, u0, cfg, width);
}

std::string join_rows(const std::vector<std::string>& rows) {
    std::string s;
    for (const auto& r : rows) s += r + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// structure

std::string basis_listing(const std::vector<structure::BasisEntry>& entries) {
    std::string s = "degree\tlevel\tsymbol\ttags\n";
    for (const auto& e : entries) {
        std::string tags;
        for (std::size_t i = 0; i < e.tags.size(); ++i) tags += (i ? "," : "") + structure::to_string(e.tags[i]);
        s += to_string(e.degree) + "\t" + std::to_string(e.level) + "\t" + e.symbol.key() + "\t" + tags + "\n";
    }
    return s;
}

CommandResult structure_build(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto b = structure::build_structure(cfg.structure);
    out.write("basis.tsv", basis_listing(b.entries));
    r.checks.push_back(info("basis_size", double(b.entries.size())));
    r.checks.push_back(info("levels_built", b.levels_built));
    r.checks.push_back(info("stabilized", b.stabilized ? 1 : 0));
    std::string grow;
    for (const auto& g : b.growing_degrees) grow += " " + to_string(g);
    r.summary.push_back("basis: " + std::to_string(b.entries.size()) + " symbols, " + std::to_string(b.levels_built) +
                        " levels" + (b.stabilized ? ", stabilised" : ", growing degrees:" + grow));
    return r;
}

CommandResult structure_negative(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto b = structure::build_structure(cfg.structure);
    const auto neg = structure::negative_sector(b);
    const auto shapes = structure::distinct_shapes(neg);
    out.write("negative.tsv", basis_listing(neg));
    std::string s = "degree\tshape\n";
    for (const auto& e : shapes) s += to_string(e.degree) + "\t" + e.symbol.shape().key() + "\n";
    out.write("shapes.tsv", s);
    r.checks.push_back(info("negative_sector_size", double(neg.size())));
    r.checks.push_back(info("negative_shapes", double(shapes.size())));
    r.summary.push_back(std::to_string(shapes.size()) + " shapes of negative degree (with 1), " +
                        std::to_string(neg.size()) + " symbols");
    for (const auto& e : shapes) r.summary.push_back("  " + to_string(e.degree) + "  " + e.symbol.shape().key());
    return r;
}

CommandResult structure_renorm_dim(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto fam = structure::active_families(cfg.structure);
    const int d = cfg.structure.scaling.d;
    std::string s = "family\tlayout\tsize\n";
    for (int f = 0; f < structure::kFamilyCount; ++f) {
        if (!fam[static_cast<std::size_t>(f)]) continue;
        const auto rf = static_cast<structure::RenormFamily>(f);
        std::array<bool, structure::kFamilyCount> one{};
        one[static_cast<std::size_t>(f)] = true;
        s += std::string(structure::family_name(rf)) + "\t" + structure::family_layout(rf) + "\t" +
             std::to_string(structure::renorm_dimension(d, one)) + "\n";
    }
    out.write("families.tsv", s);
    const std::size_t dim = structure::renorm_dimension(cfg.structure);
    r.checks.push_back(info("renorm_dimension", double(dim)));
    r.summary.push_back("renormalisation group dimension: " + std::to_string(dim));

    if (cfg.experiment.group_trials == 0) return r;
    // group law on the concrete negative sector, random (g, h) pairs;
    // a cut just above 0 already holds every negative-degree symbol
    structure::StructureSpec spec = cfg.structure;
    spec.index_mode = structure::IndexMode::Concrete;
    spec.gamma_cut = std::min(spec.gamma_cut, Rational(1, 100));
    const auto basis = structure::build_structure(spec);
    const structure::RenormTable table(basis);
    std::mt19937_64 rng(derive_seed(cfg.seed, {kGroupTag}));
    std::uniform_int_distribution<int> numd(-20, 20), den(1, 9);
    auto random_g = [&] {
        structure::RenormVector g(d, fam);
        for (int f = 0; f < structure::kFamilyCount; ++f) {
            const auto rf = static_cast<structure::RenormFamily>(f);
            if (!g.has(rf)) continue;
            for (std::size_t n = 0; n < g.family_size(rf); ++n) {
                const int p = numd(rng);
                g.at(rf, n) = Rational(p, den(rng));
            }
        }
        return g;
    };
    std::vector<int> sector;
    for (std::size_t id = 0; id < table.size(); ++id)
        if (basis.entries[id].degree < Rational(0) || static_cast<int>(id) == table.unit_id())
            sector.push_back(static_cast<int>(id));
    const int trials = cfg.experiment.group_trials;
    long long law_fail = 0, span_fail = 0, zero_fail = 0;
    const structure::RenormVector zero(d, fam);
    for (int id : sector) {
        const structure::RenormTable::Sparse x{{id, Rational(1)}};
        if (table.apply(zero, x) != x) ++zero_fail;
    }
    std::vector<std::string> rows;
    for (int trial = 0; trial < trials; ++trial) {
        const auto g = random_g(), h = random_g();
        const auto gh = g + h;
        int bad = 0;
        structure::RenormTable::Sparse x{{0, Rational(1)}}, hx, lhs, rhs;
        for (int id : sector) {
            x[0].first = id;
            table.apply(h, x, hx);
            table.apply(g, hx, lhs);
            table.apply(gh, x, rhs);
            if (lhs != rhs) ++law_fail, ++bad;
            for (const auto& [k, c] : lhs)
                if (!(k == id ? c == Rational(1) : k == table.unit_id())) ++span_fail, ++bad;
        }
        rows.push_back(std::to_string(trial) + "," + std::to_string(bad));
    }
    out.write("group_law.csv", "trial,failures\n" + join_rows(rows));
    r.checks.push_back(info("group_law_trials", trials));
    r.checks.push_back(info("sector_elements", double(sector.size())));
    r.checks.push_back(check_le("group_law_failures", double(law_fail), 0));
    r.checks.push_back(check_le("unit_span_failures", double(span_fail), 0));
    r.checks.push_back(check_le("zero_action_failures", double(zero_fail), 0));
    r.summary.push_back("group law M_g M_h = M_{g+h} on " + std::to_string(sector.size()) + " sector elements x " +
                        std::to_string(trials) + " trials: " + std::to_string(law_fail) + " failures");
    return r;
}

CommandResult structure_extend(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto b = structure::build_structure(cfg.structure);
    const auto x = structure::extend_with_shifts(b);
    out.write("extended.tsv", basis_listing(x.entries));
    long long hatted = 0;
    Rational min_hat(1000);
    for (const auto& e : x.entries)
        if (e.symbol.hat_count() > 0) {
            ++hatted;
            min_hat = std::min(min_hat, e.degree);
        }
    r.checks.push_back(info("extended_size", double(x.entries.size())));
    r.checks.push_back(info("shift_symbols", double(hatted)));
    if (hatted > 0) r.checks.push_back(check_ge("min_shift_degree", to_double(min_hat), 0.0));
    r.summary.push_back("extended basis: " + std::to_string(x.entries.size()) + " symbols, " + std::to_string(hatted) +
                        " containing shifts");
    return r;
}

// ---------------------------------------------------------------------------
// kernels

struct SampledKernel {
    kernels::GridFunction samples;
    kernels::DyadicKernel dk;
};

SampledKernel decompose(const RunConfig& cfg) {
    const auto& k = cfg.kernels;
    kernels::DecomposeOptions opt;
    opt.levels = k.levels;
    opt.order = k.order;
    const double h = to_double(k.step);
    const double xe = 1 + 4 * h;
    std::vector<double> ext, step;
    bool time_axis = false;
    if (k.kernel == "heat") {
        time_axis = true;
        ext.push_back(xe * xe);
        step.push_back(to_double(k.time_step));
    }
    for (int i = 0; i < k.d; ++i) ext.push_back(xe), step.push_back(h);
    const auto g = kernels::Grid::centered(ext, step, time_axis);
    if (g.size() > 50'000'000u) throw ConfigError("[kernels] grid of " + std::to_string(g.size()) + " points is too large");
    SampledKernel s;
    if (k.kernel == "heat") {
        auto kp = kernels::heat_kernel_split(k.nu, g, opt);
        s.samples = kernels::sample(g, [&](const std::vector<double>& z) {
            return kernels::heat_kernel(k.nu, z[0], std::vector<double>(z.begin() + 1, z.end()));
        });
        s.dk = std::move(kp.K);
    } else {
        s.samples = kernels::sample(g, [&](const std::vector<double>& z) {
            return kernels::leray_kernel(k.component_i, k.component_j, z);
        });
        s.dk = kernels::dyadic_decompose(s.samples, opt, 0);
    }
    return s;
}

// max |sum_n P_n + R - K| away from the singularity (relative to max|K| for the heat kernel)
double reconstruction_error(const RunConfig& cfg, const SampledKernel& s) {
    const auto sum = s.dk.sum_levels();
    double err = 0, gmax = 0;
    const bool heat = cfg.kernels.kernel == "heat";
    kernels::for_each_point(s.samples.grid, [&](std::size_t p, const std::vector<double>& z) {
        if (heat ? z[0] < 1e-2 : kernels::homogeneous_norm(s.samples.grid, z) < 1e-2) return;
        gmax = std::max(gmax, std::abs(s.samples.values[p]));
        err = std::max(err, std::abs(sum[p] + s.dk.remainder[p] - s.samples.values[p]));
    });
    return heat ? err / std::max(gmax, 1e-300) : err;
}

CommandResult kernels_decompose(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto s = decompose(cfg);
    kernels::GridFile f;
    f.grid = s.samples.grid;
    f.seed = cfg.seed;
    f.blocks = s.dk.levels;
    f.blocks.push_back(s.dk.remainder);
    kernels::write_grid_file(out.path("kernel.grid").string(), f);
    out.record("kernel.grid");
    r.checks.push_back(info("levels", s.dk.level_count()));
    r.checks.push_back(info("reconstruction_error", reconstruction_error(cfg, s)));
    r.summary.push_back(cfg.kernels.kernel + " kernel: " + std::to_string(s.dk.level_count()) +
                        " levels plus remainder written to kernel.grid");
    return r;
}

CommandResult kernels_verify(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto s = decompose(cfg);
    const double rec = reconstruction_error(cfg, s);
    r.checks.push_back(check_le("reconstruction_error", rec, 1e-6));
    const bool heat = cfg.kernels.kernel == "heat";
    const auto rep = kernels::verify_regularising_bounds(s.dk, cfg.kernels.k_max, cfg.kernels.bound_factor, 0.5,
                                                         heat ? 8.0 : 32.0);
    std::string rows = "derivative\tweighted_order\texpected_exponent\tfitted_exponent\tratio\tlevels\n";
    double worst = 0;
    for (const auto& f : rep.fits) {
        worst = std::max(worst, f.ratio);
        rows += to_string(f.derivative) + "\t" + std::to_string(f.weighted_order) + "\t" + num(f.expected_exponent) +
                "\t" + num(f.fitted_exponent) + "\t" + num(f.ratio) + "\t" + std::to_string(f.levels_used.size()) + "\n";
    }
    out.write("bounds.tsv", rows);
    if (heat) r.checks.push_back(info("bound_ratio_max", worst));
    else r.checks.push_back(check_le("bound_ratio_max", worst, cfg.kernels.bound_factor));
    // K(t/4, x/2) = 2^d K(t, x)
    NormalSource rng(derive_seed(cfg.seed, {kScalingTag}));
    double scal = 0;
    for (int i = 0; i < 200; ++i) {
        const double t = 0.05 + rng.uniform();
        std::vector<double> x(static_cast<std::size_t>(cfg.kernels.d)), xh(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = rng.normal(), xh[j] = x[j] / 2;
        const double a = kernels::heat_kernel(cfg.kernels.nu, t / 4, xh);
        const double b = std::ldexp(kernels::heat_kernel(cfg.kernels.nu, t, x), cfg.kernels.d);
        scal = std::max(scal, std::abs(a - b) / std::max(std::abs(b), 1e-300));
    }
    r.checks.push_back(check_le("heat_scaling_error", scal, 1e-8));
    r.summary.push_back(cfg.kernels.kernel + " kernel: reconstruction error " + short_num(rec) + ", bound ratio " +
                        short_num(worst) + ", scaling error " + short_num(scal));
    return r;
}

// ---------------------------------------------------------------------------
// solver

solver::SolverConfig solver_cfg(const RunConfig& cfg) {
    auto s = cfg.solver;
    s.seed = cfg.seed;
    return s;
}

CommandResult simulate(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto sc = solver_cfg(cfg);
    const int n = sc.steps();
    const SpectralField u0 = initial_field(cfg, sc.N);
    auto xi = noise::sample_white_noise(sc.N, sc.dt, std::max(n, 1), cfg.seed, 0);
    if (cfg.experiment.noise_scale != 1.0) xi = xi.scaled(cfg.experiment.noise_scale);
    const auto tr = solver::solve(u0, xi, sc);

    spectral::GridTransform gt(sc.N, sc.grid());
    kernels::GridFile f;
    const double h = 2.0 * 3.141592653589793 / sc.grid();
    f.grid.shape = {sc.grid(), sc.grid()};
    f.grid.origin = {0.0, 0.0};
    f.grid.step = {h, h};
    f.seed = cfg.seed;
    double div = 0;
    std::string times = "snapshot,t\n";
    for (std::size_t i = 0; i < tr.u.size(); ++i) {
        for (int c = 0; c < 2; ++c) {
            std::vector<double> g(gt.grid_points());
            gt.to_grid(tr.u[i], c, g.data());
            f.blocks.push_back(std::move(g));
        }
        div = std::max(div, spectral::max_divergence(tr.u[i]) / std::max(1.0, norm(tr.u[i])));
        times += std::to_string(i) + "," + num(tr.times[i]) + "\n";
    }
    kernels::write_grid_file(out.path("snapshots.grid").string(), f);
    out.record("snapshots.grid");
    out.write("snapshots.csv", times);
    std::string log;
    for (std::size_t i = 0; i < tr.r.size(); ++i) {
        nlohmann::json j;
        j["step"] = i;
        j["t"] = tr.r_times[i];
        j["energy"] = tr.energy[i];
        j["r_t"] = std::isfinite(tr.r[i]) ? nlohmann::json(tr.r[i]) : nlohmann::json("inf");
        j["status"] = (tr.exploded() && tr.r_times[i] >= tr.t_explode) ? "exploded" : "running";
        log += j.dump() + "\n";
    }
    out.write("log.ndjson", log);
    r.checks.push_back(info("exploded", tr.exploded() ? 1 : 0));
    r.checks.push_back(info("r_final", tr.r_final()));
    if (!tr.energy.empty()) r.checks.push_back(info("energy_final", tr.energy.back()));
    r.checks.push_back(check_le("divergence", div, 1e-12));
    r.summary.push_back("simulate: " + std::to_string(tr.steps_done) + " steps, " +
                        (tr.exploded() ? "exploded at t=" + short_num(tr.t_explode) : "completed") + ", " +
                        std::to_string(tr.u.size()) + " snapshots");
    return r;
}

CommandResult jacobian_check(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto sc = solver_cfg(cfg);
    const int N = sc.N;
    const double t = cfg.experiment.t;
    const int n = harness::step_of(t, sc);
    const SpectralField u0 = initial_field(cfg, N);
    const SpectralField v0 = random_direction(cfg, N, kDirTag, 0), w0 = random_direction(cfg, N, kDirTag, 1);
    const auto xi = noise::sample_white_noise(N, sc.dt, std::max(n, 1), cfg.seed, 0);
    const auto js = harness::jacobian_suite(u0, v0, w0, t, sc, xi);
    const auto dv = harness::derivative_vs_fd(u0, v0, t, sc, xi);
    std::string rows = "eps,relative_error\n";
    for (std::size_t i = 0; i < dv.eps.size(); ++i) rows += num(dv.eps[i]) + "," + num(dv.rel_error[i]) + "\n";
    out.write("fd_sweep.csv", rows);
    r.checks.push_back(check_le("fd_consistency", dv.min_error, 1e-3));
    r.checks.push_back(info("fd_best_eps", dv.best_eps));
    r.checks.push_back(info("fd_error_eps_1e-5", js.fd_error));
    r.checks.push_back(check_le("chain_rule", js.chain_error, 1e-8));
    r.checks.push_back(check_le("linearity", js.linearity_error, 1e-10));
    r.checks.push_back(check_le("tangent_divergence", js.divergence, 1e-12));
    r.summary.push_back("Jacobian: FD " + short_num(dv.min_error) + " (eps " + short_num(dv.best_eps) + "), chain " +
                        short_num(js.chain_error) + ", linearity " + short_num(js.linearity_error));
    return r;
}

// ---------------------------------------------------------------------------
// Monte Carlo commands

CommandResult gradient_check(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto sc = solver_cfg(cfg);
    const int N = sc.N;
    const double t = cfg.experiment.t;
    const int n = harness::step_of(t, sc);
    const SpectralField u0 = initial_field(cfg, N);
    const SpectralField e = mode_direction(N, cfg.experiment.direction_k1, cfg.experiment.direction_k2);
    const auto psi = observable(e, u0, cfg, cfg.experiment.width);
    r.summary.push_back("observable: " + psi.describe());

    if (has_part(cfg, "control")) {
        double worst = 0;
        std::vector<std::string> rows;
        auto sct = sc;
        sct.T = t;
        sct.snapshot_stride = 1;
        for (int p = 0; p < cfg.experiment.control_pairs; ++p) {
            const auto up = noise::sample_stationary(N, sc.nu, derive_seed(cfg.seed, {kControlTag, 0}), p);
            const auto vp = random_direction(cfg, N, kControlTag + 1, static_cast<std::uint64_t>(p));
            const auto xi = noise::sample_white_noise(N, sc.dt, std::max(n, 1), cfg.seed, kControlTag + p);
            const auto tr = solver::solve(up, xi, sct);
            const auto h = harness::build_control(tr, vp, t);
            const double res = harness::control_residual(tr, h, vp, t);
            worst = std::max(worst, res);
            rows.push_back(std::to_string(p) + "," + num(res));
        }
        out.write("records_control.csv", join_rows(rows));
        r.checks.push_back(check_le("control_residual_max", worst, 1e-3));
        r.summary.push_back("control identity: worst residual " + short_num(worst) + " over " +
                            std::to_string(cfg.experiment.control_pairs) + " pairs");
    }
    if (has_part(cfg, "calibration")) {
        auto lin = sc;
        lin.nonlinear = false;
        const auto mc = mc_of(cfg, kCalibrationOffset);
        const auto oracle = harness::linear_gaussian_oracle(psi, u0, e, t, lin);
        std::vector<double> gs, vs;
        // one pass: the BEL weights and Psi(u_t) come from the same paths
        const auto g = harness::bel_gradient(psi, u0, e, t, cfg.experiment.calibration_paths, lin, mc, &gs, &vs);
        const auto v = harness::batch_estimate(vs, mc.batches);
        std::vector<double> rec;
        for (std::size_t i = 0; i < gs.size(); ++i) rec.push_back(gs[i]), rec.push_back(vs[i]);
        out.write("records_calibration.csv", records_csv(rec, static_cast<int>(gs.size())));
        r.checks.push_back(info("ou_gradient_oracle", oracle.gradient));
        r.checks.push_back(info("ou_gradient_bel", g.value, g.se));
        r.checks.push_back(check_le("ou_gradient_z", std::abs(g.value - oracle.gradient) / g.se, 3.0));
        r.checks.push_back(info("ou_value_oracle", oracle.value));
        r.checks.push_back(info("ou_value_mc", v.value, v.se));
        r.checks.push_back(check_le("ou_value_z", std::abs(v.value - oracle.value) / std::max(v.se, 1e-300), 3.0));
        r.summary.push_back("OU calibration: BEL " + short_num(g.value) + " +- " + short_num(g.se) + " vs exact " +
                            short_num(oracle.gradient));
    }
    if (has_part(cfg, "comparison")) {
        const auto cmp = harness::gradient_comparison(psi, u0, e, t, cfg.experiment.eps, cfg.experiment.paths, sc,
                                                      mc_of(cfg));
        std::vector<double> rec;
        for (std::size_t i = 0; i < cmp.bel_samples.size(); ++i)
            rec.push_back(cmp.bel_samples[i]), rec.push_back(cmp.fd_samples[i]);
        out.write("records_comparison.csv", records_csv(rec, static_cast<int>(cmp.bel_samples.size())));
        r.checks.push_back(info("bel_gradient", cmp.bel.value, cmp.bel.se));
        r.checks.push_back(info("fd_gradient", cmp.fd.value, cmp.fd.se));
        r.checks.push_back(info("exploded_paths", cmp.bel.n_exploded));
        r.checks.push_back(check_le("bel_fd_relative_deviation", cmp.relative_deviation, 0.2));
        r.summary.push_back("BEL " + short_num(cmp.bel.value) + " +- " + short_num(cmp.bel.se) + " vs FD " +
                            short_num(cmp.fd.value) + " +- " + short_num(cmp.fd.se) + " over " +
                            std::to_string(cmp.bel.n_paths) + " paths");
    }
    return r;
}

CommandResult feller_test(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto sc = solver_cfg(cfg);
    const int N = sc.N;
    const SpectralField x = initial_field(cfg, N);
    const SpectralField e = mode_direction(N, cfg.experiment.direction_k1, cfg.experiment.direction_k2);
    std::vector<SpectralField> ys;
    for (double d : cfg.experiment.distances) ys.push_back(x + d * e);
    std::vector<harness::Observable> family;
    for (double w : cfg.experiment.widths) family.push_back(observable(e, x, cfg, w));
    const auto rep = harness::strong_feller_probe(x, ys, family, cfg.experiment.t, cfg.experiment.paths, sc, mc_of(cfg),
                                                  cfg.initial.eta);
    out.write("records_feller.csv", records_csv(rep.digest_samples, rep.n_paths));
    std::string rows = "distance_l2,distance_eta,gap,gap_stderr,argmax,bound,bound_stderr,within_bound\n";
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
        const auto& p = rep.points[i];
        rows += num(p.distance_l2) + "," + num(p.distance_eta) + "," + num(p.gap) + "," + num(p.gap_stderr) + "," +
                std::to_string(p.argmax) + "," + num(p.bound) + "," + num(p.bound_stderr) + "," +
                (p.within_bound ? "1" : "0") + "\n";
        const std::string tag = "[" + short_num(p.distance_l2) + "]";
        r.checks.push_back(info("gap" + tag, p.gap, p.gap_stderr));
        r.checks.push_back(info("bel_bound" + tag, p.bound, p.bound_stderr));
        const double joint = std::hypot(p.gap_stderr, p.bound_stderr);
        r.checks.push_back(check_le("gap_minus_bound_z" + tag, joint > 0 ? (p.gap - p.bound) / joint : 0.0, 3.0));
        if (i > 0) {
            const auto& q = rep.points[i - 1];
            const double j2 = std::hypot(p.gap_stderr, q.gap_stderr);
            r.checks.push_back(check_le("gap_increase_z" + tag, j2 > 0 ? (p.gap - q.gap) / j2 : 0.0, 3.0));
        }
        r.summary.push_back("|x-y| = " + short_num(p.distance_l2) + " (eta-norm " + short_num(p.distance_eta) +
                            "): gap " + short_num(p.gap) + " +- " + short_num(p.gap_stderr) + ", BEL bound " +
                            short_num(p.bound) + " +- " + short_num(p.bound_stderr));
    }
    out.write("feller.csv", rows);
    r.checks.push_back(check_le("explosion_fraction", rep.explosion_fraction, 0.01));
    r.checks.push_back(check_ge("monotone", rep.monotone ? 1 : 0, 1));
    return r;
}

std::string mode_rows(const std::vector<harness::ModeStat>& s) {
    std::string rows = "k1,k2,value,stderr,reference\n";
    for (const auto& m : s)
        rows += std::to_string(m.k1) + "," + std::to_string(m.k2) + "," + num(m.value) + "," + num(m.se) + "," +
                num(m.reference) + "\n";
    return rows;
}

CommandResult invariance_test(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto& x = cfg.experiment;
    const harness::ModeBand band{x.band_kmin, x.band_kmax};
    if (has_part(cfg, "stokes")) {
        const auto rep = harness::stokes_invariance(x.stokes_N, cfg.solver.nu, x.stokes_dt, x.burn_in, x.window,
                                                    x.sample_stride, x.stokes_paths, mc_of(cfg));
        out.write("records_stokes.csv", records_csv(rep.digest_samples, x.stokes_paths));
        out.write("stokes_modes.csv", mode_rows(rep.ratios));
        double zmax = 0, neff = INFINITY, sum = 0, var = 0;
        for (const auto& m : rep.ratios) {
            sum += m.value - 1.0;
            var += m.se * m.se;
            if (!band.contains(m.k1, m.k2)) continue;
            zmax = std::max(zmax, std::abs(m.value - 1.0) / m.se);
            neff = std::min(neff, 1.0 / (m.se * m.se));  // |z_k|^2 / sigma_k has unit variance
        }
        const double K = double(rep.ratios.size());
        r.checks.push_back(check_le("stokes_max_ratio_deviation", rep.max_deviation, 0.03));
        r.checks.push_back(check_ge("stokes_samples", double(rep.samples), 1e6));
        r.checks.push_back(check_le("stokes_band_max_z", zmax, 3.0));
        r.checks.push_back(check_le("stokes_pooled_z", std::abs(sum / K) / (std::sqrt(var) / K), 3.0));
        r.checks.push_back(check_ge("stokes_band_effective_samples", neff, 1e4));
        r.checks.push_back(check_le("stokes_trend_z", std::abs(rep.trend_z), 3.0));
        r.summary.push_back("Stokes: max |ratio - 1| = " + short_num(rep.max_deviation) + " over " +
                            std::to_string(rep.ratios.size()) + " modes, band max z " + short_num(zmax));
    }
    if (has_part(cfg, "nonlinear")) {
        const auto sc = solver_cfg(cfg);
        const auto rep = harness::nonlinear_invariance(sc, x.paths, band, mc_of(cfg));
        out.write("records_nonlinear.csv", records_csv(rep.digest_samples, rep.n_paths));
        out.write("nonlinear_modes.csv", mode_rows(rep.var0) + mode_rows(rep.varT) + mode_rows(rep.m4_0) +
                                             mode_rows(rep.m4T));
        r.checks.push_back(check_le("nonlinear_variance_drift", std::abs(rep.drift), 0.05, rep.drift_stderr));
        r.checks.push_back(check_le("nonlinear_mode_max_z", rep.max_mode_z, 3.0));
        r.checks.push_back(check_le("mu_N_excess_kurtosis_z", std::abs(rep.kurtosis0) / rep.kurtosis0_stderr, 3.0));
        r.checks.push_back(info("nonlinear_exploded", rep.n_exploded));
        r.summary.push_back("nonlinear from mu_N: drift " + short_num(rep.drift) + " +- " +
                            short_num(rep.drift_stderr) + ", max paired z " + short_num(rep.max_mode_z));
    }
    if (has_part(cfg, "brute")) {
        auto sc = solver_cfg(cfg);
        sc.N = x.brute_N;
        sc.dt = x.brute_dt;
        sc.T = x.brute_dt;
        const auto rep =
            harness::long_run_variances(sc, x.brute_burn_in, x.brute_window, x.brute_stride, x.brute_paths, mc_of(cfg));
        out.write("records_brute.csv", records_csv(rep.digest_samples, x.brute_paths));
        out.write("brute_modes.csv", mode_rows(rep.ratios));
        r.checks.push_back(check_le("brute_pooled_z", std::abs(rep.pooled - 1.0) / rep.pooled_stderr, 3.0));
        r.checks.push_back(check_le("brute_mode_max_z", rep.max_mode_z, 3.0));
        r.checks.push_back(info("brute_pooled_ratio", rep.pooled, rep.pooled_stderr));
        r.checks.push_back(info("brute_exploded", rep.n_exploded));
        r.summary.push_back("N=" + std::to_string(x.brute_N) + " long run: pooled ratio " + short_num(rep.pooled) +
                            " +- " + short_num(rep.pooled_stderr) + ", max mode z " + short_num(rep.max_mode_z));
    }
    return r;
}

CommandResult global_test(const RunConfig& cfg, Output& out) {
    CommandResult r;
    const auto sc = solver_cfg(cfg);
    const auto rep = harness::global_existence_experiment(cfg.initial.eta, cfg.experiment.paths, sc.T, sc, mc_of(cfg));
    out.write("records_global.csv", records_csv(rep.r_final, rep.n_paths));
    r.checks.push_back(check_le("explosions", rep.n_exploded, 0));
    r.checks.push_back(check_le("adversarial_exploded", rep.adversarial_exploded ? 1 : 0, 0));
    r.checks.push_back(info("r_median", rep.r_median));
    r.checks.push_back(info("r_q90", rep.r_q90));
    r.checks.push_back(info("r_max", rep.r_max));
    r.checks.push_back(info("adversarial_r", rep.adversarial_r));
    r.checks.push_back(info("adversarial_norm_eta", rep.adversarial_norm_eta));
    r.summary.push_back(std::to_string(rep.n_exploded) + "/" + std::to_string(rep.n_paths) +
                        " explosions; r_T median " + short_num(rep.r_median) + ", max " + short_num(rep.r_max) +
                        "; adversarial datum r_T " + short_num(rep.adversarial_r));
    return r;
}

using Runner = std::function<CommandResult(const RunConfig&, Output&)>;

const std::vector<std::pair<std::string, Runner>>& runners() {
    static const std::vector<std::pair<std::string, Runner>> r{
        {"structure build", structure_build},
        {"structure negative", structure_negative},
        {"structure renorm-dim", structure_renorm_dim},
        {"structure extend", structure_extend},
        {"kernels decompose", kernels_decompose},
        {"kernels verify", kernels_verify},
        {"simulate", simulate},
        {"jacobian-check", jacobian_check},
        {"gradient-check", gradient_check},
        {"feller-test", feller_test},
        {"invariance-test", invariance_test},
        {"global-test", global_test},
    };
    return r;
}

}  // namespace

Check check_le(std::string name, double value, double threshold, std::optional<double> se) {
    return {std::move(name), value, se, threshold, value <= threshold};
}
Check check_ge(std::string name, double value, double threshold, std::optional<double> se) {
    return {std::move(name), value, se, threshold, value >= threshold};
}
Check info(std::string name, double value, std::optional<double> se) { return {std::move(name), value, se, {}, true}; }

Output::Output(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

void Output::write(const std::string& name, const std::string& content) {
    {
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
        f << content;
    }
    files_[name] = sha256_hex(content);
}

void Output::record(const std::string& name) { files_[name] = sha256_file(dir_ / name); }

bool CommandResult::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [n, f] : runners()) v.push_back(n);
        return v;
    }();
    return names;
}

CommandResult run_command(const std::string& command, const RunConfig& cfg, Output& out) {
    for (const auto& [name, fn] : runners()) {
        if (name != command) continue;
        CommandResult r = fn(cfg, out);
        out.write("report.ndjson", checks_ndjson(r.checks));
        return r;
    }
    throw ConfigError("unknown command '" + command + "'");
}

std::string checks_ndjson(const std::vector<Check>& checks) {
    std::string s;
    auto val = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(num(x)); };
    for (const auto& c : checks) {
        nlohmann::ordered_json j;
        j["name"] = c.name;
        j["value"] = val(c.value);
        j["stderr"] = c.stderr_value ? val(*c.stderr_value) : nlohmann::json(nullptr);
        j["threshold"] = c.threshold ? val(*c.threshold) : nlohmann::json(nullptr);
        j["pass"] = c.pass;
        s += j.dump() + "\n";
    }
    return s;
}

std::string summary_table(const std::vector<Check>& checks) {
    std::size_t w = 4;
    for (const auto& c : checks) w = std::max(w, c.name.size());
    std::ostringstream o;
    char line[512];
    std::snprintf(line, sizeof line, "%-*s  %14s  %12s  %12s  %s\n", int(w), "name", "value", "stderr", "threshold",
                  "status");
    o << line;
    for (const auto& c : checks) {
        std::snprintf(line, sizeof line, "%-*s  %14.6g  %12s  %12s  %s\n", int(w), c.name.c_str(), c.value,
                      c.stderr_value ? short_num(*c.stderr_value).c_str() : "-",
                      c.threshold ? short_num(*c.threshold).c_str() : "-", c.threshold ? (c.pass ? "PASS" : "FAIL") : "info");
        o << line;
    }
    return o.str();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(Output& out, const std::string& command, const RunConfig& cfg, const std::string& started,
                    const std::string& finished) {
    out.write("config.ini", serialize(cfg));
    nlohmann::ordered_json j;
    j["command"] = command;
    j["version"] = kToolkitVersion;
    j["config_hash"] = config_hash(cfg);
    j["seed"] = cfg.seed;
    j["started"] = started;
    j["finished"] = finished;
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& [name, sum] : out.files()) files[name] = sum;
    j["outputs"] = files;
    std::ofstream f(out.dir() / "manifest.json");
    f << j.dump(2) << "\n";
}

void write_error(const std::filesystem::path& dir, const std::string& command, const std::string& kind,
                 const std::string& message) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    nlohmann::ordered_json j;
    j["command"] = command;
    j["error"] = kind;
    j["message"] = message;
    std::ofstream f(dir / "error.json");
    f << j.dump(2) << "\n";
}

std::string records_csv(const std::vector<double>& flat, int n_paths) {
    if (n_paths <= 0) return "";
    const std::size_t stride = flat.size() / static_cast<std::size_t>(n_paths);
    std::string s;
    for (int i = 0; i < n_paths; ++i) {
        s += std::to_string(i);
        for (std::size_t k = 0; k < stride; ++k) s += "," + num(flat[static_cast<std::size_t>(i) * stride + k]);
        s += "\n";
    }
    return s;
}

}  // namespace sns::app
