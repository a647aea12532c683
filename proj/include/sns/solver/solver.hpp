#pragma once

#include "sns/noise/noise.hpp"
#include "sns/spectral/field.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sns::solver {

using spectral::SpectralField;

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverConfig {
    double nu = 1.0;
    int N = 64;
    double dt = 1e-3;
    double T = 1.0;
    double eta = -0.4;          // initial-data class (metadata)
    double R_max = 1e6;         // explosion threshold of the monitor
    bool wick = false;          // replace z (x) z by its Wick product
    bool nonlinear = true;      // false: Stokes (linear) dynamics
    std::uint64_t seed = 0;
    int monitor_stride = 1;     // evaluate the Hoelder part of the monitor every k steps
    int snapshot_stride = 0;    // 0: only the initial and final states
    double courant = 0.5;       // dt <= courant / (N u_ref)
    double u_ref = 4.0;         // velocity scale used by the stability rule
    // Window of the abstract fixed point, recorded only.
    double gamma = 0.5;

    int steps() const;          // T / dt, throws unless T is a multiple of dt
    double max_stable_dt() const { return courant / (static_cast<double>(N) * u_ref); }
    void validate() const;      // throws SolverError with the violated rule
    int grid() const;           // collocation grid size (alias free for quadratic terms)
};

// ---------------------------------------------------------------------------
// Quadratic terms by collocation on an alias-free grid.
class Nonlinearity {
public:
    explicit Nonlinearity(int N);
    int cutoff() const { return n_; }
    int grid() const { return m_; }
    // B(u) = -(1/2) P div(u (x) u); `wick` is subtracted from the pointwise
    // products (entries 11, 12, 22) before differentiation.
    void apply(const SpectralField& u, SpectralField& out, const std::array<double, 3>& wick = {0, 0, 0});
    // DB(u) w = -(1/2) P div(u (x) w + w (x) u)
    void tangent(const SpectralField& u, const SpectralField& w, SpectralField& out);
    // Same, with u taken from the grid values of the last apply/tangent call.
    void tangent_at_last(const SpectralField& w, SpectralField& out);
    // P (u . grad) u, for checking the divergence form.
    void advective(const SpectralField& u, SpectralField& out);
    // Grid values of both components.
    void to_grid(const SpectralField& u, spectral::RealGrid& g1, spectral::RealGrid& g2);

private:
    void from_products(SpectralField& out);
    int n_, m_;
    std::unique_ptr<spectral::GridTransform> tr_;
    spectral::RealGrid a1_, a2_, b1_, b2_, p11_, p12_, p22_;
    SpectralField h11_, h12_, h22_;
};

SpectralField nonlinearity(const SpectralField& u);
using spectral::leray_project;

// Linear part of one step: E = e^{-nu |k|^2 dt}, phi = (1 - E) / (nu |k|^2)
class LinearPart {
public:
    LinearPart(int N, double nu, double dt);
    void apply_E(SpectralField& f) const;                             // f <- E f
    void add_phi(SpectralField& f, const SpectralField& g) const;     // f <- f + phi g
    double E(int k1, int k2) const { return e_[idx(k1, k2)]; }
    double phi(int k1, int k2) const { return p_[idx(k1, k2)]; }

private:
    std::size_t idx(int k1, int k2) const {
        return static_cast<std::size_t>(k1 + n_) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(k2);
    }
    int n_;
    std::vector<double> e_, p_;
};

// One exponential Euler step of the remainder: v <- E v + phi B((v + z))_wick.
// `t` is the time of (v, z); the Wick constant is that of a zero-started z.
SpectralField step_v(const SpectralField& v, const SpectralField& z, const SolverConfig& cfg, double t);

// ---------------------------------------------------------------------------
// Explosion monitor proxy: running max of max(holder_{1/2}(v), t^{1/4} |v|_inf).
struct Monitor {
    double beta = 0.5;
    double rho = 0.25;
    double value(const spectral::RealGrid& v1, const spectral::RealGrid& v2, int M, double t) const;
};

enum class Status { Completed, Exploded };

struct Trajectory {
    SolverConfig cfg;
    Status status = Status::Completed;
    double t_explode = 0.0;
    int steps_done = 0;                // steps taken before absorption
    std::vector<double> times;         // snapshot times
    std::vector<SpectralField> u, v, z;
    std::vector<double> r;             // monitor after each step (r[0] at t=0)
    std::vector<double> r_times;
    std::vector<double> energy;        // (1/2) int |u|^2 at the same times as r
    noise::NoiseRealization xi;

    bool exploded() const { return status == Status::Exploded; }
    // Final state, or nullopt for the cemetery state.
    std::optional<SpectralField> final_state() const;
    // State at step n if it was stored and the path had not exploded by then.
    std::optional<SpectralField> state_at_step(int n) const;
    double r_final() const { return r.empty() ? 0.0 : r.back(); }
};

// Fixed-point solve with u = z + v, z(0) = 0, v(0) = u0.
Trajectory solve(const SpectralField& u0, const noise::NoiseRealization& xi, const SolverConfig& cfg);

// Step-by-step engine shared by solve and the Monte Carlo harness.
class Propagator {
public:
    Propagator(const SolverConfig& cfg, const noise::NoiseRealization& xi);
    void reset(const SpectralField& u0, const noise::NoiseRealization& xi);
    const SolverConfig& config() const { return cfg_; }
    int step_index() const { return n_; }
    double time() const { return n_ * cfg_.dt; }
    const SpectralField& v() const { return v_; }
    const SpectralField& z() const { return z_; }
    SpectralField u() const { return v_ + z_; }
    const SpectralField& last_increment() const { return dW_; }
    bool exploded() const { return exploded_; }
    double monitor() const { return r_; }
    // Advances one step; returns false once exploded (state frozen in the cemetery).
    bool step();
    // Also advances tangents J <- E J + phi DB(u_n) J, sharing the grid values of u_n.
    bool step(std::span<SpectralField> tangents);
    // Step driven by an externally supplied increment (common random numbers).
    bool step_with(const SpectralField& dW, std::span<SpectralField> tangents = {});
    // The tangent DB(u_n) applied along with the step: J <- E J + phi DB(u_n) J,
    // using u_n before the step. Must be called before step().
    void tangent_step(SpectralField& J);
    Nonlinearity& nonlinearity() { return nl_; }
    const LinearPart& linear() const { return lin_; }
    const noise::OUStepper& ou() const { return ou_; }

private:
    void update_monitor(bool full);
    bool advance(std::span<SpectralField> tangents);
    SolverConfig cfg_;
    noise::NoiseRealization xi_;
    Nonlinearity nl_;
    LinearPart lin_;
    noise::OUStepper ou_;
    Monitor mon_;
    SpectralField v_, z_, dW_, u_, b_, work_;
    spectral::RealGrid g1_, g2_;
    int n_ = 0;
    double r_ = 0.0;
    bool exploded_ = false;
};

// J_{s,t} v0 along a trajectory stored with snapshot stride 1.
SpectralField jacobian_apply(const Trajectory& traj, const SpectralField& v0, double s, double t);

// Monitor series r_t (+inf after an explosion).
std::vector<double> explosion_radius(const Trajectory& traj);

}  // namespace sns::solver
