#pragma once

#include "sns/noise/noise.hpp"
#include "sns/solver/solver.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sns::harness {

using solver::SolverConfig;
using spectral::SpectralField;

struct HarnessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Modes with kmin <= |k|_inf <= kmax.
struct ModeBand {
    int kmin = 1;
    int kmax = 2;
    bool contains(int k1, int k2) const {
        const int m = std::max(std::abs(k1), std::abs(k2));
        return m >= kmin && m <= kmax;
    }
};

// Bounded observable; the cemetery state is mapped to 0.
class Observable {
public:
    enum class Kind { SmoothedIndicator, BoundedCylinder };
    using PostMap = std::function<double(std::span<const double>)>;

    // logistic((radius - |Pi_band (u - center)|) / width); width = 0 gives the sharp indicator
    static Observable smoothed_indicator(ModeBand band, SpectralField center, double radius, double width);
    // f(<u, e_1>, ..., <u, e_m>) with |f| <= bound
    static Observable cylinder(std::vector<SpectralField> directions, PostMap f, double bound);
    static Observable constant(double c);

    Kind kind() const { return kind_; }
    double bound() const { return bound_; }
    double operator()(const SpectralField& u) const;
    double operator()(const std::optional<SpectralField>& u) const { return u ? (*this)(*u) : 0.0; }

    const std::vector<SpectralField>& directions() const { return dirs_; }
    const PostMap& post_map() const { return f_; }
    double width() const { return width_; }
    double radius() const { return radius_; }
    const ModeBand& band() const { return band_; }
    std::string describe() const;

private:
    Kind kind_ = Kind::BoundedCylinder;
    double bound_ = 0.0;
    ModeBand band_;
    SpectralField center_;
    double radius_ = 0.0, width_ = 0.0;
    std::vector<SpectralField> dirs_;
    PostMap f_;
};

double logistic(double x);

// ---------------------------------------------------------------------------
// Monte Carlo plumbing. Path p of an experiment uses noise stream
// stream_offset + p under the master seed; results are reduced in path order,
// so a report does not depend on the thread count.
struct McOptions {
    std::uint64_t seed = 1;
    std::uint64_t stream_offset = 0;
    int threads = 0;   // 0: hardware concurrency
    int batches = 20;  // independent batches for the standard error
};

int resolve_threads(int requested);

// Runs fn(i) for i in [0, n); the first exception is rethrown after joining.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

struct Estimate {
    double value = 0.0;
    double se = 0.0;             // from the spread of batch means
    double pooled_stderr = 0.0;  // sample standard deviation / sqrt(n)
    int n_paths = 0;
    int n_exploded = 0;
    int batches = 0;
};

// Mean of `samples` with the batch-means standard error (contiguous equal batches).
Estimate batch_estimate(std::span<const double> samples, int batches);

enum class GradientMethod { BEL, FiniteDifference };

struct GradientEstimate {
    double value = 0.0;
    double se = 0.0;
    int n_paths = 0;
    int n_exploded = 0;
    GradientMethod method = GradientMethod::BEL;
};

// Time index of t on the grid of cfg (throws off grid or beyond cfg.T).
int step_of(double t, const SolverConfig& cfg);

// Per-path noise.
noise::NoiseRealization path_noise(const SolverConfig& cfg, int steps, const McOptions& mc, int path);

// ---------------------------------------------------------------------------

// P_t Psi(u0) = E Psi(u_t); exploded paths contribute Psi(cemetery) = 0.
// `samples`, if given, receives the per-path values.
Estimate estimate_semigroup(const Observable& psi, const SpectralField& u0, double t, int n_paths,
                            const SolverConfig& cfg, const McOptions& mc, std::vector<double>* samples = nullptr);

// Control of the derivative identity: h_n = -S^{-1} J_{0,n+1} v0 / t for the
// steps n < t/dt, where S = s_k P_k is the per-step noise coefficient. The
// noise enters u_{n+1} through S dW_n, so sum_n J_{n+1,t} S h_n dt = -J_{0,t} v0
// exactly by the chain rule. h_n only uses u_0..u_n (adapted).
noise::Shift build_control(const solver::Trajectory& traj, const SpectralField& v0, double t);

// |sum_n J_{n+1,t} S h_n dt + J_{0,t} v0| / |J_{0,t} v0| with every J
// recomputed by solver::jacobian_apply.
double control_residual(const solver::Trajectory& traj, const noise::Shift& h, const SpectralField& v0, double t);

// out = S^{-1} f for divergence-free f (mode-wise division by s_k).
void apply_inverse_forcing(const noise::OUStepper& ou, const SpectralField& f, SpectralField& out);

// Bismut-Elworthy-Li estimate of D_{v0} P_t Psi(u0):
//   E[ Psi(u_t) (1/t) sum_n <S^{-1} J_{0,n+1} v0, dW_n> ],
// with <.,.> the full-lattice pairing in which E<g, dW>^2 = dt <g, g>.
GradientEstimate bel_gradient(const Observable& psi, const SpectralField& u0, const SpectralField& v0, double t,
                              int n_paths, const SolverConfig& cfg, const McOptions& mc,
                              std::vector<double>* samples = nullptr, std::vector<double>* values = nullptr);

// Common-random-number finite difference (central, step eps).
GradientEstimate fd_gradient(const Observable& psi, const SpectralField& u0, const SpectralField& v0, double t,
                             double eps, int n_paths, const SolverConfig& cfg, const McOptions& mc,
                             std::vector<double>* samples = nullptr);

// BEL and one-sided CRN finite differences on the same paths (one base path
// with its tangent plus one perturbed path per sample).
struct GradientComparison {
    GradientEstimate bel, fd;
    double eps = 0.0;
    double relative_deviation = 0.0;  // |bel - fd| / |fd|
    std::vector<double> bel_samples, fd_samples;
};
GradientComparison gradient_comparison(const Observable& psi, const SpectralField& u0, const SpectralField& v0,
                                       double t, double eps, int n_paths, const SolverConfig& cfg,
                                       const McOptions& mc);

// Exact gradient for the linear (Stokes) dynamics and a one-direction cylinder
// observable Psi(u) = f(<u, e>): <u_t, e> is Gaussian with mean <E^n u0, e> and
// variance dt sum_j <S E^j e, S E^j e>, integrated by Simpson's rule.
struct LinearGaussianOracle {
    double mean = 0.0, sd = 0.0;
    double value = 0.0;     // P_t Psi(u0)
    double gradient = 0.0;  // D_{v0} P_t Psi(u0)
};
LinearGaussianOracle linear_gaussian_oracle(const Observable& psi, const SpectralField& u0, const SpectralField& v0,
                                            double t, const SolverConfig& cfg);

// ---------------------------------------------------------------------------

struct FellerPoint {
    double distance_eta = 0.0;  // Hoelder-eta proxy of |x - y|
    double distance_l2 = 0.0;
    double gap = 0.0, gap_stderr = 0.0;      // sup over the family of |P_t Psi(x) - P_t Psi(y)|
    int argmax = 0;
    double bound = 0.0, bound_stderr = 0.0;  // sup over the family of |D_{y - x} P_t Psi(x)| (BEL)
    bool within_bound = false;
};

struct FellerReport {
    double t = 0.0;
    int n_paths = 0;
    int n_exploded = 0;       // over all runs
    double explosion_fraction = 0.0;
    bool inconclusive = false;  // explosion fraction above 1%
    bool monotone = false;
    bool pass = false;
    std::vector<FellerPoint> points;
    std::vector<double> digest_samples;  // per-path values, for reproducibility checks
};

// ys: a sequence approaching x. Common random numbers across x and all ys.
FellerReport strong_feller_probe(const SpectralField& x, const std::vector<SpectralField>& ys,
                                 const std::vector<Observable>& family, double t, int n_paths,
                                 const SolverConfig& cfg, const McOptions& mc, double eta = -0.4);

// ---------------------------------------------------------------------------

struct ModeStat {
    int k1 = 0, k2 = 0;
    double value = 0.0, se = 0.0;  // estimate and its standard error
    double reference = 0.0;            // what it is compared with
};

// Exact stationary E|u_k|^2 (both components) of the Galerkin OU process.
double stationary_mode_variance(double nu, int k1, int k2);

struct StokesReport {
    std::vector<ModeStat> ratios;  // sample E|z_k|^2 / exact stationary value
    double max_deviation = 0.0;    // max |ratio - 1|
    long long samples = 0;         // paths x sampled steps
    bool trend = false;            // first and second half of the window differ by > 3 stderr
    double trend_z = 0.0;
    std::vector<double> digest_samples;
};

// Linear dynamics from z = 0, burn-in, then per-mode variances sampled every
// `sample_stride` steps over `window`.
StokesReport stokes_invariance(int N, double nu, double dt, double burn_in, double window, int sample_stride,
                               int n_paths, const McOptions& mc);

struct InvarianceReport {
    ModeBand band;
    std::vector<ModeStat> var0, varT;  // E|u_k|^2 / exact, at 0 and T
    std::vector<ModeStat> m4_0, m4T;   // E|u_k|^4 / exact^2 (2 for a Gaussian)
    double drift = 0.0, drift_stderr = 0.0;  // pooled var(T)/var(0) - 1 over the band
    double max_mode_z = 0.0;                 // max paired z-score of the per-mode checks
    double kurtosis0 = 0.0, kurtosis0_stderr = 0.0;  // excess kurtosis of real coordinates at 0
    int n_paths = 0, n_exploded = 0;
    std::vector<double> digest_samples;
};

// Nonlinear run from mu_N samples (z(0) = 0, v(0) ~ mu_N), compared at 0 and cfg.T.
InvarianceReport nonlinear_invariance(const SolverConfig& cfg, int n_paths, ModeBand band, const McOptions& mc);

struct LongRunReport {
    std::vector<ModeStat> ratios;  // time-averaged E|u_k|^2 / exact stationary value
    double pooled = 0.0, pooled_stderr = 0.0;
    double max_mode_z = 0.0;
    long long samples = 0;
    int n_exploded = 0;
    bool trend = false;
    std::vector<double> digest_samples;
};

// Long-run brute force: time averages after burn-in over independent paths.
LongRunReport long_run_variances(const SolverConfig& cfg, double burn_in, double window, int sample_stride,
                                 int n_paths, const McOptions& mc);

// ---------------------------------------------------------------------------

// Deterministic rough datum with aligned phases, scaled to Hoelder-eta proxy `norm_eta`.
SpectralField adversarial_rough_initial(double eta, int N, double norm_eta);

struct GlobalReport {
    int n_paths = 0;
    int n_exploded = 0;
    double explosion_fraction = 0.0;
    std::vector<double> r_final;  // per path (inf if exploded)
    double r_median = 0.0, r_q90 = 0.0, r_max = 0.0;
    bool adversarial_exploded = false;
    double adversarial_r = 0.0;
    double adversarial_norm_eta = 0.0;
};

GlobalReport global_existence_experiment(double eta, int n_paths, double T, const SolverConfig& cfg,
                                         const McOptions& mc);

// ---------------------------------------------------------------------------

struct DerivativeReport {
    std::vector<double> eps;
    std::vector<double> rel_error;
    double min_error = 0.0;
    double best_eps = 0.0;
    bool pass = false;  // min_error <= 1e-3
};

// Sweep eps in {1e-3, ..., 1e-7} of |(u_t(u0 + eps v0) - u_t(u0)) / eps - J v0| / |J v0|.
DerivativeReport derivative_vs_fd(const SpectralField& u0, const SpectralField& v0, double t,
                                  const SolverConfig& cfg, const noise::NoiseRealization& xi);

struct JacobianReport {
    double fd_error = 0.0;     // at eps = 1e-5
    double chain_error = 0.0;  // J_{s,t} = J_{r,t} J_{s,r}
    double linearity_error = 0.0;
    double divergence = 0.0;   // max |k . (J v)_k| / |J v|
};

JacobianReport jacobian_suite(const SpectralField& u0, const SpectralField& v0, const SpectralField& w0, double t,
                              const SolverConfig& cfg, const noise::NoiseRealization& xi);

}  // namespace sns::harness
