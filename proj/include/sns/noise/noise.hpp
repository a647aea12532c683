#pragma once

#include "sns/core/random.hpp"
#include "sns/spectral/field.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace sns::noise {

using spectral::cplx;
using spectral::SpectralField;

struct NoiseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Cameron-Martin direction: h(t_n) for a run of steps, in the units of the
// noise increments (orthonormal mode coordinates), so a step is shifted by h_n dt.
struct Shift {
    int N = 0;
    double dt = 0.0;
    int first_step = 0;  // global step index of h[0]
    std::vector<SpectralField> h;
    double p = 8.0;
    bool divergence_free = true;

    Shift() = default;
    Shift(int N, double dt, int steps, int first_step = 0);

    int steps() const { return static_cast<int>(h.size()); }
    // (sum_n |h_n|^p dt)^{1/p} with |.| the coefficient l2 norm
    double lp_norm() const;
    Shift& operator+=(const Shift& o);
};

Shift operator+(Shift a, const Shift& b);

// Space-time white noise on the Galerkin torus, generated lazily step by step.
// Step n of stream s under master seed m is drawn from its own sub-stream
// derive_seed(m, {s, n}), so any step can be regenerated bit-exactly and
// restarted tails see the same increments. Within a step modes are drawn
// shell by shell, hence the increments for cutoff N are a prefix of those for
// any larger cutoff.
class NoiseRealization {
public:
    NoiseRealization() = default;
    NoiseRealization(int N, double dt, int steps, std::uint64_t seed, std::uint64_t stream = 0);

    int cutoff() const { return n_; }
    double dt() const { return dt_; }
    int steps() const { return steps_; }
    int first_step() const { return first_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    const std::shared_ptr<const Shift>& shift() const { return shift_; }

    // Increment of local step n (0 <= n < steps) including any shift:
    // E|dW_k|^2 = dt per component, Re and Im each dt/2, Hermitian, zero mean mode.
    void increment(int n, SpectralField& out) const;
    void base_increment(int n, SpectralField& out) const;  // without the shift
    SpectralField increment(int n) const;

    // The same realization seen from local step `from` on.
    NoiseRealization tail(int from) const;
    // Same randomness with a smaller or larger mode set.
    NoiseRealization with_cutoff(int N) const;
    // Shorter horizon (prefix).
    NoiseRealization truncated(int steps) const;
    // Same randomness multiplied by a (a = 0: the zero noise); shifts are not scaled.
    NoiseRealization scaled(double a) const;
    double amplitude() const { return amp_; }

    friend NoiseRealization apply_shift(const NoiseRealization& xi, const Shift& h);

private:
    int n_ = 0;
    double dt_ = 0.0;
    int steps_ = 0;
    int first_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    double amp_ = 1.0;
    std::shared_ptr<const Shift> shift_;
};

NoiseRealization sample_white_noise(int N, double dt, int steps, std::uint64_t seed, std::uint64_t stream = 0);
NoiseRealization zero_noise(int N, double dt, int steps);

// Adds h_n dt to the increments. Shifts accumulate additively, so
// apply_shift(apply_shift(xi, h), g) and apply_shift(xi, h + g) coincide bit for bit.
NoiseRealization apply_shift(const NoiseRealization& xi, const Shift& h);

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck part z: dz = nu Laplace z dt + P dW / (2 pi).

// Per-mode exact update z <- e^{-lambda dt} z + s_k P dW_k, with lambda = nu |k|^2
// and s_k = sqrt((1 - e^{-2 lambda dt}) / (2 lambda dt)) / (2 pi): exact in law.
class OUStepper {
public:
    OUStepper(int N, double nu, double dt);
    int cutoff() const { return n_; }
    double nu() const { return nu_; }
    double dt() const { return dt_; }
    double decay(int k1, int k2) const { return decay_[idx(k1, k2)]; }
    double noise_scale(int k1, int k2) const { return scale_[idx(k1, k2)]; }
    // z <- E z + S P dW
    void step(SpectralField& z, const SpectralField& dW) const;
    // out <- S P dW (the stochastic forcing of one step)
    void forcing(const SpectralField& dW, SpectralField& out) const;

private:
    std::size_t idx(int k1, int k2) const {
        return static_cast<std::size_t>(k1 + n_) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(k2);
    }
    int n_;
    double nu_, dt_;
    std::vector<double> decay_, scale_;
};

enum class OUOrigin { ZeroStart, Stationary, Unknown };

// Which covariance a z carries; needed to Wick-order it.
struct OUProvenance {
    OUOrigin origin = OUOrigin::Unknown;
    double nu = 1.0;
    double elapsed = 0.0;  // time since the zero start
};

struct OUPath {
    double nu = 1.0;
    double dt = 0.0;
    bool stationary = false;
    OUOrigin origin = OUOrigin::Unknown;
    int stride = 1;
    std::vector<double> times;
    std::vector<SpectralField> z;

    OUProvenance provenance(std::size_t snapshot) const;
};

// z0 = 0 gives the zero-start provenance; a caller passing a stationary
// sample says so through z0_stationary. Any other z0 has unknown provenance.
OUPath stochastic_convolution(const NoiseRealization& xi, double nu, const SpectralField& z0,
                              bool z0_stationary = false, int snapshot_stride = 1);

enum class Truncation { Square, Disc };

// E[z_i(x) z_j(x)] for the Galerkin OU process started from 0 at time 0 and
// observed at time t (t = infinity for the stationary law).
std::array<std::array<double, 2>, 2> wick_constant(int N, double nu, double t,
                                                  Truncation trunc = Truncation::Square);

// Pointwise z_i z_j - c_ij on the M x M grid; entries (11, 12, 22).
struct WickProducts {
    int M = 0;
    std::array<spectral::RealGrid, 3> values;
    std::array<double, 3> constants{};
};

WickProducts wick_pair(const SpectralField& z, const OUProvenance& prov, int M = 0);

// Stationary Gaussian sample: u_k = P_k g_k / (2 pi sqrt(2 nu |k|^2)).
SpectralField sample_stationary(int N, double nu, std::uint64_t seed, std::uint64_t stream = 0);

// Divergence-free Gaussian field with |u_k| ~ |k|^{-(eta + 1)}, zero mean mode.
SpectralField sample_rough_initial(double eta, int N, std::uint64_t seed, std::uint64_t stream = 0);

// ---------------------------------------------------------------------------
// Hoelder-type norms.
//
// alpha <= 0: sup_j 2^{j alpha} |Delta_j f|_inf over sharp dyadic annuli
//             2^{j-1} <= |k| < 2^j (block 0 is the mean).
// 0 < alpha < 1: |f|_inf + max over dyadic lattice shifts r of
//             |f(x + r) - f(x)| / |r|^alpha (first differences).
double holder_norm(const SpectralField& f, double alpha);

// Sup norms of the dyadic blocks of f, block j = 0..J (max over components).
std::vector<double> dyadic_block_sups(const SpectralField& f);

// Grid versions for values already on an M x M grid of [0, 2pi)^2.
double sup_norm_grid(const double* g, int M);
double holder_seminorm_grid(const double* g, int M, double alpha);

}  // namespace sns::noise
