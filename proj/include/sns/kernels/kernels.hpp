#pragma once

#include "sns/core/scaling.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sns::kernels {

struct KernelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// z = (t, x_1, ..., x_d): sum_i |z_i - z'_i|^{1/s_i}
double scaled_distance(const std::vector<double>& z, const std::vector<double>& zp, const Scaling& s);

// Uniform sampling grid. With time_axis set, axis 0 is time (weight s0 = 2)
// and the remaining axes are space.
struct Grid {
    std::vector<int> shape;
    std::vector<double> origin;
    std::vector<double> step;
    bool time_axis = false;

    int ndim() const { return static_cast<int>(shape.size()); }
    int space_dim() const { return ndim() - (time_axis ? 1 : 0); }
    std::size_t size() const;
    double cell_volume() const;
    double coord(int axis, int i) const { return origin[static_cast<std::size_t>(axis)] + i * step[static_cast<std::size_t>(axis)]; }
    // Symmetric grid [-extent, extent] per axis with the given steps.
    static Grid centered(const std::vector<double>& extent, const std::vector<double>& step, bool time_axis);
    bool compatible(const Grid& o) const;
};

// Iterate multi-dimensional indices in row-major order (last axis fastest).
void for_each_point(const Grid& g, const std::function<void(std::size_t, const std::vector<double>&)>& fn);

struct GridFunction {
    Grid grid;
    std::vector<double> values;
};

GridFunction sample(const Grid& g, const std::function<double(const std::vector<double>&)>& f);

// Homogeneous norm: Euclidean |x| without a time axis, (t^2 + |x|^4)^{1/4} with one.
double homogeneous_norm(const Grid& g, const std::vector<double>& z);

// Heat kernel of d/dt - nu Laplace on R^d, zero for t <= 0.
double heat_kernel(double nu, double t, const std::vector<double>& x);

// Leray kernel entry (i, j) on R^d (d = 2 or 3): the homogeneous degree -d
// part of the Leray projector in physical space (principal value sense).
double leray_kernel(int i, int j, const std::vector<double>& x);

// Fourier symbol I - k k^T / |k|^2 (row-major d x d); identity at k = 0.
std::vector<double> leray_symbol(const std::vector<int>& k);

struct DecomposeOptions {
    int levels = 8;          // N_lev: levels 0..N_lev
    int order = 2;           // vanishing moments up to this weighted order (-1: none)
    bool check_smoothness = true;
};

// K = sum_n P_n (+ R). Level n is supported in the ball homogeneous_norm <= 2^{-n} + h
// and, for order r > 0, has vanishing discrete moments for every monomial z^m
// with |m|_s <= r.
struct DyadicKernel {
    Grid grid;
    int order = 0;
    int regularity = 0;      // 0 or 2: the beta of a beta-regularising kernel
    std::vector<std::vector<double>> levels;
    std::vector<double> remainder;  // smooth part f - sum_n P_n

    int level_count() const { return static_cast<int>(levels.size()); }
    double support_radius(int n) const;
    std::vector<double> sum_levels() const;
};

struct KernelPair {
    DyadicKernel K;  // singular part, levels and moment corrections
    std::vector<double> R;  // smooth remainder (same as K.remainder)
    double nu = 1.0;
};

// Smooth cutoff: 1 on [0, 1/2], 0 on [1, inf).
double cutoff(double r);

DyadicKernel dyadic_decompose(const GridFunction& samples, const DecomposeOptions& opt, int regularity = 0);

// Heat kernel sampled on the space-time grid g (time axis required).
KernelPair heat_kernel_split(double nu, const Grid& g, const DecomposeOptions& opt = {});

// Monomial exponents z^m with |m|_s <= r on the grid's axes.
std::vector<std::vector<int>> monomials(const Grid& g, int r);
// Discrete moments sum_z f(z) z^m h^{dim}
std::vector<double> moments(const Grid& g, const std::vector<double>& f, const std::vector<std::vector<int>>& mons);

struct BoundFit {
    std::vector<int> derivative;  // multi-index (per axis)
    int weighted_order = 0;
    double expected_exponent = 0;
    double fitted_exponent = 0;
    std::vector<int> levels_used;
    std::vector<double> sup;        // sup |D^k P_n| per level used
    std::vector<double> constants;  // sup / 2^{n(expected)}
    double ratio = 0;               // max/min constant
    bool pass = false;
};

struct BoundReport {
    std::vector<BoundFit> fits;
    double factor = 4.0;
    bool pass = true;
    std::string message;
};

// sup |D^k P_n| <= C 2^{n(|s| + |k|_s - beta)} uniformly in n, checked on the
// levels whose support radius spans at least resolve_cells cells along every
// axis (the last level, which carries the whole singular core, is excluded).
BoundReport verify_regularising_bounds(const DyadicKernel& dk, int k_max, double factor = 4.0,
                                       double exponent_tol = 0.5, double resolve_cells = 32.0);

// Space-time kernel (grid with time axis) convolved in space with a purely
// spatial kernel, slab by slab, on the space-time kernel's grid.
GridFunction convolve_KP(const GridFunction& K, const GridFunction& P);
GridFunction convolve_KP(const KernelPair& K, const DyadicKernel& Pbar);

// ---------------------------------------------------------------------------
// Binary grid files: "SNSGRID\0", u32 version, u32 ndim, u32 nlevels,
// u32 flags (bit 0: time axis), u64 seed, u64 stream, u64 shape[ndim],
// f64 origin[ndim], f64 step[ndim], then nlevels blocks of prod(shape) f64,
// everything little endian.
struct GridFile {
    Grid grid;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::vector<std::vector<double>> blocks;
};

void write_grid_file(const std::string& path, const GridFile& f);
GridFile read_grid_file(const std::string& path);

}  // namespace sns::kernels
