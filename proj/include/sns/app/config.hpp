#pragma once

#include "sns/core/rational.hpp"
#include "sns/solver/solver.hpp"
#include "sns/structure/structure.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sns::app {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KernelSection {
    std::string kernel = "leray";  // leray | heat
    int d = 2;                     // spatial dimension of the kernel
    int component_i = 0, component_j = 0;
    double nu = 1.0;
    Rational step{1, 256};         // spatial grid step
    Rational time_step{1, 4096};   // heat kernel only
    int levels = 8;
    int order = 2;
    int k_max = 2;                 // derivatives checked by verify
    double bound_factor = 4.0;
};

struct InitialSection {
    std::string kind = "zero";  // zero | stationary | rough | adversarial
    double eta = -0.4;          // rough / adversarial class
    double scale = 1.0;         // multiplies the sampled datum; adversarial: its eta-norm
    std::uint64_t stream = 0;
};

struct ExperimentSection {
    int paths = 200;
    double t = 0.5;
    double eps = 1e-4;            // finite-difference step
    std::string observable = "cylinder";  // cylinder | indicator
    int direction_k1 = 0, direction_k2 = 1;  // v0 and the cylinder direction
    double width = 0.05;          // logistic width
    double radius = 0.5;          // indicator radius
    int band_kmin = 1, band_kmax = 2;
    // Feller sweep: distances of y from x along v0, in the L2 norm
    std::vector<double> distances{0.1, 0.05, 0.025};
    std::vector<double> widths{0.1, 0.05};
    double burn_in = 5.0;
    double window = 20.0;
    int sample_stride = 1;
    // Stokes part of the invariance test
    int stokes_N = 16;
    double stokes_dt = 0.02;
    int stokes_paths = 1000;
    // long-run brute force
    int brute_N = 2;
    double brute_dt = 1e-3;
    int brute_paths = 20;
    double brute_burn_in = 2.0;
    double brute_window = 200.0;
    int brute_stride = 10;
    // parts of gradient-check (control, calibration, comparison) or
    // invariance-test (stokes, nonlinear, brute); "all" runs every part
    std::string parts = "all";
    int calibration_paths = 20000;
    int control_pairs = 20;
    int group_trials = 100;       // structure renorm-dim: random (g, h) pairs, 0 skips
    double noise_scale = 1.0;     // simulate: multiplies the noise (0: deterministic)
};

struct RunConfig {
    std::uint64_t seed = 1;
    int threads = 0;
    int batches = 20;
    structure::StructureSpec structure;
    bool alpha_given = false;  // otherwise the d-dependent default
    KernelSection kernels;
    solver::SolverConfig solver;
    InitialSection initial;
    ExperimentSection experiment;
};

// Defaults, then the INI text (sections [run] [structure] [kernels] [solver]
// [initial] [experiment]); unknown sections or keys are errors.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);
// Constraint checks of every section.
void validate(const RunConfig& cfg);

// Every key with its value, sections and keys sorted; doubles in %.17g.
std::string serialize(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);  // SHA-256 of serialize()

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Applies "section.key=value" overrides.
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace sns::app
