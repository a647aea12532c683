#include "sns/app/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>

namespace sns::app {

namespace {

std::string fmt_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);  // shortest round trip
    return std::string(buf, res.ptr);
}

template <class T>
T parse_integer(const std::string& s, const std::string& key) {
    T v{};
    const auto* b = s.data();
    const auto* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw ConfigError(key + ": expected an integer, got '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const std::string& key) {
    if (s.empty()) throw ConfigError(key + ": expected a number, got ''");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + s + "'");
}

Rational parse_rat(const std::string& s, const std::string& key) {
    try {
        return parse_rational(s);
    } catch (const std::exception& e) {
        throw ConfigError(key + ": expected a rational (p/q or decimal), got '" + s + "'");
    }
}

std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        out.push_back(parse_double(item, key));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
    return s;
}

std::string choice(const std::string& s, const std::string& key, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (s == a) return s;
    std::string msg = key + ": '" + s + "' is not one of";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw ConfigError(msg);
}

struct Field {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

using Schema = std::map<std::string, std::map<std::string, Field>>;

#define SNS_INT(sec, key, expr)                                                                                 \
    s[sec][key] = Field{[](const RunConfig& c) { return std::to_string(c.expr); },                            \
                        [](RunConfig& c, const std::string& v, const std::string& k) {                        \
                            c.expr = parse_integer<std::remove_reference_t<decltype(c.expr)>>(v, k);           \
                        }}
#define SNS_DBL(sec, key, expr)                                                                                  \
    s[sec][key] = Field{[](const RunConfig& c) { return fmt_double(c.expr); },                                  \
                        [](RunConfig& c, const std::string& v, const std::string& k) { c.expr = parse_double(v, k); }}
#define SNS_BOOL(sec, key, expr)                                                                                 \
    s[sec][key] = Field{[](const RunConfig& c) { return std::string(c.expr ? "true" : "false"); },              \
                        [](RunConfig& c, const std::string& v, const std::string& k) { c.expr = parse_bool(v, k); }}
#define SNS_RAT(sec, key, expr)                                                                                  \
    s[sec][key] = Field{[](const RunConfig& c) { return to_string(c.expr); },                                    \
                        [](RunConfig& c, const std::string& v, const std::string& k) { c.expr = parse_rat(v, k); }}
#define SNS_CHOICE(sec, key, expr, ...)                                                                          \
    s[sec][key] = Field{[](const RunConfig& c) { return c.expr; },                                               \
                        [](RunConfig& c, const std::string& v, const std::string& k) {                          \
                            c.expr = choice(v, k, {__VA_ARGS__});                                                \
                        }}

const Schema& schema() {
    static const Schema sch = [] {
        Schema s;
        SNS_INT("run", "seed", seed);
        SNS_INT("run", "threads", threads);
        SNS_INT("run", "batches", batches);

        SNS_INT("structure", "d", structure.scaling.d);
        s["structure"]["alpha"] = Field{[](const RunConfig& c) { return to_string(c.structure.alpha); },
                                        [](RunConfig& c, const std::string& v, const std::string& k) {
                                            c.structure.alpha = parse_rat(v, k);
                                            c.alpha_given = true;
                                        }};
        SNS_RAT("structure", "kappa", structure.kappa);
        SNS_RAT("structure", "gamma_cut", structure.gamma_cut);
        SNS_INT("structure", "max_levels", structure.max_levels);
        s["structure"]["index_mode"] = Field{
            [](const RunConfig& c) {
                return std::string(c.structure.index_mode == structure::IndexMode::Shape ? "shape" : "concrete");
            },
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.structure.index_mode =
                    choice(v, k, {"shape", "concrete"}) == "shape" ? structure::IndexMode::Shape : structure::IndexMode::Concrete;
            }};
        s["structure"]["level_policy"] = Field{
            [](const RunConfig& c) {
                return std::string(c.structure.level_policy == structure::LevelPolicy::RequireStable ? "require-stable"
                                                                                                      : "partial");
            },
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.structure.level_policy = choice(v, k, {"require-stable", "partial"}) == "partial"
                                               ? structure::LevelPolicy::Partial
                                               : structure::LevelPolicy::RequireStable;
            }};

        SNS_CHOICE("kernels", "kernel", kernels.kernel, "leray", "heat");
        SNS_INT("kernels", "d", kernels.d);
        SNS_INT("kernels", "component_i", kernels.component_i);
        SNS_INT("kernels", "component_j", kernels.component_j);
        SNS_DBL("kernels", "nu", kernels.nu);
        SNS_RAT("kernels", "step", kernels.step);
        SNS_RAT("kernels", "time_step", kernels.time_step);
        SNS_INT("kernels", "levels", kernels.levels);
        SNS_INT("kernels", "order", kernels.order);
        SNS_INT("kernels", "k_max", kernels.k_max);
        SNS_DBL("kernels", "bound_factor", kernels.bound_factor);

        SNS_DBL("solver", "nu", solver.nu);
        SNS_INT("solver", "N", solver.N);
        SNS_DBL("solver", "dt", solver.dt);
        SNS_DBL("solver", "T", solver.T);
        SNS_DBL("solver", "eta", solver.eta);
        SNS_DBL("solver", "R_max", solver.R_max);
        SNS_BOOL("solver", "wick", solver.wick);
        SNS_BOOL("solver", "nonlinear", solver.nonlinear);
        SNS_INT("solver", "monitor_stride", solver.monitor_stride);
        SNS_INT("solver", "snapshot_stride", solver.snapshot_stride);
        SNS_DBL("solver", "courant", solver.courant);
        SNS_DBL("solver", "u_ref", solver.u_ref);
        SNS_DBL("solver", "gamma", solver.gamma);

        SNS_CHOICE("initial", "kind", initial.kind, "zero", "stationary", "rough", "adversarial");
        SNS_DBL("initial", "eta", initial.eta);
        SNS_DBL("initial", "scale", initial.scale);
        SNS_INT("initial", "stream", initial.stream);

        SNS_INT("experiment", "paths", experiment.paths);
        SNS_DBL("experiment", "t", experiment.t);
        SNS_DBL("experiment", "eps", experiment.eps);
        SNS_CHOICE("experiment", "observable", experiment.observable, "cylinder", "indicator");
        SNS_INT("experiment", "direction_k1", experiment.direction_k1);
        SNS_INT("experiment", "direction_k2", experiment.direction_k2);
        SNS_DBL("experiment", "width", experiment.width);
        SNS_DBL("experiment", "radius", experiment.radius);
        SNS_INT("experiment", "band_kmin", experiment.band_kmin);
        SNS_INT("experiment", "band_kmax", experiment.band_kmax);
        s["experiment"]["distances"] =
            Field{[](const RunConfig& c) { return fmt_list(c.experiment.distances); },
                  [](RunConfig& c, const std::string& v, const std::string& k) { c.experiment.distances = parse_list(v, k); }};
        s["experiment"]["widths"] =
            Field{[](const RunConfig& c) { return fmt_list(c.experiment.widths); },
                  [](RunConfig& c, const std::string& v, const std::string& k) { c.experiment.widths = parse_list(v, k); }};
        SNS_DBL("experiment", "burn_in", experiment.burn_in);
        SNS_DBL("experiment", "window", experiment.window);
        SNS_INT("experiment", "sample_stride", experiment.sample_stride);
        SNS_INT("experiment", "stokes_N", experiment.stokes_N);
        SNS_DBL("experiment", "stokes_dt", experiment.stokes_dt);
        SNS_INT("experiment", "stokes_paths", experiment.stokes_paths);
        SNS_INT("experiment", "brute_N", experiment.brute_N);
        SNS_DBL("experiment", "brute_dt", experiment.brute_dt);
        SNS_INT("experiment", "brute_paths", experiment.brute_paths);
        SNS_DBL("experiment", "brute_burn_in", experiment.brute_burn_in);
        SNS_DBL("experiment", "brute_window", experiment.brute_window);
        SNS_INT("experiment", "brute_stride", experiment.brute_stride);
        s["experiment"]["parts"] = Field{[](const RunConfig& c) { return c.experiment.parts; },
                                         [](RunConfig& c, const std::string& v, const std::string& k) {
                                             std::stringstream ss(v);
                                             std::string item;
                                             while (std::getline(ss, item, ','))
                                                 choice(item, k, {"all", "stokes", "nonlinear", "brute", "control", "calibration", "comparison"});
                                             c.experiment.parts = v;
                                         }};
        SNS_INT("experiment", "calibration_paths", experiment.calibration_paths);
        SNS_INT("experiment", "control_pairs", experiment.control_pairs);
        SNS_INT("experiment", "group_trials", experiment.group_trials);
        SNS_DBL("experiment", "noise_scale", experiment.noise_scale);
        return s;
    }();
    return sch;
}

#undef SNS_INT
#undef SNS_DBL
#undef SNS_BOOL
#undef SNS_RAT
#undef SNS_CHOICE

void set_key(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
    const auto& s = schema();
    auto sec = s.find(section);
    if (sec == s.end()) throw ConfigError("unknown section [" + section + "]");
    auto f = sec->second.find(key);
    if (f == sec->second.end()) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
    f->second.set(cfg, value, section + "." + key);
}

void finish(RunConfig& cfg) {
    if (!cfg.alpha_given)
        cfg.structure.alpha = cfg.structure.scaling.d == 2 ? Rational(-201, 100) : Rational(-51, 20);
    cfg.solver.seed = cfg.seed;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("key '" + section + "' outside any section");
        for (const auto& [key, node] : body) set_key(cfg, section, key, node.data());
    }
    finish(cfg);
    validate(cfg);
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError("override must look like section.key=value: '" + assignment + "'");
    set_key(cfg, assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1), assignment.substr(eq + 1));
    finish(cfg);
    validate(cfg);
}

void validate(const RunConfig& cfg) {
    try {
        cfg.structure.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("[structure] ") + e.what());
    }
    try {
        cfg.solver.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("[solver] ") + e.what() +
                          "; lower dt, or raise courant/u_ref only if the velocity bound allows it");
    }
    const auto& k = cfg.kernels;
    if (k.d != 2 && k.d != 3) throw ConfigError("[kernels] d must be 2 or 3");
    if (k.component_i < 0 || k.component_i >= k.d || k.component_j < 0 || k.component_j >= k.d)
        throw ConfigError("[kernels] component indices must lie in 0..d-1");
    if (k.step <= Rational(0) || k.time_step <= Rational(0)) throw ConfigError("[kernels] grid steps must be positive");
    if (k.levels < 0 || k.order < -1 || k.k_max < 0) throw ConfigError("[kernels] levels, order, k_max out of range");
    if (!(k.nu > 0)) throw ConfigError("[kernels] nu must be positive");
    const auto& e = cfg.experiment;
    if (e.paths < 1 || e.stokes_paths < 1 || e.brute_paths < 1 || e.calibration_paths < 1 || e.control_pairs < 1)
        throw ConfigError("[experiment] path counts must be >= 1");
    if (!(e.t >= 0) || e.t > cfg.solver.T + 1e-12)
        throw ConfigError("[experiment] t must lie in [0, solver.T]");
    if (!(e.eps > 0)) throw ConfigError("[experiment] eps must be positive");
    if (e.band_kmin < 0 || e.band_kmax < e.band_kmin) throw ConfigError("[experiment] empty mode band");
    if (cfg.batches < 2) throw ConfigError("[run] batches must be >= 2");
    if (cfg.threads < 0) throw ConfigError("[run] threads must be >= 0");
    if (cfg.initial.kind == "rough" || cfg.initial.kind == "adversarial")
        if (!(cfg.initial.eta > -1 && cfg.initial.eta < 0)) throw ConfigError("[initial] eta must lie in (-1, 0)");
}

std::string serialize(const RunConfig& cfg) {
    std::string out;
    for (const auto& [section, fields] : schema()) {
        out += "[" + section + "]\n";
        for (const auto& [key, f] : fields) out += key + "=" + f.get(cfg) + "\n";
    }
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(serialize(cfg)); }

}  // namespace sns::app
