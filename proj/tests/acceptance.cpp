// Acceptance suite: runs the toolkit commands on the configs in
// tests/acceptance and prints one PASS/FAIL line per criterion.
#include "sns/app/commands.hpp"
#include "sns/app/config.hpp"
#include "sns/kernels/kernels.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifndef SNS_ACCEPTANCE_CONFIGS
#define SNS_ACCEPTANCE_CONFIGS "tests/acceptance"
#endif

namespace fs = std::filesystem;
using sns::app::CommandResult;

namespace {

fs::path g_configs = SNS_ACCEPTANCE_CONFIGS;
fs::path g_out = "acceptance_out";

struct Invocation {
    std::string tag;  // subdirectory of the criterion's output
    std::string command;
    std::string ini;
    std::vector<std::string> overrides;
};

struct Run {
    CommandResult result;
    double seconds = 0;
    fs::path dir;
};

Run execute(const Invocation& inv, const fs::path& dir) {
    auto cfg = sns::app::parse_config_file(g_configs / inv.ini);
    for (const auto& o : inv.overrides) sns::app::apply_override(cfg, o);
    sns::app::validate(cfg);
    fs::remove_all(dir);
    sns::app::Output out(dir);
    const auto started = sns::app::utc_timestamp();
    const auto t0 = std::chrono::steady_clock::now();
    Run r;
    r.result = sns::app::run_command(inv.command, cfg, out);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sns::app::write_manifest(out, inv.command, cfg, started, sns::app::utc_timestamp());
    r.dir = dir;
    return r;
}

double value(const CommandResult& r, const std::string& name) {
    for (const auto& c : r.checks)
        if (c.name == name) return c.value;
    return std::nan("");
}

std::string failed_checks(const CommandResult& r) {
    std::string s;
    for (const auto& c : r.checks)
        if (!c.pass) s += (s.empty() ? "" : ",") + c.name;
    return s;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

struct Verdict {
    bool pass = true;
    std::vector<std::string> notes;
    void require(bool ok, const std::string& note) {
        if (!ok) pass = false;
        notes.push_back(note + (ok ? "" : " [fail]"));
    }
};

// Runs every invocation, requires all checks to pass and the summed wall
// time to stay under budget_s.
std::vector<Run> run_all(const std::string& crit, const std::vector<Invocation>& invs, double budget_s, Verdict& v) {
    std::vector<Run> runs;
    double total = 0;
    for (const auto& inv : invs) {
        runs.push_back(execute(inv, g_out / crit / inv.tag));
        const auto& r = runs.back();
        total += r.seconds;
        const auto bad = failed_checks(r.result);
        v.require(bad.empty(), inv.tag + (bad.empty() ? " checks pass" : " failed: " + bad));
    }
    v.require(total < budget_s, "wall " + fmt(total) + " s < " + fmt(budget_s) + " s");
    return runs;
}

// ---------------------------------------------------------------------------
// criteria

struct Criterion {
    int id;
    std::string title;
    std::vector<Invocation> invocations;
    double budget_s;
    std::function<void(const std::vector<Run>&, Verdict&)> extra;
    // partial rerun for reproducibility: overrides shrinking the path counts;
    // empty means a full rerun compared checksum by checksum
    std::vector<std::string> shrink;
};

std::vector<std::string> column(const fs::path& tsv, std::size_t col) {
    std::ifstream in(tsv);
    std::string line;
    std::vector<std::string> out;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t i = 0; i <= col && std::getline(ss, cell, '\t'); ++i) {
        }
        out.push_back(cell);
    }
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
    return s;
}

void check_shapes(const std::vector<Run>& runs, Verdict& v) {
    // a = alpha + 2: d = 3, alpha = -51/20 gives a = -11/20 and the degrees
    // 2a, 3a+1, a, 4a+2 (twice), 2a+1 (three times), 0
    const std::vector<std::string> d3{"-11/10", "-13/20", "-11/20", "-1/5", "-1/5", "-1/10", "-1/10", "-1/10", "0/1"};
    // d = 2, alpha = -201/100: a = -1/100, degrees 2a, a, 0
    const std::vector<std::string> d2{"-1/50", "-1/100", "0/1"};
    const auto g3 = column(runs[0].dir / "shapes.tsv", 0);
    const auto g2 = column(runs[1].dir / "shapes.tsv", 0);
    v.require(g3.size() == 9, "d=3 shapes " + std::to_string(g3.size()) + " == 9");
    v.require(g3 == d3, "d=3 degrees {" + join(g3) + "}");
    v.require(g2.size() == 3, "d=2 shapes " + std::to_string(g2.size()) + " == 3");
    v.require(g2 == d2, "d=2 degrees {" + join(g2) + "}");
    for (const auto& r : runs) v.require(r.seconds < 1.0, r.dir.filename().string() + " " + fmt(r.seconds) + " s < 1 s");
}

void check_dimension(const std::vector<Run>& runs, Verdict& v) {
    const double dim = value(runs[0].result, "renorm_dimension");
    // 3^4 + 3 * 3^10
    v.require(dim == 177228.0, "dimension " + fmt(dim) + " == 177228");
}

void check_group(const std::vector<Run>& runs, Verdict& v) {
    v.require(value(runs[0].result, "group_law_trials") >= 100, "100 random pairs");
    v.require(value(runs[0].result, "group_law_failures") == 0, "group law exact");
}

void check_wick(const std::vector<Run>& runs, Verdict& v) {
    const auto a = sns::kernels::read_grid_file((runs[0].dir / "snapshots.grid").string());
    const auto b = sns::kernels::read_grid_file((runs[1].dir / "snapshots.grid").string());
    double worst = a.blocks.size() == b.blocks.size() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(a.blocks.size(), b.blocks.size()); ++i) {
        double diff = 0, scale = 0;
        for (std::size_t j = 0; j < a.blocks[i].size(); ++j) {
            diff = std::max(diff, std::abs(a.blocks[i][j] - b.blocks[i][j]));
            scale = std::max(scale, std::abs(b.blocks[i][j]));
        }
        worst = std::max(worst, diff / std::max(scale, 1e-300));
    }
    v.require(worst <= 1e-12, "renormalised vs plain max relative difference " + fmt(worst) + " <= 1e-12");
}

std::vector<Criterion> criteria() {
    std::vector<Criterion> c;
    c.push_back({1, "negative sector shapes",
                 {{"d3", "structure negative", "c01_d3.ini", {}}, {"d2", "structure negative", "c01_d2.ini", {}}},
                 2.0, check_shapes, {}});
    c.push_back({2, "renormalisation group dimension", {{"dim", "structure renorm-dim", "c02.ini", {}}}, 1.0,
                 check_dimension, {}});
    c.push_back({3, "renormalisation group law", {{"group", "structure renorm-dim", "c03.ini", {}}}, 10.0,
                 check_group, {}});
    c.push_back({4, "kernel decomposition",
                 {{"leray00", "kernels verify", "c04_leray.ini", {"kernels.component_i=0", "kernels.component_j=0"}},
                  {"leray01", "kernels verify", "c04_leray.ini", {"kernels.component_i=0", "kernels.component_j=1"}},
                  {"leray11", "kernels verify", "c04_leray.ini", {"kernels.component_i=1", "kernels.component_j=1"}},
                  {"heat", "kernels verify", "c04_heat.ini", {}}},
                 60.0, nullptr, {}});
    c.push_back({5, "Stokes invariance", {{"stokes", "invariance-test", "c05.ini", {}}}, 120.0, nullptr, {}});
    c.push_back({6, "renormalisation drops out",
                 {{"wick", "simulate", "c06.ini", {"solver.wick=true"}},
                  {"plain", "simulate", "c06.ini", {"solver.wick=false"}}},
                 60.0, check_wick, {}});
    c.push_back({7, "Jacobian consistency", {{"jacobian", "jacobian-check", "c07.ini", {}}}, 300.0, nullptr, {}});
    c.push_back({8, "control identity", {{"control", "gradient-check", "c08.ini", {}}}, 300.0, nullptr, {}});
    c.push_back({9, "BEL gradient estimator", {{"gradient", "gradient-check", "c09.ini", {}}}, 1800.0, nullptr,
                 {"experiment.paths=200", "experiment.calibration_paths=500", "run.threads=2"}});
    c.push_back({10, "invariance of mu_N", {{"invariance", "invariance-test", "c10.ini", {}}}, 3600.0, nullptr,
                 {"experiment.paths=40", "experiment.stokes_paths=50", "experiment.brute_paths=2", "run.threads=2"}});
    c.push_back({11, "strong Feller probe", {{"feller", "feller-test", "c11.ini", {}}}, 3600.0, nullptr,
                 {"experiment.paths=40", "run.threads=2"}});
    c.push_back({12, "global existence", {{"global", "global-test", "c12.ini", {}}}, 7200.0, nullptr,
                 {"experiment.paths=20", "run.threads=2"}});
    return c;
}

std::string crit_dir(int id) {
    std::ostringstream os;
    os << "c" << std::setw(2) << std::setfill('0') << id;
    return os.str();
}

std::map<std::string, std::string> manifest_outputs(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) return {};
    const auto j = nlohmann::json::parse(in);
    return j.at("outputs").get<std::map<std::string, std::string>>();
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> v;
    std::string line;
    while (std::getline(in, line)) v.push_back(line);
    return v;
}

// Reruns criterion cr with its seed and compares against the first run:
// full reruns must reproduce every checksum, partial reruns the leading
// per-path records line by line.
void reproduce(const Criterion& cr, Verdict& v) {
    const std::string name = crit_dir(cr.id);
    for (const auto& inv : cr.invocations) {
        const fs::path first = g_out / name / inv.tag;
        if (!fs::exists(first / "manifest.json")) execute(inv, first);
        const auto ref = manifest_outputs(first);
        auto rerun = inv;
        rerun.overrides.insert(rerun.overrides.end(), cr.shrink.begin(), cr.shrink.end());
        const auto r = execute(rerun, g_out / "c13" / name / inv.tag);
        const auto got = manifest_outputs(r.dir);
        const std::string label = name + "/" + inv.tag;
        if (cr.shrink.empty()) {
            v.require(!ref.empty() && ref == got, label + " checksums identical");
            continue;
        }
        std::size_t compared = 0;
        bool same = true;
        for (const auto& [file, sum] : got) {
            if (file.rfind("records_", 0) != 0) continue;
            const auto a = lines_of(first / file);
            const auto b = lines_of(r.dir / file);
            same = same && !b.empty() && b.size() <= a.size() && std::equal(b.begin(), b.end(), a.begin());
            compared += b.size();
        }
        v.require(same && compared > 0,
                  label + " " + std::to_string(compared) + " leading path records identical (threads=2)");
    }
}

void print(int id, const std::string& title, const Verdict& v, double seconds) {
    std::cout << "criterion " << std::setw(2) << std::setfill('0') << id << std::setfill(' ') << " " << title << ": "
              << (v.pass ? "PASS" : "FAIL") << "  (";
    for (std::size_t i = 0; i < v.notes.size(); ++i) std::cout << (i ? "; " : "") << v.notes[i];
    std::cout << "; " << fmt(seconds) << " s)" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance suite"};
    std::vector<int> selected;
    std::string configs = g_configs.string(), out = g_out.string();
    app.add_option("--criterion,-c", selected, "criteria to run (1-13, default all)")->check(CLI::Range(1, 13));
    app.add_option("--configs", configs, "directory of the acceptance configs");
    app.add_option("--out", out, "output root");
    CLI11_PARSE(app, argc, argv);
    g_configs = configs;
    g_out = out;
    if (selected.empty())
        for (int i = 1; i <= 13; ++i) selected.push_back(i);

    const auto all = criteria();
    bool ok = true;
    for (int id : selected) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        std::string title = "reproducibility";
        try {
            if (id == 13) {
                for (const auto& cr : all) reproduce(cr, v);
            } else {
                const auto& cr = all[static_cast<std::size_t>(id - 1)];
                title = cr.title;
                const auto runs = run_all(crit_dir(id), cr.invocations, cr.budget_s, v);
                if (cr.extra) cr.extra(runs, v);
            }
        } catch (const std::exception& e) {
            v.require(false, std::string("error: ") + e.what());
        }
        print(id, title, v, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        ok = ok && v.pass;
    }
    return ok ? 0 : 1;
}
