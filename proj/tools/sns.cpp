// Command-line entry point: sns <command> [--config FILE] [--seed S] [--out DIR] [--set section.key=value]...
#include "sns/app/commands.hpp"
#include "sns/app/config.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
    bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "master seed (overrides [run] seed)");
    app->add_option("--out", c.out, "output directory (default: $SNS_OUT_DIR or ./sns_out)");
    app->add_option("--set", c.overrides, "override, e.g. --set solver.N=32");
    app->add_flag("--quiet", c.quiet, "no summary table");
}

std::filesystem::path out_dir(const Common& c, const std::string& command) {
    if (!c.out.empty()) return c.out;
    std::string leaf = command;
    for (auto& ch : leaf)
        if (ch == ' ') ch = '-';
    if (const char* env = std::getenv("SNS_OUT_DIR")) return std::filesystem::path(env) / leaf;
    return std::filesystem::path("sns_out") / leaf;
}

int run(const std::string& command, const Common& c) {
    const auto dir = out_dir(c, command);
    sns::app::RunConfig cfg;
    try {
        cfg = c.config.empty() ? sns::app::parse_config_text("") : sns::app::parse_config_file(c.config);
        if (c.seed) sns::app::apply_override(cfg, "run.seed=" + std::to_string(*c.seed));
        for (const auto& o : c.overrides) sns::app::apply_override(cfg, o);
    } catch (const std::exception& e) {
        sns::app::write_error(dir, command, "config", e.what());
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        sns::app::Output out(dir);
        const auto started = sns::app::utc_timestamp();
        const auto r = sns::app::run_command(command, cfg, out);
        sns::app::write_manifest(out, command, cfg, started, sns::app::utc_timestamp());
        if (!c.quiet) {
            for (const auto& s : r.summary) std::cout << s << "\n";
            std::cout << sns::app::summary_table(r.checks);
            std::cout << (r.pass() ? "PASS" : "FAIL") << "  " << command << "  (outputs in " << dir.string() << ")\n";
        }
        return r.pass() ? 0 : 1;
    } catch (const std::exception& e) {
        sns::app::write_error(dir, command, "module", e.what());
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic Navier-Stokes toolkit"};
    app.require_subcommand(1);
    Common common;
    std::string command;

    auto* structure = app.add_subcommand("structure", "regularity structure computations");
    structure->require_subcommand(1);
    for (const char* s : {"build", "negative", "renorm-dim", "extend"}) {
        auto* sub = structure->add_subcommand(s, std::string("structure ") + s);
        add_common(sub, common);
        sub->callback([&command, s] { command = std::string("structure ") + s; });
    }
    auto* kern = app.add_subcommand("kernels", "kernel decomposition");
    kern->require_subcommand(1);
    for (const char* s : {"decompose", "verify"}) {
        auto* sub = kern->add_subcommand(s, std::string("kernels ") + s);
        add_common(sub, common);
        sub->callback([&command, s] { command = std::string("kernels ") + s; });
    }
    for (const char* s : {"simulate", "jacobian-check", "gradient-check", "feller-test", "invariance-test", "global-test"}) {
        auto* sub = app.add_subcommand(s, s);
        add_common(sub, common);
        sub->callback([&command, s] { command = s; });
    }
    auto* dump = app.add_subcommand("config", "print the canonical configuration and its hash");
    add_common(dump, common);
    dump->callback([&command] { command = "config"; });

    CLI11_PARSE(app, argc, argv);
    if (command == "config") {
        try {
            auto cfg = common.config.empty() ? sns::app::parse_config_text("") : sns::app::parse_config_file(common.config);
            if (common.seed) sns::app::apply_override(cfg, "run.seed=" + std::to_string(*common.seed));
            for (const auto& o : common.overrides) sns::app::apply_override(cfg, o);
            std::cout << sns::app::serialize(cfg) << "# sha256 " << sns::app::config_hash(cfg) << "\n";
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
    }
    return run(command, common);
}
