#pragma once

#include "sns/app/config.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sns::app {

inline constexpr const char* kToolkitVersion = "0.1.0";

// One line of a report: value compared with threshold. Informational lines
// carry no threshold and always pass.
struct Check {
    std::string name;
    double value = 0.0;
    std::optional<double> stderr_value;
    std::optional<double> threshold;
    bool pass = true;
};

Check check_le(std::string name, double value, double threshold, std::optional<double> se = std::nullopt);
Check check_ge(std::string name, double value, double threshold, std::optional<double> se = std::nullopt);
Check info(std::string name, double value, std::optional<double> se = std::nullopt);

// Output directory; every file written through it is listed in the manifest.
class Output {
public:
    explicit Output(std::filesystem::path dir);
    const std::filesystem::path& dir() const { return dir_; }
    void write(const std::string& name, const std::string& content);
    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    void record(const std::string& name);  // a file written elsewhere into dir()
    // name -> sha256
    const std::map<std::string, std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> files_;
};

struct CommandResult {
    std::vector<Check> checks;
    std::vector<std::string> summary;
    bool pass() const;
};

// Subcommands: "structure build|negative|renorm-dim|extend", "kernels decompose|verify",
// "simulate", "jacobian-check", "gradient-check", "feller-test", "invariance-test",
// "global-test". Writes report.ndjson and the command's artifacts into out.
CommandResult run_command(const std::string& command, const RunConfig& cfg, Output& out);

const std::vector<std::string>& command_names();

// NDJSON lines {name, value, stderr, threshold, pass}.
std::string checks_ndjson(const std::vector<Check>& checks);
std::string summary_table(const std::vector<Check>& checks);

// manifest.json: config hash, version, command, seed, timestamps and the
// checksum of every file in out.
void write_manifest(Output& out, const std::string& command, const RunConfig& cfg, const std::string& started,
                    const std::string& finished);
void write_error(const std::filesystem::path& dir, const std::string& command, const std::string& kind,
                 const std::string& message);

std::string utc_timestamp();

// Records file of a Monte Carlo part: one line per path, "path,v1,v2,...".
std::string records_csv(const std::vector<double>& flat, int n_paths);

}  // namespace sns::app
