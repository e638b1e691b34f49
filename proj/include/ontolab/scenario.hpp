#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ontolab {

struct RunOptions {
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    std::optional<double> tol_override;
    int threads = 1;
};

struct ScenarioResult {
    std::string name;
    nlohmann::json summary;
    std::vector<std::string> artifacts; // paths written, manifest included
};

/// A declarative experiment: one of the kinds
/// discrete | flow | split-spectrum | reduce | sample-paths | koopman,
/// parsed from a line-oriented "key: value" file with a strict schema
/// (unknown keys are rejected). See docs/scenario_format.md.
struct Scenario {
    std::string name;
    std::string kind;
    std::string description;
    std::map<std::string, std::string> keys;
    std::string source_dir; // for resolving relative file references

    static Scenario parse_file(const std::string& path);
    static Scenario parse(const std::string& text, const std::string& source_dir);

    /// Strict schema check: key set, value ranges. Throws ValidationError.
    void validate() const;

    /// Execute and write artifacts under <out_dir>/<name>/.
    ScenarioResult run(const RunOptions& opts) const;
};

struct ScenarioInfo {
    std::string name;
    std::string kind;
    std::string description;
    std::string path;
};

/// Directory with the scenarios shipped in-repo; overridable through the
/// ONTOLAB_SCENARIO_DIR environment variable.
std::string bundled_scenario_dir();

/// Bundled scenarios plus, optionally, one extra directory; sorted by name.
std::vector<ScenarioInfo> list_scenarios(const std::string& extra_dir = "");

std::string ontolab_version();

} // namespace ontolab
