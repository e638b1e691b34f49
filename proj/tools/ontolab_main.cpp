#include <CLI11.hpp>

#include "ontolab/ode.hpp"
#include "ontolab/scenario.hpp"

#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int classify_exception(const std::exception& e) {
    if (dynamic_cast<const ontolab::ValidationError*>(&e)) return kExitValidation;
    return kExitNumerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ontolab: deterministic universes, information loss, and the "
                 "quantum systems that emerge from them"};
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "execute scenario files");
    std::vector<std::string> run_paths;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    double tol = 0.0;
    bool tol_set = false;
    int jobs = 1;
    run_cmd->add_option("scenarios", run_paths, "scenario files to execute")
        ->required()
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out_dir, "output directory (default: out)");
    run_cmd->add_option("--seed", seed, "override the scenario seed")
        ->each([&](const std::string&) { seed_set = true; });
    run_cmd->add_option("--tol", tol, "override the default integrator tolerance")
        ->each([&](const std::string&) { tol_set = true; });
    run_cmd->add_option("--jobs", jobs, "run independent scenarios in parallel")
        ->check(CLI::PositiveNumber);

    auto* list_cmd = app.add_subcommand("list-scenarios", "catalog of bundled scenarios");
    std::string extra_dir;
    list_cmd->add_option("--dir", extra_dir, "additional scenario directory");

    auto* validate_cmd =
        app.add_subcommand("validate", "parse and schema-check scenario files");
    std::vector<std::string> validate_paths;
    validate_cmd->add_option("scenarios", validate_paths, "scenario files to check")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    if (list_cmd->parsed()) {
        const auto infos = ontolab::list_scenarios(extra_dir);
        for (const auto& info : infos)
            std::printf("%-28s %-14s %s\n", info.name.c_str(), info.kind.c_str(),
                        info.description.c_str());
        if (infos.empty()) std::fprintf(stderr, "no scenarios found\n");
        return kExitOk;
    }

    if (validate_cmd->parsed()) {
        int exit_code = kExitOk;
        for (const auto& path : validate_paths) {
            try {
                const auto sc = ontolab::Scenario::parse_file(path);
                std::printf("%s: ok (%s, kind %s)\n", path.c_str(), sc.name.c_str(),
                            sc.kind.c_str());
            } catch (const std::exception& e) {
                std::fprintf(stderr, "%s: %s\n", path.c_str(), e.what());
                exit_code = kExitValidation;
            }
        }
        return exit_code;
    }

    // run
    ontolab::RunOptions opts;
    opts.out_dir = out_dir;
    if (seed_set) opts.seed_override = seed;
    if (tol_set) opts.tol_override = tol;

    std::vector<ontolab::Scenario> scenarios;
    for (const auto& path : run_paths) {
        try {
            scenarios.push_back(ontolab::Scenario::parse_file(path));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "%s: %s\n", path.c_str(), e.what());
            return kExitValidation;
        }
    }

    std::atomic<int> next{0};
    std::atomic<int> worst{kExitOk};
    std::mutex print_mutex;
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < static_cast<int>(scenarios.size());
             i = next.fetch_add(1)) {
            try {
                const auto result = scenarios[i].run(opts);
                std::lock_guard<std::mutex> lock(print_mutex);
                std::printf("%s: ok (%zu artifacts under %s/%s)\n", result.name.c_str(),
                            result.artifacts.size(), out_dir.c_str(),
                            result.name.c_str());
            } catch (const std::exception& e) {
                const int code = classify_exception(e);
                int cur = worst.load();
                while (cur < code && !worst.compare_exchange_weak(cur, code)) {}
                std::lock_guard<std::mutex> lock(print_mutex);
                std::fprintf(stderr, "%s: %s\n", scenarios[i].name.c_str(), e.what());
            }
        }
    };

    const int n_workers = std::min<int>(jobs, static_cast<int>(scenarios.size()));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return worst.load();
}
