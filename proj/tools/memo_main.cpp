#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "memo/runner.hpp"

namespace {

constexpr const char* kUsage =
    "usage: memo <train-expert|pretrain|transfer|analyze> --config <path> [--seed N] [--out DIR]\n"
    "       memo curves --out <path> <metrics.csv> [<metrics.csv> ...]\n"
    "\n"
    "exit codes: 0 success, 2 config error, 3 prerequisite missing, 4 training diverged\n";

int run_phase(memo::Phase phase, int argc, char** argv) {
    std::string config_path;
    std::string out_dir;
    bool seed_set = false;
    std::uint64_t seed = 0;
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&](const char* what) -> std::string {
            if (i + 1 >= argc) throw memo::ConfigError(std::string(what) + " needs a value");
            return argv[++i];
        };
        if (arg == "--config") {
            config_path = next("--config");
        } else if (arg == "--seed") {
            seed = std::strtoull(next("--seed").c_str(), nullptr, 10);
            seed_set = true;
        } else if (arg == "--out") {
            out_dir = next("--out");
        } else {
            throw memo::ConfigError("unknown argument " + arg);
        }
    }
    if (config_path.empty()) throw memo::ConfigError("--config is required");

    memo::ExperimentConfig config = memo::parse_config(config_path);
    if (config.phase != phase) {
        throw memo::ConfigError("config phase does not match the subcommand");
    }
    if (seed_set) config.seeds = {seed};
    if (!out_dir.empty()) config.output_dir = out_dir;

    const memo::RunOutcome outcome = memo::run_experiment(config);
    for (const std::string& dir : outcome.run_dirs) {
        std::printf("run complete: %s\n", dir.c_str());
    }
    return 0;
}

int run_curves(int argc, char** argv) {
    std::string out_path;
    std::vector<std::string> inputs;
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out") {
            if (i + 1 >= argc) throw memo::ConfigError("--out needs a value");
            out_path = argv[++i];
        } else {
            inputs.push_back(arg);
        }
    }
    if (out_path.empty() || inputs.empty()) {
        throw memo::ConfigError("curves needs --out and at least one metrics csv");
    }
    memo::emit_curve_data(inputs, out_path);
    std::printf("aggregated %zu runs into %s\n", inputs.size(), out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fputs(kUsage, stderr);
        return 2;
    }
    const std::string command = argv[1];
    try {
        if (command == "train-expert") return run_phase(memo::Phase::kTrainExpert, argc, argv);
        if (command == "pretrain") return run_phase(memo::Phase::kPretrainModules, argc, argv);
        if (command == "transfer") return run_phase(memo::Phase::kTransfer, argc, argv);
        if (command == "analyze") return run_phase(memo::Phase::kAnalyze, argc, argv);
        if (command == "curves") return run_curves(argc, argv);
        if (command == "--help" || command == "-h" || command == "help") {
            std::fputs(kUsage, stdout);
            return 0;
        }
        std::fprintf(stderr, "unknown command '%s'\n%s", command.c_str(), kUsage);
        return 2;
    } catch (const memo::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const memo::MissingPrerequisite& e) {
        std::fprintf(stderr, "missing prerequisite: %s\n", e.what());
        return 3;
    } catch (const memo::TrainingDiverged& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return 4;
    } catch (const memo::ValidationFailure& e) {
        std::fprintf(stderr, "validation failed: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
