#pragma once

#include <string>
#include <vector>

#include "memo/checkpoint.hpp"
#include "memo/env.hpp"
#include "memo/il.hpp"
#include "memo/policy.hpp"
#include "memo/rl.hpp"

namespace memo {

enum class Phase { kTrainExpert, kPretrainModules, kTransfer, kAnalyze };

enum class ActorArchitecture { kMlp, kModular };

// Parsed experiment file. Only the sections required by the selected phase
// may appear; unknown sections or keys are rejected.
struct ExperimentConfig {
    Phase phase = Phase::kTrainExpert;
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = "runs";

    EnvConfig env;
    int broken_count = 0;  // when > 0, that many joints are broken per seed

    ActorArchitecture architecture = ActorArchitecture::kMlp;
    PolicyConfig policy;

    PPOConfig rl;
    double naive_noise_sigma = 0.0;  // latent noise in RL (ablation)

    ILConfig il;
    std::string expert_checkpoint;

    std::string transfer_source;
    TransferMode transfer_mode = TransferMode::kFreezeModulesReinitBoss;

    std::string analysis_checkpoint;
    int analysis_trajectories = 20;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// Canonical fully-populated form; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

// FNV-1a of the canonical form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

// Per-step mean and sample standard deviation of the reward columns across
// runs sharing one step grid.
void emit_curve_data(const std::vector<std::string>& metrics_csv_paths,
                     const std::string& output_path);

}  // namespace memo
