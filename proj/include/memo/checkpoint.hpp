#pragma once

#include <optional>
#include <string>

#include "memo/env.hpp"
#include "memo/policy.hpp"
#include "memo/rl.hpp"

namespace memo {

// Self-describing policy snapshot: morphology descriptor, widths, every
// parameter array as little-endian float64, normalizer state, and an rng
// summary, guarded by a trailing CRC32. Extension: .memockpt
struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    EnvConfig env;  // kind, counts, terrain, object (seed is not persisted)
    PolicyConfig policy_config;
    Actor actor;
    std::optional<Critic> critic;
    RunningNormalizer normalizer;
    std::uint64_t rng_seed = 0;
    std::uint64_t rng_draws = 0;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

enum class TransferMode { kFreezeModulesReinitBoss, kFinetuneAll };

struct TransferPlan {
    std::string source_checkpoint;
    EnvConfig target_env;
    TransferMode mode = TransferMode::kFreezeModulesReinitBoss;
    double logstd_init = -1.0;
};

struct AssembledPolicy {
    Actor actor;  // modular, with grafted modules
    RunningNormalizer normalizer;
    bool freeze_modules = false;
};

// Grafts the source checkpoint's type-shared modules into a policy for the
// target morphology. Freeze mode reinitializes the boss for the target
// dimensions and marks modules frozen; finetune mode requires the identical
// morphology and copies everything. logstd starts at plan.logstd_init; the
// normalizer carries over only when the observation layout is identical.
AssembledPolicy assemble_transfer_policy(const Checkpoint& source, const TransferPlan& plan,
                                         Rng& rng);

struct TransferRunResult {
    Actor actor;
    Critic critic;
    RunningNormalizer normalizer;
    TrainPpoResult rl;
    bool froze_modules = false;
};

// Phase 3: assemble, then PPO on the target environment. Frozen module
// parameters receive zero updates.
TransferRunResult run_transfer(const Checkpoint& source, const TransferPlan& plan,
                               const PPOConfig& rl_config, std::uint64_t seed, MetricsSink* sink,
                               const std::string& run_id);

}  // namespace memo
