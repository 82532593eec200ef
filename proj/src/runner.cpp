#include "memo/runner.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

#include "memo/analysis.hpp"

namespace memo {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

std::vector<int> sample_broken_joints(int count, int num_joints, Rng rng) {
    if (count > num_joints) throw ConfigError("broken_count exceeds the joint count");
    std::vector<int> ids(num_joints);
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < count; ++i) {
        const int j = i + static_cast<int>(rng.next_u64() %
                                           static_cast<std::uint64_t>(num_joints - i));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

EnvConfig resolve_env(const ExperimentConfig& config, std::uint64_t seed) {
    EnvConfig env = config.env;
    if (config.broken_count > 0) {
        if (!env.broken_joints.empty()) {
            throw ConfigError("broken_count and broken_joints are mutually exclusive");
        }
        Env probe(EnvConfig{env.kind, env.count_a, env.count_b});
        env.broken_joints =
            sample_broken_joints(config.broken_count, probe.num_joints(), Rng(seed).fork(97));
    }
    return env;
}

void run_train_expert(const ExperimentConfig& config, const EnvConfig& env_config,
                      std::uint64_t seed, const fs::path& run_dir, const std::string& run_id,
                      MetricsSink& sink) {
    Env probe(env_config);
    Rng init_rng = Rng(seed).fork(1);

    Actor actor;
    if (config.architecture == ActorArchitecture::kMlp) {
        actor.kind = Actor::Kind::kMonolithic;
        actor.mono = MonolithicPolicy::create(probe.obs_dim(), probe.num_joints(),
                                              probe.partition().num_instances(), config.policy,
                                              init_rng, 0.0);
    } else {
        actor.kind = Actor::Kind::kModular;
        actor.modular = ModularPolicy::create(probe.graph(), probe.partition(), probe.layout(),
                                              config.policy, init_rng, 0.0);
        if (config.naive_noise_sigma > 0.0) {
            actor.train_noise = NoiseSpec{config.naive_noise_sigma, true};
        }
    }
    Critic critic = Critic::create(probe.obs_dim(), config.policy.signal_dim, init_rng);
    RunningNormalizer normalizer(probe.obs_dim());

    train_ppo(actor, critic, normalizer, env_config, config.rl, seed, false, &sink, run_id,
              "train_expert");

    Checkpoint ckpt;
    ckpt.env = env_config;
    ckpt.policy_config = config.policy;
    actor.train_noise = NoiseSpec{0.0, false};  // noise is a training-time construct
    ckpt.actor = std::move(actor);
    ckpt.critic = std::move(critic);
    ckpt.normalizer = std::move(normalizer);
    ckpt.rng_seed = seed;
    save_checkpoint(ckpt, (run_dir / "checkpoint.memockpt").string());
}

void run_pretrain(const ExperimentConfig& config, const EnvConfig& env_config,
                  std::uint64_t seed, const fs::path& run_dir, const std::string& run_id,
                  MetricsSink& sink) {
    if (!fs::exists(config.expert_checkpoint)) {
        throw MissingPrerequisite("expert checkpoint not found: " + config.expert_checkpoint);
    }
    const Checkpoint expert = load_checkpoint(config.expert_checkpoint);
    if (expert.env.kind != env_config.kind || expert.env.count_a != env_config.count_a ||
        expert.env.count_b != env_config.count_b) {
        throw ConfigError("expert checkpoint morphology does not match the [env] section");
    }

    TrainIlResult result = train_il(expert.actor, expert.normalizer, env_config, config.policy,
                                    config.il, seed, &sink, run_id);

    Checkpoint ckpt;
    ckpt.env = env_config;
    ckpt.policy_config = config.policy;
    ckpt.actor.kind = Actor::Kind::kModular;
    ckpt.actor.modular = std::move(result.policy);
    ckpt.normalizer = expert.normalizer;
    ckpt.rng_seed = seed;
    save_checkpoint(ckpt, (run_dir / "checkpoint.memockpt").string());
}

void run_transfer_phase(const ExperimentConfig& config, const EnvConfig& env_config,
                        std::uint64_t seed, const fs::path& run_dir, const std::string& run_id,
                        MetricsSink& sink) {
    if (!fs::exists(config.transfer_source)) {
        throw MissingPrerequisite("source checkpoint not found: " + config.transfer_source);
    }
    const Checkpoint source = load_checkpoint(config.transfer_source);
    TransferPlan plan;
    plan.source_checkpoint = config.transfer_source;
    plan.target_env = env_config;
    plan.mode = config.transfer_mode;

    TransferRunResult result = run_transfer(source, plan, config.rl, seed, &sink, run_id);

    Checkpoint ckpt;
    ckpt.env = env_config;
    ckpt.policy_config = source.policy_config;
    ckpt.actor = std::move(result.actor);
    ckpt.critic = std::move(result.critic);
    ckpt.normalizer = std::move(result.normalizer);
    ckpt.rng_seed = seed;
    save_checkpoint(ckpt, (run_dir / "checkpoint.memockpt").string());
}

void run_analyze(const ExperimentConfig& config, std::uint64_t seed, const fs::path& run_dir,
                 const std::string& run_id, MetricsSink& sink) {
    if (!fs::exists(config.analysis_checkpoint)) {
        throw MissingPrerequisite("checkpoint not found: " + config.analysis_checkpoint);
    }
    const Checkpoint ckpt = load_checkpoint(config.analysis_checkpoint);
    if (ckpt.actor.kind != Actor::Kind::kModular) {
        throw TypeMismatch("spectrum analysis needs a modular checkpoint");
    }
    const SpectrumReport report =
        spectra_over_trajectories(ckpt.actor.modular, ckpt.normalizer, ckpt.env,
                                  config.analysis_trajectories, Rng(seed).fork(71).seed());
    write_spectrum_csvs(report, (run_dir / "spectrum_values.csv").string(),
                        (run_dir / "spectrum_histogram.csv").string());

    MetricsRow row;
    row.run_id = run_id;
    row.phase = "analyze";
    row.index = 0;
    row.env_steps = report.states_visited;
    row.ratio = report.pooled_median;
    sink.write(row);
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config) {
    const std::string hash = config_hash(config);
    const fs::path output_dir(config.output_dir);
    fs::create_directories(output_dir);
    write_text(output_dir / "config_hash.txt", hash + "\n");

    RunOutcome outcome;
    for (std::uint64_t seed : config.seeds) {
        const std::string run_id = hash.substr(0, 8) + "_s" + std::to_string(seed);
        const fs::path run_dir = output_dir / run_id;
        fs::create_directories(run_dir);
        write_text(run_dir / "config_hash.txt", hash + "\n");
        write_text(run_dir / "config.txt", serialize_config(config));
        CsvMetricsWriter sink((run_dir / "metrics.csv").string());

        const bool needs_env = config.phase != Phase::kAnalyze;
        const EnvConfig env_config = needs_env ? resolve_env(config, seed) : EnvConfig{};
        switch (config.phase) {
            case Phase::kTrainExpert:
                run_train_expert(config, env_config, seed, run_dir, run_id, sink);
                break;
            case Phase::kPretrainModules:
                run_pretrain(config, env_config, seed, run_dir, run_id, sink);
                break;
            case Phase::kTransfer:
                run_transfer_phase(config, env_config, seed, run_dir, run_id, sink);
                break;
            case Phase::kAnalyze:
                run_analyze(config, seed, run_dir, run_id, sink);
                break;
        }
        outcome.run_dirs.push_back(run_dir.string());
        outcome.run_ids.push_back(run_id);
    }
    return outcome;
}

}  // namespace memo
