#pragma once

#include <deque>
#include <string>
#include <vector>

#include "memo/env.hpp"
#include "memo/metrics.hpp"
#include "memo/policy.hpp"

namespace memo {

struct PPOConfig {
    double value_coef = 0.5;    // c1
    double entropy_coef = 0.0;  // c2
    double gamma = 0.995;
    double lam = 0.95;
    double clip_eps = 0.2;
    double grad_clip = 0.5;
    double lr_start = 3e-4;  // decays linearly to 0 across updates
    int epochs = 10;
    int batch_size = 512;  // env steps collected per update (T * P)
    long total_timesteps = 300000;
    int num_envs = 8;
    int minibatch_count = 4;
    double adam_eps = 1e-8;

    void validate() const;
    int steps_per_env() const { return batch_size / num_envs; }
    long num_updates() const { return total_timesteps / batch_size; }
};

// Flat rollout storage; sample index = env * steps + t.
struct RolloutBuffer {
    int steps = 0;
    int num_envs = 0;
    Matrix obs;      // normalized observations
    Matrix actions;
    Vector log_probs;
    Vector rewards;
    Vector values;
    Vector dones;  // 1.0 when the episode ended after this transition
    Vector bootstrap_values;  // per env
    Vector raw_advantages;
    Vector advantages;  // normalized when requested
    Vector returns;

    int size() const { return steps * num_envs; }
    int index(int env, int t) const { return env * steps + t; }
};

// One environment plus the per-env streams that make rollouts reproducible
// regardless of thread placement.
struct EnvWorker {
    Env env;
    Vector raw_obs;
    Rng action_rng;
    double episode_reward = 0.0;
    double episode_reported = 0.0;

    EnvWorker(const EnvConfig& config, Rng rng)
        : env(config), raw_obs(env.reset()), action_rng(rng) {}
};

struct RolloutStats {
    std::vector<double> episode_rewards;
    std::vector<double> episode_reported;
};

// Collects steps_per_env transitions from every worker. Observations are
// normalized against a snapshot of `normalizer` taken at entry; the raw
// observation statistics gathered during collection are merged back in worker
// order afterwards, so results do not depend on thread scheduling.
RolloutBuffer collect_rollouts(const Actor& actor, const Critic& critic,
                               std::vector<EnvWorker>& workers, int steps_per_env,
                               RunningNormalizer& normalizer, bool update_normalizer,
                               RolloutStats& stats, int max_threads);

// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t, accumulated with the
// (gamma*lam) recursion per environment. returns = raw advantage + value.
void compute_gae(RolloutBuffer& buffer, double gamma, double lam, bool normalize = true);

// One clipped-surrogate sample term: min(r*A, clip(r, 1-eps, 1+eps)*A).
double clipped_surrogate_term(double ratio, double advantage, double clip_eps);

// Linear decay to zero: lr_start * (1 - update/num_updates).
double decayed_lr(double lr_start, long update, long num_updates);

struct ActorGrads {
    Actor::Kind kind = Actor::Kind::kMonolithic;
    GradStore net;         // monolithic trunk
    Vector logstd;         // monolithic logstd
    ModularGrads modular;  // modular boss/modules/logstd

    static ActorGrads zeros_like(const Actor& actor);
    void set_zero();
    void scale(double factor);
    double squared_norm() const;
    bool all_finite() const;
    Vector& logstd_grad(const Actor& actor) {
        return actor.kind == Actor::Kind::kMonolithic ? logstd : modular.logstd;
    }
    void zero_module_grads();
};

struct ActorOptimizer {
    AdamState net;
    AdamVecState logstd;
    AdamState boss;
    std::map<int, std::vector<AdamState>> modules;

    static ActorOptimizer zeros_like(const Actor& actor);
};

struct PpoMinibatchView {
    Matrix obs;
    Matrix actions;
    Vector log_probs_old;
    Vector advantages;
    Vector returns;
};

struct PpoGradMetrics {
    double surrogate = 0.0;   // mean clipped surrogate (maximized quantity)
    double value_loss = 0.0;  // mean squared value error
    double entropy = 0.0;
};

// Gradients of -surrogate + c1*value_loss - c2*entropy for one minibatch.
// Fresh latent noise is drawn from noise_rng when the actor trains with
// naive noise injection. No optimizer state is touched.
PpoGradMetrics compute_ppo_gradients(const Actor& actor, const Critic& critic,
                                     const PpoMinibatchView& batch, const PPOConfig& config,
                                     ActorGrads& actor_grads, GradStore& critic_grads,
                                     Rng* noise_rng);

struct PpoUpdateMetrics {
    double surrogate = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;  // pre-clip global norm, averaged over minibatches
};

PpoUpdateMetrics ppo_update(Actor& actor, Critic& critic, const RolloutBuffer& buffer,
                            const PPOConfig& config, double lr, ActorOptimizer& actor_opt,
                            AdamState& critic_opt, bool freeze_modules, Rng& rng);

struct TrainPpoResult {
    long updates = 0;
    long env_steps = 0;
    double final_mean_reported = 0.0;  // rolling episode mean at the last update
};

// Full PPO loop: collect -> GAE -> update, with linear lr decay and rolling
// episode-reward logging through the metrics sink.
TrainPpoResult train_ppo(Actor& actor, Critic& critic, RunningNormalizer& normalizer,
                         const EnvConfig& env_config, const PPOConfig& config,
                         std::uint64_t seed, bool freeze_modules, MetricsSink* sink,
                         const std::string& run_id, const std::string& phase_label);

// Mean reported episode reward of the deterministic policy over `episodes`
// full episodes. The normalizer is frozen; episode i runs on env seed
// base_seed + i.
double evaluate_policy(const Actor& actor, const RunningNormalizer& normalizer,
                       const EnvConfig& env_config, int episodes, std::uint64_t base_seed);

}  // namespace memo
