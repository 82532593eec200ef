#include "memo/rl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

namespace memo {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

void PPOConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (!(lam >= 0.0 && lam <= 1.0)) throw ConfigError("lam must be in [0, 1]");
    if (!(clip_eps > 0.0)) throw ConfigError("clip_eps must be positive");
    if (!(lr_start > 0.0)) throw ConfigError("lr_start must be positive");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (num_envs < 1) throw ConfigError("num_envs must be >= 1");
    if (batch_size < 1 || batch_size % num_envs != 0) {
        throw ConfigError("batch_size must be a positive multiple of num_envs");
    }
    if (minibatch_count < 1 || minibatch_count > batch_size) {
        throw ConfigError("minibatch_count must be in [1, batch_size]");
    }
    if (total_timesteps < batch_size) throw ConfigError("total_timesteps < one batch");
    if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0)) {
        throw ConfigError("loss coefficients must be non-negative");
    }
    if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
}

namespace {

Vector rollout_means(const Actor& actor, const Vector& nobs, Rng& rng) {
    if (actor.kind == Actor::Kind::kMonolithic) return actor.mono.mean_action(nobs);
    if (actor.train_noise.active()) {
        return actor.modular.modular_forward(nobs, actor.train_noise, &rng);
    }
    return actor.modular.mean_action(nobs);
}

struct WorkerScratch {
    RunningNormalizer norm;
    std::vector<double> episode_rewards;
    std::vector<double> episode_reported;
};

}  // namespace

RolloutBuffer collect_rollouts(const Actor& actor, const Critic& critic,
                               std::vector<EnvWorker>& workers, int steps_per_env,
                               RunningNormalizer& normalizer, bool update_normalizer,
                               RolloutStats& stats, int max_threads) {
    const int num_envs = static_cast<int>(workers.size());
    if (num_envs == 0) throw ConfigError("collect_rollouts needs at least one worker");
    const int obs_dim = workers[0].env.obs_dim();
    const int action_dim = workers[0].env.num_joints();
    for (const EnvWorker& w : workers) {
        if (w.env.obs_dim() != obs_dim || w.env.num_joints() != action_dim) {
            throw ConfigError("rollout workers must share one morphology");
        }
    }

    RolloutBuffer buffer;
    buffer.steps = steps_per_env;
    buffer.num_envs = num_envs;
    buffer.obs.resize(buffer.size(), obs_dim);
    buffer.actions.resize(buffer.size(), action_dim);
    buffer.log_probs.resize(buffer.size());
    buffer.rewards.resize(buffer.size());
    buffer.values.resize(buffer.size());
    buffer.dones.resize(buffer.size());
    buffer.bootstrap_values.resize(num_envs);

    const RunningNormalizer snapshot = normalizer;
    std::vector<WorkerScratch> scratch(num_envs);

    auto run_worker = [&](int w_idx) {
        EnvWorker& w = workers[w_idx];
        WorkerScratch& sc = scratch[w_idx];
        sc.norm = RunningNormalizer(obs_dim);
        for (int t = 0; t < steps_per_env; ++t) {
            const Vector nobs = snapshot.normalize(w.raw_obs);
            sc.norm.update(w.raw_obs);
            const Vector means = rollout_means(actor, nobs, w.action_rng);
            auto [action, logp] = sample_action(means, actor.logstd(), w.action_rng);
            const double value = critic.value(nobs);
            auto result = w.env.step(action);

            const int idx = buffer.index(w_idx, t);
            buffer.obs.row(idx) = nobs.transpose();
            buffer.actions.row(idx) = action.transpose();
            buffer.log_probs(idx) = logp;
            buffer.rewards(idx) = result.reward;
            buffer.values(idx) = value;
            buffer.dones(idx) = result.done ? 1.0 : 0.0;

            w.episode_reward += result.reward;
            w.episode_reported += result.reported_reward;
            if (result.done) {
                sc.episode_rewards.push_back(w.episode_reward);
                sc.episode_reported.push_back(w.episode_reported);
                w.episode_reward = 0.0;
                w.episode_reported = 0.0;
                w.raw_obs = w.env.reset();
            } else {
                w.raw_obs = std::move(result.obs);
            }
        }
        buffer.bootstrap_values(w_idx) = critic.value(snapshot.normalize(w.raw_obs));
    };

    const int threads = std::min(max_threads, num_envs);
    if (threads <= 1) {
        for (int w = 0; w < num_envs; ++w) run_worker(w);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (int w = t; w < num_envs; w += threads) run_worker(w);
            });
        }
        for (auto& th : pool) th.join();
    }

    // fixed merge order keeps results independent of thread scheduling
    for (int w = 0; w < num_envs; ++w) {
        if (update_normalizer) normalizer.merge(scratch[w].norm);
        stats.episode_rewards.insert(stats.episode_rewards.end(),
                                     scratch[w].episode_rewards.begin(),
                                     scratch[w].episode_rewards.end());
        stats.episode_reported.insert(stats.episode_reported.end(),
                                      scratch[w].episode_reported.begin(),
                                      scratch[w].episode_reported.end());
    }
    return buffer;
}

void compute_gae(RolloutBuffer& buffer, double gamma, double lam, bool normalize) {
    const int n = buffer.size();
    buffer.raw_advantages.resize(n);
    for (int env = 0; env < buffer.num_envs; ++env) {
        double acc = 0.0;
        for (int t = buffer.steps - 1; t >= 0; --t) {
            const int idx = buffer.index(env, t);
            const double not_done = 1.0 - buffer.dones(idx);
            const double next_value = t + 1 < buffer.steps
                                          ? buffer.values(buffer.index(env, t + 1))
                                          : buffer.bootstrap_values(env);
            const double delta =
                buffer.rewards(idx) + gamma * next_value * not_done - buffer.values(idx);
            acc = delta + gamma * lam * not_done * acc;
            buffer.raw_advantages(idx) = acc;
        }
    }
    buffer.returns = buffer.raw_advantages + buffer.values;
    if (normalize && n > 1) {
        const double mean = buffer.raw_advantages.mean();
        const double std =
            std::sqrt((buffer.raw_advantages.array() - mean).square().sum() / (n - 1));
        buffer.advantages = (buffer.raw_advantages.array() - mean) / (std + 1e-8);
    } else {
        buffer.advantages = buffer.raw_advantages;
    }
}

double clipped_surrogate_term(double ratio, double advantage, double clip_eps) {
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, clipped * advantage);
}

double decayed_lr(double lr_start, long update, long num_updates) {
    return lr_start * (1.0 - static_cast<double>(update) / static_cast<double>(num_updates));
}

ActorGrads ActorGrads::zeros_like(const Actor& actor) {
    ActorGrads g;
    g.kind = actor.kind;
    if (actor.kind == Actor::Kind::kMonolithic) {
        g.net = GradStore::zeros_like(actor.mono.net);
        g.logstd = Vector::Zero(actor.mono.logstd.size());
    } else {
        g.modular = ModularGrads::zeros_like(actor.modular);
    }
    return g;
}

void ActorGrads::set_zero() {
    if (kind == Actor::Kind::kMonolithic) {
        net.set_zero();
        logstd.setZero();
    } else {
        modular.set_zero();
    }
}

void ActorGrads::scale(double factor) {
    if (kind == Actor::Kind::kMonolithic) {
        net.scale(factor);
        logstd *= factor;
    } else {
        modular.scale(factor);
    }
}

double ActorGrads::squared_norm() const {
    return kind == Actor::Kind::kMonolithic ? net.squared_norm() + logstd.squaredNorm()
                                            : modular.squared_norm();
}

bool ActorGrads::all_finite() const {
    return kind == Actor::Kind::kMonolithic ? net.all_finite() && logstd.allFinite()
                                            : modular.all_finite();
}

void ActorGrads::zero_module_grads() {
    for (auto& [type_id, roles] : modular.modules) {
        for (GradStore& g : roles) g.set_zero();
    }
}

ActorOptimizer ActorOptimizer::zeros_like(const Actor& actor) {
    ActorOptimizer opt;
    if (actor.kind == Actor::Kind::kMonolithic) {
        opt.net = AdamState::zeros_like(actor.mono.net);
        opt.logstd = AdamVecState::zeros(static_cast<int>(actor.mono.logstd.size()));
    } else {
        opt.boss = AdamState::zeros_like(actor.modular.boss);
        for (const auto& [type_id, roles] : actor.modular.modules) {
            std::vector<AdamState> states;
            states.reserve(roles.size());
            for (const ParamStore& p : roles) states.push_back(AdamState::zeros_like(p));
            opt.modules.emplace(type_id, std::move(states));
        }
        opt.logstd = AdamVecState::zeros(static_cast<int>(actor.modular.logstd.size()));
    }
    return opt;
}

PpoGradMetrics compute_ppo_gradients(const Actor& actor, const Critic& critic,
                                     const PpoMinibatchView& batch, const PPOConfig& config,
                                     ActorGrads& actor_grads, GradStore& critic_grads,
                                     Rng* noise_rng) {
    const Eigen::Index m = batch.obs.rows();
    if (m == 0) throw DimensionError("empty PPO minibatch");

    const Vector& logstd = actor.logstd();
    const Eigen::Index n_act = logstd.size();
    const Eigen::ArrayXd var = (2.0 * logstd.array()).exp();

    BatchTape mono_tape;
    ModularPolicy::BatchTrace trace;
    Matrix means;
    if (actor.kind == Actor::Kind::kMonolithic) {
        means = mlp_forward_batch(actor.mono.net, batch.obs, &mono_tape);
    } else if (actor.train_noise.active()) {
        if (!noise_rng) throw ConfigError("naive noise injection needs an rng");
        Matrix eta(m, actor.modular.latent_dim());
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < eta.cols(); ++j) {
                eta(i, j) = actor.train_noise.sigma * noise_rng->gaussian();
            }
        }
        means = actor.modular.modular_forward_batch(batch.obs, &eta, &trace);
    } else {
        means = actor.modular.modular_forward_batch(batch.obs, nullptr, &trace);
    }

    const Matrix diff = batch.actions - means;
    Matrix z2(m, n_act);
    z2 = diff.array().square().rowwise() / var.transpose();
    const double logp_const = -logstd.sum() - kHalfLog2Pi * static_cast<double>(n_act);
    const Vector logp_new = (logp_const - 0.5 * z2.array().rowwise().sum()).matrix();

    PpoGradMetrics metrics;
    Vector dlogp(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double ratio = std::exp(logp_new(i) - batch.log_probs_old(i));
        const double adv = batch.advantages(i);
        const double surr1 = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
        const double surr2 = clipped * adv;
        metrics.surrogate += std::min(surr1, surr2);
        double dterm_dlogp;
        if (surr1 <= surr2) {
            dterm_dlogp = surr1;  // d(r*A)/dlogp = r*A
        } else {
            const bool inside =
                ratio > 1.0 - config.clip_eps && ratio < 1.0 + config.clip_eps;
            dterm_dlogp = inside ? surr1 : 0.0;
        }
        dlogp(i) = -dterm_dlogp / static_cast<double>(m);  // loss = -mean(term)
    }
    metrics.surrogate /= static_cast<double>(m);

    // dlogp/dmean = (a - mu)/var, scaled per sample by dloss/dlogp
    Matrix dmeans = (diff.array().rowwise() / var.transpose()).colwise() * dlogp.array();

    // dlogp/dlogstd = (a - mu)^2/var - 1, plus the entropy bonus
    Vector dlogstd =
        ((z2.array() - 1.0).colwise() * dlogp.array()).colwise().sum().transpose();
    dlogstd.array() -= config.entropy_coef;
    metrics.entropy = gaussian_entropy(logstd);

    if (actor.kind == Actor::Kind::kMonolithic) {
        mlp_backward_batch(mono_tape, dmeans, actor_grads.net);
        actor_grads.logstd += dlogstd;
    } else {
        actor.modular.backward_batch(trace, dmeans, actor_grads.modular);
        actor_grads.modular.logstd += dlogstd;
    }

    BatchTape value_tape;
    const Vector values = mlp_forward_batch(critic.net, batch.obs, &value_tape).col(0);
    const Vector verr = values - batch.returns;
    metrics.value_loss = verr.squaredNorm() / static_cast<double>(m);
    const Matrix dvalues = (2.0 * config.value_coef / static_cast<double>(m)) * verr;
    mlp_backward_batch(value_tape, dvalues, critic_grads);
    return metrics;
}

namespace {

void actor_adam_step(Actor& actor, const ActorGrads& grads, ActorOptimizer& opt, double lr,
                     double eps) {
    if (actor.kind == Actor::Kind::kMonolithic) {
        adam_step(actor.mono.net, grads.net, opt.net, lr, 0.9, 0.999, eps);
        adam_step_vec(actor.mono.logstd, grads.logstd, opt.logstd, lr, 0.9, 0.999, eps);
    } else {
        adam_step(actor.modular.boss, grads.modular.boss, opt.boss, lr, 0.9, 0.999, eps);
        for (auto& [type_id, roles] : actor.modular.modules) {
            const auto& role_grads = grads.modular.modules.at(type_id);
            auto& role_states = opt.modules.at(type_id);
            for (std::size_t r = 0; r < roles.size(); ++r) {
                adam_step(roles[r], role_grads[r], role_states[r], lr, 0.9, 0.999, eps);
            }
        }
        adam_step_vec(actor.modular.logstd, grads.modular.logstd, opt.logstd, lr, 0.9, 0.999,
                      eps);
    }
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

}  // namespace

PpoUpdateMetrics ppo_update(Actor& actor, Critic& critic, const RolloutBuffer& buffer,
                            const PPOConfig& config, double lr, ActorOptimizer& actor_opt,
                            AdamState& critic_opt, bool freeze_modules, Rng& rng) {
    const int n = buffer.size();
    ActorGrads actor_grads = ActorGrads::zeros_like(actor);
    GradStore critic_grads = GradStore::zeros_like(critic.net);

    PpoUpdateMetrics totals;
    int minibatches = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<int> perm = shuffled_indices(n, rng);
        const int base = n / config.minibatch_count;
        const int rem = n % config.minibatch_count;
        int cursor = 0;
        for (int mb = 0; mb < config.minibatch_count; ++mb) {
            const int size = base + (mb < rem ? 1 : 0);
            if (size == 0) continue;
            PpoMinibatchView view;
            view.obs.resize(size, buffer.obs.cols());
            view.actions.resize(size, buffer.actions.cols());
            view.log_probs_old.resize(size);
            view.advantages.resize(size);
            view.returns.resize(size);
            for (int i = 0; i < size; ++i) {
                const int src = perm[cursor + i];
                view.obs.row(i) = buffer.obs.row(src);
                view.actions.row(i) = buffer.actions.row(src);
                view.log_probs_old(i) = buffer.log_probs(src);
                view.advantages(i) = buffer.advantages(src);
                view.returns(i) = buffer.returns(src);
            }
            cursor += size;

            actor_grads.set_zero();
            critic_grads.set_zero();
            const PpoGradMetrics m = compute_ppo_gradients(actor, critic, view, config,
                                                           actor_grads, critic_grads, &rng);
            if (!std::isfinite(m.surrogate) || !std::isfinite(m.value_loss)) {
                throw TrainingDiverged("non-finite PPO loss");
            }
            if (!actor_grads.all_finite() || !critic_grads.all_finite()) {
                throw TrainingDiverged("non-finite PPO gradients");
            }
            if (freeze_modules) actor_grads.zero_module_grads();
            const double gnorm =
                std::sqrt(actor_grads.squared_norm() + critic_grads.squared_norm());
            if (gnorm > config.grad_clip && gnorm > 0.0) {
                const double scale = config.grad_clip / gnorm;
                actor_grads.scale(scale);
                critic_grads.scale(scale);
            }
            actor_adam_step(actor, actor_grads, actor_opt, lr, config.adam_eps);
            adam_step(critic.net, critic_grads, critic_opt, lr, 0.9, 0.999, config.adam_eps);

            totals.surrogate += m.surrogate;
            totals.value_loss += m.value_loss;
            totals.entropy += m.entropy;
            totals.grad_norm += gnorm;
            ++minibatches;
        }
    }
    if (minibatches > 0) {
        totals.surrogate /= minibatches;
        totals.value_loss /= minibatches;
        totals.entropy /= minibatches;
        totals.grad_norm /= minibatches;
    }
    return totals;
}

TrainPpoResult train_ppo(Actor& actor, Critic& critic, RunningNormalizer& normalizer,
                         const EnvConfig& env_config, const PPOConfig& config,
                         std::uint64_t seed, bool freeze_modules, MetricsSink* sink,
                         const std::string& run_id, const std::string& phase_label) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const int threads = max_worker_threads();
    const bool deterministic_wall = threads <= 1;

    Rng master(seed);
    std::vector<EnvWorker> workers;
    workers.reserve(config.num_envs);
    for (int p = 0; p < config.num_envs; ++p) {
        EnvConfig ec = env_config;
        ec.seed = master.fork(100 + p).seed();
        workers.emplace_back(ec, master.fork(3000 + p));
    }
    if (normalizer.dim() != workers[0].env.obs_dim()) {
        throw DimensionError("normalizer dimension does not match the environment");
    }
    if (normalizer.count() == 0.0) {
        for (const EnvWorker& w : workers) normalizer.update(w.raw_obs);
    }

    ActorOptimizer actor_opt = ActorOptimizer::zeros_like(actor);
    AdamState critic_opt = AdamState::zeros_like(critic.net);
    Rng update_rng = master.fork(7);

    std::deque<double> rolling_reward;
    std::deque<double> rolling_reported;
    const long updates = config.num_updates();
    TrainPpoResult result;
    for (long u = 0; u < updates; ++u) {
        const double lr = decayed_lr(config.lr_start, u, updates);
        RolloutStats stats;
        RolloutBuffer buffer = collect_rollouts(actor, critic, workers, config.steps_per_env(),
                                                normalizer, true, stats, threads);
        compute_gae(buffer, config.gamma, config.lam, true);
        ppo_update(actor, critic, buffer, config, lr, actor_opt, critic_opt, freeze_modules,
                   update_rng);

        for (double r : stats.episode_rewards) {
            rolling_reward.push_back(r);
            if (rolling_reward.size() > 10) rolling_reward.pop_front();
        }
        for (double r : stats.episode_reported) {
            rolling_reported.push_back(r);
            if (rolling_reported.size() > 10) rolling_reported.pop_front();
        }

        if (sink) {
            MetricsRow row;
            row.run_id = run_id;
            row.phase = phase_label;
            row.index = u;
            row.env_steps = (u + 1) * config.batch_size;
            if (!rolling_reward.empty()) {
                row.mean_reward =
                    std::accumulate(rolling_reward.begin(), rolling_reward.end(), 0.0) /
                    rolling_reward.size();
                row.reported_reward =
                    std::accumulate(rolling_reported.begin(), rolling_reported.end(), 0.0) /
                    rolling_reported.size();
            }
            row.wall_seconds =
                deterministic_wall
                    ? 0.0
                    : std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
            sink->write(row);
        }
        result.updates = u + 1;
        result.env_steps = (u + 1) * config.batch_size;
        if (!rolling_reported.empty()) {
            result.final_mean_reported =
                std::accumulate(rolling_reported.begin(), rolling_reported.end(), 0.0) /
                rolling_reported.size();
        }
    }
    return result;
}

double evaluate_policy(const Actor& actor, const RunningNormalizer& normalizer,
                       const EnvConfig& env_config, int episodes, std::uint64_t base_seed) {
    if (episodes < 1) throw ConfigError("evaluate_policy needs at least one episode");
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        EnvConfig ec = env_config;
        ec.seed = base_seed + static_cast<std::uint64_t>(e);
        Env env(ec);
        Vector raw = env.reset();
        double episode_reported = 0.0;
        while (true) {
            const Vector action = actor.mean_action(normalizer.normalize(raw));
            auto result = env.step(action);
            episode_reported += result.reported_reward;
            if (result.done) break;
            raw = std::move(result.obs);
        }
        total += episode_reported;
    }
    return total / episodes;
}

}  // namespace memo
