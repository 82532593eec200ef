#include "memo/il.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "memo/rl.hpp"

namespace memo {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;

Matrix draw_noise(Eigen::Index rows, Eigen::Index cols, double sigma, Rng& rng) {
    Matrix eta(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) eta(i, j) = sigma * rng.gaussian();
    }
    return eta;
}

}  // namespace

void ILConfig::validate() const {
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
    if (!(reg_weight >= 0.0)) throw ConfigError("reg_weight must be non-negative");
    if (dagger_iterations < 1) throw ConfigError("dagger_iterations must be >= 1");
    if (epochs_per_iteration < 1) throw ConfigError("epochs_per_iteration must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (validation_trajectories < 1) throw ConfigError("validation_trajectories must be >= 1");
}

void AggregatedDataset::append(const Matrix& new_obs, const Matrix& new_actions, int iteration) {
    if (new_obs.rows() != new_actions.rows()) throw DimensionError("dataset append mismatch");
    if (obs.rows() == 0) {
        obs = new_obs;
        expert_actions = new_actions;
    } else {
        if (new_obs.cols() != obs.cols() || new_actions.cols() != expert_actions.cols()) {
            throw DimensionError("dataset append column mismatch");
        }
        const Eigen::Index old_rows = obs.rows();
        obs.conservativeResize(old_rows + new_obs.rows(), Eigen::NoChange);
        obs.bottomRows(new_obs.rows()) = new_obs;
        expert_actions.conservativeResize(old_rows + new_actions.rows(), Eigen::NoChange);
        expert_actions.bottomRows(new_actions.rows()) = new_actions;
    }
    for (Eigen::Index i = 0; i < new_obs.rows(); ++i) iteration_tags.push_back(iteration);
}

double bc_loss(const ModularPolicy& policy, const Matrix& obs, const Matrix& expert_actions) {
    if (obs.rows() == 0) throw DimensionError("bc_loss on an empty batch");
    const Matrix means = policy.modular_forward_batch(obs, nullptr);
    return (means - expert_actions).array().square().rowwise().sum().mean();
}

Vector invariance_residual(const ModularPolicy& policy, const Vector& normalized_obs,
                           const Vector& eta) {
    if (eta.size() != policy.latent_dim()) throw DimensionError("eta length != |P|*D");
    const Vector latent = policy.boss_forward(normalized_obs);
    const Vector clean = policy.modules_forward(latent, normalized_obs);
    const Vector noisy = policy.modules_forward(latent + eta, normalized_obs);
    return noisy - clean;
}

namespace {

// Gaussian NLL pieces shared by every mode. diff = mean - target.
struct NllBatch {
    double loss = 0.0;   // mean over rows, summed over dims
    Matrix dmeans;       // gradient w.r.t. means
    Vector dlogstd;      // gradient w.r.t. logstd
};

NllBatch gaussian_nll(const Matrix& diff, const Vector& logstd) {
    const Eigen::Index m = diff.rows();
    const Eigen::ArrayXd var = (2.0 * logstd.array()).exp();
    NllBatch out;
    const Matrix z2 = diff.array().square().rowwise() / var.transpose();
    out.loss = logstd.sum() + kHalfLog2Pi * static_cast<double>(diff.cols()) +
               0.5 * z2.sum() / static_cast<double>(m);
    out.dmeans = (diff.array().rowwise() / var.transpose()) / static_cast<double>(m);
    out.dlogstd = Vector::Ones(logstd.size()) -
                  (z2.colwise().sum() / static_cast<double>(m)).transpose();
    return out;
}

}  // namespace

double il_loss(const ModularPolicy& policy, const Matrix& obs, const Matrix& expert_actions,
               const ILConfig& config, Rng& rng, ModularGrads* grads) {
    if (obs.rows() == 0) throw DimensionError("il_loss on an empty batch");
    if (expert_actions.rows() != obs.rows()) throw DimensionError("batch size mismatch");
    const Eigen::Index m = obs.rows();
    const Vector& logstd = policy.logstd;

    switch (config.mode) {
        case IlLossMode::kNoiseInjection:
        case IlLossMode::kBcOnly: {
            const bool noisy = config.mode == IlLossMode::kNoiseInjection && config.sigma > 0.0;
            ModularPolicy::BatchTrace trace;
            Matrix means;
            if (noisy) {
                const Matrix eta = draw_noise(m, policy.latent_dim(), config.sigma, rng);
                means = policy.modular_forward_batch(obs, &eta, grads ? &trace : nullptr);
            } else {
                means = policy.modular_forward_batch(obs, nullptr, grads ? &trace : nullptr);
            }
            NllBatch nll = gaussian_nll(means - expert_actions, logstd);
            if (grads) {
                policy.backward_batch(trace, nll.dmeans, *grads);
                grads->logstd += nll.dlogstd;
            }
            return nll.loss;
        }
        case IlLossMode::kDualLoss: {
            ModularPolicy::BatchTrace clean_trace;
            const Matrix clean =
                policy.modular_forward_batch(obs, nullptr, grads ? &clean_trace : nullptr);
            ModularPolicy::BatchTrace noisy_trace;
            Matrix noisy;
            if (config.sigma > 0.0) {
                const Matrix eta = draw_noise(m, policy.latent_dim(), config.sigma, rng);
                noisy = policy.modular_forward_batch(obs, &eta, grads ? &noisy_trace : nullptr);
            } else {
                noisy = policy.modular_forward_batch(obs, nullptr, grads ? &noisy_trace : nullptr);
            }
            NllBatch bc = gaussian_nll(clean - expert_actions, logstd);
            NllBatch inv = gaussian_nll(noisy - clean, logstd);
            if (grads) {
                policy.backward_batch(noisy_trace, inv.dmeans, *grads);
                // the clean path feeds both terms; the invariance residual
                // enters it with a flipped sign
                policy.backward_batch(clean_trace, bc.dmeans - inv.dmeans, *grads);
                grads->logstd += bc.dlogstd + inv.dlogstd;
            }
            return bc.loss + inv.loss;
        }
        case IlLossMode::kL1Reg:
        case IlLossMode::kL2Reg: {
            ModularPolicy::BatchTrace trace;
            const Matrix means =
                policy.modular_forward_batch(obs, nullptr, grads ? &trace : nullptr);
            NllBatch nll = gaussian_nll(means - expert_actions, logstd);
            const Matrix latent = grads ? trace.latent : mlp_forward_batch(policy.boss, obs);
            // penalty on the boss output, mean over the batch
            double penalty;
            Matrix dlatent;
            if (config.mode == IlLossMode::kL1Reg) {
                penalty = config.reg_weight * latent.array().abs().sum() / m;
                if (grads) {
                    dlatent = (config.reg_weight / m) * latent.array().sign().matrix();
                }
            } else {
                penalty = config.reg_weight * latent.array().square().sum() / m;
                if (grads) dlatent = (2.0 * config.reg_weight / m) * latent;
            }
            if (grads) {
                policy.backward_batch(trace, nll.dmeans, *grads, &dlatent);
                grads->logstd += nll.dlogstd;
            }
            return nll.loss + penalty;
        }
    }
    throw ConfigError("unknown IL loss mode");
}

DecompositionReport decomposition_report(const ModularPolicy& policy, const Matrix& obs,
                                         const Matrix& expert_actions, double sigma, Rng& rng) {
    if (obs.rows() == 0) throw DimensionError("decomposition_report on an empty batch");
    const Eigen::Index m = obs.rows();
    const Matrix latent = mlp_forward_batch(policy.boss, obs);
    const Matrix clean = policy.modules_forward_batch(latent, obs);
    Matrix noisy;
    if (sigma > 0.0) {
        const Matrix shifted = latent + draw_noise(m, policy.latent_dim(), sigma, rng);
        noisy = policy.modules_forward_batch(shifted, obs);
    } else {
        noisy = clean;
    }
    const Matrix bc_err = clean - expert_actions;
    const Matrix residual = noisy - clean;
    DecompositionReport report;
    report.l1_bc = bc_err.array().square().rowwise().sum().mean();
    report.l2_inv = residual.array().square().rowwise().sum().mean();
    report.lp_product = 2.0 * (bc_err.array() * residual.array()).rowwise().sum().mean();
    const double denom = report.l1_bc + report.l2_inv;
    report.ratio = denom > 0.0 ? std::abs(report.lp_product) / denom : 0.0;
    return report;
}

SampleDecomposition sample_decomposition(const ModularPolicy& policy, const Vector& obs,
                                         const Vector& expert_action, const Vector& eta) {
    const Vector latent = policy.boss_forward(obs);
    const Vector clean = policy.modules_forward(latent, obs);
    const Vector noisy = policy.modules_forward(latent + eta, obs);
    const Vector bc_err = clean - expert_action;
    const Vector residual = noisy - clean;
    const Vector ni_err = noisy - expert_action;

    SampleDecomposition out;
    out.ni_sq = ni_err.squaredNorm();
    out.bc_sq = bc_err.squaredNorm();
    out.inv_sq = residual.squaredNorm();
    out.prod = 2.0 * residual.dot(bc_err);

    const Vector& logstd = policy.logstd;
    const Eigen::ArrayXd var = (2.0 * logstd.array()).exp();
    const double log_sigma = logstd.sum() + kHalfLog2Pi * static_cast<double>(logstd.size());
    out.log_sigma_term = log_sigma;
    out.ni_nll = log_sigma + 0.5 * (ni_err.array().square() / var).sum();
    out.bc_nll = log_sigma + 0.5 * (bc_err.array().square() / var).sum();
    out.inv_nll = log_sigma + 0.5 * (residual.array().square() / var).sum();
    out.prod_nll = (residual.array() * bc_err.array() / var).sum();
    return out;
}

ModularOptimizer ModularOptimizer::zeros_like(const ModularPolicy& policy) {
    ModularOptimizer opt;
    opt.boss = AdamState::zeros_like(policy.boss);
    for (const auto& [type_id, roles] : policy.modules) {
        std::vector<AdamState> states;
        states.reserve(roles.size());
        for (const ParamStore& p : roles) states.push_back(AdamState::zeros_like(p));
        opt.modules.emplace(type_id, std::move(states));
    }
    opt.logstd = AdamVecState::zeros(static_cast<int>(policy.logstd.size()));
    return opt;
}

void ModularOptimizer::step(ModularPolicy& policy, const ModularGrads& grads, double lr,
                            double eps) {
    adam_step(policy.boss, grads.boss, boss, lr, 0.9, 0.999, eps);
    for (auto& [type_id, roles] : policy.modules) {
        const auto& role_grads = grads.modules.at(type_id);
        auto& role_states = modules.at(type_id);
        for (std::size_t r = 0; r < roles.size(); ++r) {
            adam_step(roles[r], role_grads[r], role_states[r], lr, 0.9, 0.999, eps);
        }
    }
    adam_step_vec(policy.logstd, grads.logstd, logstd, lr, 0.9, 0.999, eps);
}

namespace {

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

std::vector<double> dagger_iteration(ModularPolicy& policy, const Actor& expert, Env& env,
                                     const RunningNormalizer& normalizer,
                                     AggregatedDataset& dataset, const ILConfig& config,
                                     ModularOptimizer& optimizer, Rng& rng, int iteration,
                                     std::vector<DecompositionReport>* reports) {
    // roll one episode with deterministic means, no latent noise
    const int episode_len = env.config().resolved_episode_len();
    Matrix visited(episode_len, env.obs_dim());
    Vector raw = env.reset();
    for (int t = 0; t < episode_len; ++t) {
        const Vector nobs = normalizer.normalize(raw);
        visited.row(t) = nobs.transpose();
        auto result = env.step(policy.mean_action(nobs));
        raw = std::move(result.obs);
    }
    // expert labels are deterministic means
    Matrix labels(episode_len, env.num_joints());
    if (expert.kind == Actor::Kind::kMonolithic) {
        labels = mlp_forward_batch(expert.mono.net, visited);
    } else {
        labels = expert.modular.modular_forward_batch(visited, nullptr);
    }
    dataset.append(visited, labels, iteration);

    std::vector<double> epoch_losses;
    ModularGrads grads = ModularGrads::zeros_like(policy);
    for (int epoch = 0; epoch < config.epochs_per_iteration; ++epoch) {
        const std::vector<int> perm = shuffled_indices(dataset.size(), rng);
        double loss_sum = 0.0;
        int covered = 0;
        for (int start = 0; start < dataset.size(); start += config.batch_size) {
            const int size = std::min(config.batch_size, dataset.size() - start);
            Matrix obs(size, dataset.obs.cols());
            Matrix targets(size, dataset.expert_actions.cols());
            for (int i = 0; i < size; ++i) {
                obs.row(i) = dataset.obs.row(perm[start + i]);
                targets.row(i) = dataset.expert_actions.row(perm[start + i]);
            }
            grads.set_zero();
            const double loss = il_loss(policy, obs, targets, config, rng, &grads);
            if (!std::isfinite(loss) || !grads.all_finite()) {
                throw TrainingDiverged("non-finite IL loss");
            }
            optimizer.step(policy, grads, config.lr, config.adam_eps);
            loss_sum += loss * size;
            covered += size;
        }
        epoch_losses.push_back(loss_sum / covered);
        if (reports) {
            reports->push_back(decomposition_report(policy, dataset.obs, dataset.expert_actions,
                                                    config.sigma, rng));
        }
    }
    return epoch_losses;
}

TrainIlResult train_il(const Actor& expert, const RunningNormalizer& normalizer,
                       const EnvConfig& env_config, const PolicyConfig& policy_config,
                       const ILConfig& config, std::uint64_t seed, MetricsSink* sink,
                       const std::string& run_id, bool enforce_validation) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const bool deterministic_wall = max_worker_threads() <= 1;

    Rng master(seed);
    EnvConfig ec = env_config;
    ec.seed = master.fork(11).seed();
    Env env(ec);
    if (normalizer.dim() != env.obs_dim()) {
        throw DimensionError("expert normalizer does not match the environment");
    }

    Rng init_rng = master.fork(13);
    TrainIlResult result;
    result.policy = ModularPolicy::create(env.graph(), env.partition(), env.layout(),
                                          policy_config, init_rng, 0.0);
    ModularOptimizer optimizer = ModularOptimizer::zeros_like(result.policy);
    AggregatedDataset dataset;
    Rng train_rng = master.fork(17);

    for (int k = 0; k < config.dagger_iterations; ++k) {
        std::vector<DecompositionReport> reports;
        dagger_iteration(result.policy, expert, env, normalizer, dataset, config, optimizer,
                         train_rng, k, &reports);
        for (std::size_t e = 0; e < reports.size(); ++e) {
            result.ratio_curve.push_back(reports[e]);
            if (sink) {
                MetricsRow row;
                row.run_id = run_id;
                row.phase = "pretrain";
                row.index = static_cast<long>(k) * config.epochs_per_iteration +
                            static_cast<long>(e);
                row.env_steps = dataset.size();
                row.l1_bc = reports[e].l1_bc;
                row.l2_inv = reports[e].l2_inv;
                row.lp = reports[e].lp_product;
                row.ratio = reports[e].ratio;
                row.wall_seconds =
                    deterministic_wall
                        ? 0.0
                        : std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                              .count();
                sink->write(row);
            }
        }
    }

    Actor distilled;
    distilled.kind = Actor::Kind::kModular;
    distilled.modular = result.policy;
    const std::uint64_t eval_seed = master.fork(23).seed();
    result.validation_score = evaluate_policy(distilled, normalizer, env_config,
                                              config.validation_trajectories, eval_seed);
    result.expert_score =
        evaluate_policy(expert, normalizer, env_config, config.validation_trajectories, eval_seed);

    if (sink) {
        MetricsRow row;
        row.run_id = run_id;
        row.phase = "pretrain";
        row.index = static_cast<long>(config.dagger_iterations) * config.epochs_per_iteration;
        row.env_steps = dataset.size();
        row.mean_reward = result.expert_score;
        row.reported_reward = result.validation_score;
        row.wall_seconds =
            deterministic_wall
                ? 0.0
                : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        sink->write(row);
    }

    const double bar = result.expert_score - 0.1 * std::abs(result.expert_score);
    if (enforce_validation && result.validation_score < bar) {
        throw ValidationFailure("distilled policy reached " +
                                std::to_string(result.validation_score) + " vs expert " +
                                std::to_string(result.expert_score));
    }
    return result;
}

double summed_objective_eval(const ModularPolicy& policy, const Matrix& obs,
                             const Matrix& expert_actions, double sigma, int epochs, Rng& rng) {
    if (obs.rows() == 0) throw DimensionError("empty evaluation set");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    const Matrix latent = mlp_forward_batch(policy.boss, obs);
    const Matrix clean = policy.modules_forward_batch(latent, obs);
    const double bc = (clean - expert_actions).array().square().rowwise().sum().mean();
    double inv_total = 0.0;
    for (int e = 0; e < epochs; ++e) {
        const Matrix shifted =
            latent + draw_noise(obs.rows(), policy.latent_dim(), sigma, rng);
        const Matrix noisy = policy.modules_forward_batch(shifted, obs);
        inv_total += (noisy - clean).array().square().rowwise().sum().mean();
    }
    return bc + inv_total / epochs;
}

Matrix sample_expert_states(const Actor& expert, const RunningNormalizer& normalizer,
                            const EnvConfig& env_config, int episodes, Rng& rng) {
    if (episodes < 1) throw ConfigError("need at least one episode");
    std::vector<Vector> rows;
    for (int e = 0; e < episodes; ++e) {
        EnvConfig ec = env_config;
        ec.seed = rng.fork(31 + e).seed();
        Env env(ec);
        Rng action_rng = rng.fork(57 + e);
        Vector raw = env.reset();
        while (true) {
            const Vector nobs = normalizer.normalize(raw);
            rows.push_back(nobs);
            const Vector means = expert.mean_action(nobs);
            auto [action, logp] = sample_action(means, expert.logstd(), action_rng);
            auto result = env.step(action);
            if (result.done) break;
            raw = std::move(result.obs);
        }
    }
    Matrix out(static_cast<Eigen::Index>(rows.size()), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return out;
}

}  // namespace memo
