#pragma once

#include <string>
#include <vector>

#include "memo/env.hpp"
#include "memo/metrics.hpp"
#include "memo/policy.hpp"

namespace memo {

enum class IlLossMode { kNoiseInjection, kBcOnly, kDualLoss, kL1Reg, kL2Reg };

struct ILConfig {
    IlLossMode mode = IlLossMode::kNoiseInjection;
    double sigma = 1.0;
    double reg_weight = 1e-3;  // w for the L1/L2 boss-output penalties
    int dagger_iterations = 40;
    int epochs_per_iteration = 5;
    int batch_size = 256;
    double lr = 1e-3;
    int validation_trajectories = 5;
    double adam_eps = 1e-8;

    void validate() const;
};

// Expert-labeled states, append-only across DAgger iterations.
struct AggregatedDataset {
    Matrix obs;             // normalized observations
    Matrix expert_actions;  // expert deterministic means
    std::vector<int> iteration_tags;

    int size() const { return static_cast<int>(obs.rows()); }
    void append(const Matrix& new_obs, const Matrix& new_actions, int iteration);
};

struct DecompositionReport {
    double l1_bc = 0.0;      // mean behavior-cloning squared loss
    double l2_inv = 0.0;     // mean invariance-to-noise squared loss
    double lp_product = 0.0; // mean product term
    double ratio = 0.0;      // |lp| / (l1 + l2)
};

// Mean squared behavior-cloning loss (reporting form).
double bc_loss(const ModularPolicy& policy, const Matrix& obs, const Matrix& expert_actions);

// D(s, eta) = W(B(s)+eta) - W(B(s)).
Vector invariance_residual(const ModularPolicy& policy, const Vector& normalized_obs,
                           const Vector& eta);

// Negative-log-likelihood training loss under the configured mode; when
// `grads` is given the parameter gradients (including logstd) are
// accumulated. Fresh noise is drawn per sample from `rng`.
double il_loss(const ModularPolicy& policy, const Matrix& obs, const Matrix& expert_actions,
               const ILConfig& config, Rng& rng, ModularGrads* grads);

DecompositionReport decomposition_report(const ModularPolicy& policy, const Matrix& obs,
                                         const Matrix& expert_actions, double sigma, Rng& rng);

// All terms of the squared-error and NLL decompositions for one (state,
// expert action, eta) triple; identity checks assemble these directly.
struct SampleDecomposition {
    double ni_sq = 0.0;
    double bc_sq = 0.0;
    double inv_sq = 0.0;
    double prod = 0.0;
    double ni_nll = 0.0;
    double bc_nll = 0.0;
    double inv_nll = 0.0;
    double log_sigma_term = 0.0;  // sum of log(sigma_u*sqrt(2*pi))
    double prod_nll = 0.0;        // cross term of the NLL form
};
SampleDecomposition sample_decomposition(const ModularPolicy& policy, const Vector& obs,
                                         const Vector& expert_action, const Vector& eta);

struct ModularOptimizer {
    AdamState boss;
    std::map<int, std::vector<AdamState>> modules;
    AdamVecState logstd;

    static ModularOptimizer zeros_like(const ModularPolicy& policy);
    void step(ModularPolicy& policy, const ModularGrads& grads, double lr, double eps);
};

// One DAgger round: roll a full episode with the policy's deterministic
// means (no latent noise), label every visited state with the expert's mean
// action, append, then optimize over the aggregated dataset. Returns one loss
// per epoch; per-epoch decomposition reports (fresh noise over the full
// dataset) land in `reports` when given.
std::vector<double> dagger_iteration(ModularPolicy& policy, const Actor& expert, Env& env,
                                     const RunningNormalizer& normalizer,
                                     AggregatedDataset& dataset, const ILConfig& config,
                                     ModularOptimizer& optimizer, Rng& rng, int iteration,
                                     std::vector<DecompositionReport>* reports);

struct TrainIlResult {
    ModularPolicy policy;
    double validation_score = 0.0;
    double expert_score = 0.0;
    std::vector<DecompositionReport> ratio_curve;  // one entry per epoch
};

// Phase 2. Distills the expert into a fresh modular policy and enforces the
// 90%-of-expert validation bar (ValidationFailure otherwise).
TrainIlResult train_il(const Actor& expert, const RunningNormalizer& normalizer,
                       const EnvConfig& env_config, const PolicyConfig& policy_config,
                       const ILConfig& config, std::uint64_t seed, MetricsSink* sink,
                       const std::string& run_id, bool enforce_validation = true);

// Mean over fresh-noise epochs of (mean bc squared + mean invariance
// squared); the relative comparison protocol behind the dual-loss ablation.
double summed_objective_eval(const ModularPolicy& policy, const Matrix& obs,
                             const Matrix& expert_actions, double sigma, int epochs, Rng& rng);

// States visited by stochastic expert rollouts (normalized), for held-out
// evaluation sets.
Matrix sample_expert_states(const Actor& expert, const RunningNormalizer& normalizer,
                            const EnvConfig& env_config, int episodes, Rng& rng);

}  // namespace memo
