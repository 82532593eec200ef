#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "memo/env.hpp"
#include "memo/morphology.hpp"
#include "memo/nn.hpp"
#include "memo/rng.hpp"

namespace memo {

struct NoiseSpec {
    double sigma = 1.0;
    bool enabled = false;

    bool active() const { return enabled && sigma > 0.0; }
};

struct PolicyConfig {
    int signal_dim = 32;         // D, per-module segment width
    int module_hidden = 32;      // h, per-joint hidden width
    int boss_layers = 2;         // total boss layers (>= 2)
    int module_hidden_layers = 2;
};

// Boss + parameter-shared worker modules. Instances of a type reference the
// same ParamStore, so one optimizer step updates every instance at once.
// Modules only ever see their own joints' local features plus their latent
// slice.
class ModularPolicy {
public:
    ModularPolicy() = default;

    static ModularPolicy create(const MorphologyGraph& graph, const ModulePartition& partition,
                                const ObsLayout& layout, const PolicyConfig& config, Rng& rng,
                                double logstd_init = 0.0);

    int latent_dim() const { return partition.num_instances() * signal_dim; }
    int num_joints() const { return layout.num_joints; }

    struct Trace {
        MlpTape boss_tape;
        std::vector<MlpTape> joint_tapes;  // indexed by joint id
        Vector latent;                     // H
        Vector noise;                      // eta (empty when no noise drawn)
        Vector signal;                     // H + eta, what the modules consumed
    };

    struct BatchTrace {
        BatchTape boss_tape;
        std::vector<BatchTape> joint_tapes;
        Matrix latent;
        Matrix signal;
    };

    Vector boss_forward(const Vector& normalized_obs, MlpTape* tape = nullptr) const;

    // Evaluate the module stack at an explicit latent signal.
    Vector modules_forward(const Vector& signal, const Vector& normalized_obs,
                           std::vector<MlpTape>* tapes = nullptr) const;

    // One instance's action means from its D-wide signal slice and the
    // concatenated local observations of its joints.
    Vector module_forward(int instance_id, const Vector& signal_slice,
                          const Vector& local_obs) const;

    Vector modular_forward(const Vector& normalized_obs, const NoiseSpec& noise, Rng* rng,
                           Trace* trace = nullptr) const;

    Vector mean_action(const Vector& normalized_obs) const {
        return modular_forward(normalized_obs, NoiseSpec{0.0, false}, nullptr);
    }

    // Reverse pass for a traced forward. Accumulates into `grads` and returns
    // dL/dH, the gradient at the tagged latent endpoint.
    Vector backward(Trace& trace, const Vector& means_grad, struct ModularGrads& grads) const;

    Matrix modular_forward_batch(const Matrix& normalized_obs, const Matrix* latent_noise,
                                 BatchTrace* trace = nullptr) const;
    Matrix modules_forward_batch(const Matrix& signal, const Matrix& normalized_obs,
                                 std::vector<BatchTape>* tapes = nullptr) const;
    // extra_latent_grad, when given, is added to the module-path gradient at H
    // before the boss reverse pass (penalties on the boss output hook in here).
    Matrix backward_batch(BatchTrace& trace, const Matrix& means_grad, struct ModularGrads& grads,
                          const Matrix* extra_latent_grad = nullptr) const;

    ParamStore boss;
    std::map<int, std::vector<ParamStore>> modules;  // type -> per-role nets
    Vector logstd;
    ModulePartition partition;
    ObsLayout layout;
    int signal_dim = 0;

private:
    void check_obs(Eigen::Index dim) const;
};

struct ModularGrads {
    GradStore boss;
    std::map<int, std::vector<GradStore>> modules;
    Vector logstd;

    static ModularGrads zeros_like(const ModularPolicy& policy);
    void set_zero();
    void scale(double factor);
    double squared_norm() const;
    bool all_finite() const;
};

std::vector<Vector> split_latent(const Vector& latent, int num_instances, int signal_dim);

// 2-layer Tanh trunk sized like the boss, plus a linear action decoder.
struct MonolithicPolicy {
    ParamStore net;
    Vector logstd;

    static MonolithicPolicy create(int obs_dim, int num_joints, int num_instances,
                                   const PolicyConfig& config, Rng& rng,
                                   double logstd_init = 0.0);

    Vector mean_action(const Vector& normalized_obs) const { return mlp_forward(net, normalized_obs); }
};

struct Critic {
    ParamStore net;

    static Critic create(int obs_dim, int hidden_dim, Rng& rng);

    double value(const Vector& normalized_obs) const { return mlp_forward(net, normalized_obs)(0); }
};

// Diagonal Gaussian head.
double log_prob(const Vector& means, const Vector& logstd, const Vector& action);
std::pair<Vector, double> sample_action(const Vector& means, const Vector& logstd, Rng& rng);
double gaussian_entropy(const Vector& logstd);
Vector dlogp_dmean(const Vector& means, const Vector& logstd, const Vector& action);
Vector dlogp_dlogstd(const Vector& means, const Vector& logstd, const Vector& action);

// Either actor architecture behind one front, plus the optional latent noise
// used by the naive-NI RL ablation.
struct Actor {
    enum class Kind { kMonolithic, kModular };

    Kind kind = Kind::kMonolithic;
    MonolithicPolicy mono;
    ModularPolicy modular;
    NoiseSpec train_noise;  // applied in RL rollouts/updates only when enabled

    Vector& logstd() { return kind == Kind::kMonolithic ? mono.logstd : modular.logstd; }
    const Vector& logstd() const {
        return kind == Kind::kMonolithic ? mono.logstd : modular.logstd;
    }
    int action_dim() const { return static_cast<int>(logstd().size()); }

    // Evaluation path: deterministic means, never noisy.
    Vector mean_action(const Vector& normalized_obs) const {
        return kind == Kind::kMonolithic ? mono.mean_action(normalized_obs)
                                         : modular.mean_action(normalized_obs);
    }
};

}  // namespace memo
