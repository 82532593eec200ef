#include "memo/policy.hpp"

#include <cmath>
#include <string>

namespace memo {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)
constexpr double kPolicyOutputGain = 0.01;

ParamStore make_boss(int obs_dim, int latent_dim, const PolicyConfig& config, Rng& rng) {
    if (config.boss_layers < 2) throw DimensionError("boss needs at least 2 layers");
    std::vector<int> dims{obs_dim};
    for (int i = 0; i < config.boss_layers - 1; ++i) dims.push_back(config.signal_dim);
    dims.push_back(latent_dim);
    std::vector<Activation> acts(dims.size() - 1, Activation::kTanh);
    std::vector<double> gains(dims.size() - 1, 1.0);
    return make_mlp(dims, acts, gains, rng);
}

ParamStore make_role_net(int per_joint_dim, const PolicyConfig& config, Rng& rng) {
    std::vector<int> dims{per_joint_dim + config.signal_dim};
    for (int i = 0; i < config.module_hidden_layers; ++i) dims.push_back(config.module_hidden);
    dims.push_back(1);
    std::vector<Activation> acts(dims.size() - 1, Activation::kTanh);
    acts.back() = Activation::kIdentity;
    std::vector<double> gains(dims.size() - 1, 1.0);
    gains.back() = kPolicyOutputGain;
    return make_mlp(dims, acts, gains, rng);
}
}  // namespace

ModularPolicy ModularPolicy::create(const MorphologyGraph& graph,
                                    const ModulePartition& partition, const ObsLayout& layout,
                                    const PolicyConfig& config, Rng& rng, double logstd_init) {
    validate_partition(graph, partition);
    ModularPolicy policy;
    policy.partition = partition;
    policy.layout = layout;
    policy.signal_dim = config.signal_dim;
    policy.boss = make_boss(layout.total_dim(), partition.num_instances() * config.signal_dim,
                            config, rng);
    for (const auto& [type_id, arity] : partition.type_arity) {
        std::vector<ParamStore> roles;
        roles.reserve(arity);
        for (int r = 0; r < arity; ++r) {
            roles.push_back(make_role_net(layout.per_joint_dim, config, rng));
        }
        policy.modules.emplace(type_id, std::move(roles));
    }
    policy.logstd = Vector::Constant(graph.num_joints(), logstd_init);
    return policy;
}

void ModularPolicy::check_obs(Eigen::Index dim) const {
    if (dim != layout.total_dim()) {
        throw DimensionError("observation size " + std::to_string(dim) +
                             " does not match layout total dim " +
                             std::to_string(layout.total_dim()));
    }
}

Vector ModularPolicy::boss_forward(const Vector& normalized_obs, MlpTape* tape) const {
    check_obs(normalized_obs.size());
    return mlp_forward(boss, normalized_obs, tape);
}

Vector ModularPolicy::module_forward(int instance_id, const Vector& signal_slice,
                                     const Vector& local_obs) const {
    if (instance_id < 0 || instance_id >= partition.num_instances()) {
        throw DimensionError("unknown module instance");
    }
    const ModuleInstance& inst = partition.instances[instance_id];
    const auto& roles = modules.at(inst.type_id);
    const int arity = static_cast<int>(inst.joint_ids.size());
    if (signal_slice.size() != signal_dim) throw DimensionError("signal slice width != D");
    if (local_obs.size() != arity * layout.per_joint_dim) {
        throw DimensionError("local observation size does not match module arity");
    }
    Vector means(arity);
    Vector input(layout.per_joint_dim + signal_dim);
    for (int r = 0; r < arity; ++r) {
        input.head(layout.per_joint_dim) =
            local_obs.segment(r * layout.per_joint_dim, layout.per_joint_dim);
        input.tail(signal_dim) = signal_slice;
        means(r) = mlp_forward(roles[r], input)(0);
    }
    return means;
}

Vector ModularPolicy::modules_forward(const Vector& signal, const Vector& normalized_obs,
                                      std::vector<MlpTape>* tapes) const {
    check_obs(normalized_obs.size());
    if (signal.size() != latent_dim()) throw DimensionError("signal length != |P|*D");
    Vector means(layout.num_joints);
    if (tapes) tapes->assign(layout.num_joints, MlpTape{});
    Vector input(layout.per_joint_dim + signal_dim);
    for (const ModuleInstance& inst : partition.instances) {
        const auto& roles = modules.at(inst.type_id);
        const auto seg = signal.segment(inst.instance_id * signal_dim, signal_dim);
        for (std::size_t r = 0; r < inst.joint_ids.size(); ++r) {
            const int j = inst.joint_ids[r];
            const auto [lo, hi] = layout.joint_slices[j];
            input.head(layout.per_joint_dim) = normalized_obs.segment(lo, hi - lo);
            input.tail(signal_dim) = seg;
            MlpTape* tape = tapes ? &(*tapes)[j] : nullptr;
            means(j) = mlp_forward(roles[r], input, tape)(0);
        }
    }
    return means;
}

Vector ModularPolicy::modular_forward(const Vector& normalized_obs, const NoiseSpec& noise,
                                      Rng* rng, Trace* trace) const {
    MlpTape* boss_tape = trace ? &trace->boss_tape : nullptr;
    Vector latent = boss_forward(normalized_obs, boss_tape);
    Vector signal;
    Vector eta;
    if (noise.active()) {
        if (!rng) throw DimensionError("noise requested without an rng");
        eta.resize(latent.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = noise.sigma * rng->gaussian();
        signal = latent + eta;
    } else {
        signal = latent;
    }
    std::vector<MlpTape>* tapes = trace ? &trace->joint_tapes : nullptr;
    Vector means = modules_forward(signal, normalized_obs, tapes);
    if (trace) {
        trace->latent = std::move(latent);
        trace->noise = std::move(eta);
        trace->signal = std::move(signal);
    }
    return means;
}

Vector ModularPolicy::backward(Trace& trace, const Vector& means_grad,
                               ModularGrads& grads) const {
    if (means_grad.size() != layout.num_joints) {
        throw DimensionError("means gradient size != joint count");
    }
    Vector dlatent = Vector::Zero(latent_dim());
    for (const ModuleInstance& inst : partition.instances) {
        auto& role_grads = grads.modules.at(inst.type_id);
        for (std::size_t r = 0; r < inst.joint_ids.size(); ++r) {
            const int j = inst.joint_ids[r];
            Vector out_grad(1);
            out_grad(0) = means_grad(j);
            const Vector dinput = mlp_backward(trace.joint_tapes[j], out_grad, role_grads[r]);
            dlatent.segment(inst.instance_id * signal_dim, signal_dim) += dinput.tail(signal_dim);
        }
    }
    mlp_backward(trace.boss_tape, dlatent, grads.boss);
    return dlatent;
}

Matrix ModularPolicy::modules_forward_batch(const Matrix& signal, const Matrix& normalized_obs,
                                            std::vector<BatchTape>* tapes) const {
    check_obs(normalized_obs.cols());
    if (signal.cols() != latent_dim() || signal.rows() != normalized_obs.rows()) {
        throw DimensionError("batched signal shape mismatch");
    }
    const Eigen::Index b = normalized_obs.rows();
    Matrix means(b, layout.num_joints);
    if (tapes) tapes->assign(layout.num_joints, BatchTape{});
    Matrix input(b, layout.per_joint_dim + signal_dim);
    for (const ModuleInstance& inst : partition.instances) {
        const auto& roles = modules.at(inst.type_id);
        const auto seg = signal.middleCols(inst.instance_id * signal_dim, signal_dim);
        for (std::size_t r = 0; r < inst.joint_ids.size(); ++r) {
            const int j = inst.joint_ids[r];
            const auto [lo, hi] = layout.joint_slices[j];
            input.leftCols(layout.per_joint_dim) = normalized_obs.middleCols(lo, hi - lo);
            input.rightCols(signal_dim) = seg;
            BatchTape* tape = tapes ? &(*tapes)[j] : nullptr;
            means.col(j) = mlp_forward_batch(roles[r], input, tape).col(0);
        }
    }
    return means;
}

Matrix ModularPolicy::modular_forward_batch(const Matrix& normalized_obs,
                                            const Matrix* latent_noise, BatchTrace* trace) const {
    check_obs(normalized_obs.cols());
    BatchTape* boss_tape = trace ? &trace->boss_tape : nullptr;
    Matrix latent = mlp_forward_batch(boss, normalized_obs, boss_tape);
    Matrix signal;
    if (latent_noise && latent_noise->size() > 0) {
        if (latent_noise->rows() != latent.rows() || latent_noise->cols() != latent.cols()) {
            throw DimensionError("latent noise shape mismatch");
        }
        signal = latent + *latent_noise;
    } else {
        signal = latent;
    }
    std::vector<BatchTape>* tapes = trace ? &trace->joint_tapes : nullptr;
    Matrix means = modules_forward_batch(signal, normalized_obs, tapes);
    if (trace) {
        trace->latent = std::move(latent);
        trace->signal = std::move(signal);
    }
    return means;
}

Matrix ModularPolicy::backward_batch(BatchTrace& trace, const Matrix& means_grad,
                                     ModularGrads& grads,
                                     const Matrix* extra_latent_grad) const {
    if (means_grad.cols() != layout.num_joints) {
        throw DimensionError("means gradient cols != joint count");
    }
    Matrix dlatent = Matrix::Zero(means_grad.rows(), latent_dim());
    for (const ModuleInstance& inst : partition.instances) {
        auto& role_grads = grads.modules.at(inst.type_id);
        for (std::size_t r = 0; r < inst.joint_ids.size(); ++r) {
            const int j = inst.joint_ids[r];
            const Matrix dinput =
                mlp_backward_batch(trace.joint_tapes[j], means_grad.col(j), role_grads[r]);
            dlatent.middleCols(inst.instance_id * signal_dim, signal_dim) +=
                dinput.rightCols(signal_dim);
        }
    }
    if (extra_latent_grad) {
        if (extra_latent_grad->rows() != dlatent.rows() ||
            extra_latent_grad->cols() != dlatent.cols()) {
            throw DimensionError("extra latent gradient shape mismatch");
        }
        dlatent += *extra_latent_grad;
    }
    mlp_backward_batch(trace.boss_tape, dlatent, grads.boss);
    return dlatent;
}

ModularGrads ModularGrads::zeros_like(const ModularPolicy& policy) {
    ModularGrads g;
    g.boss = GradStore::zeros_like(policy.boss);
    for (const auto& [type_id, roles] : policy.modules) {
        std::vector<GradStore> role_grads;
        role_grads.reserve(roles.size());
        for (const ParamStore& p : roles) role_grads.push_back(GradStore::zeros_like(p));
        g.modules.emplace(type_id, std::move(role_grads));
    }
    g.logstd = Vector::Zero(policy.logstd.size());
    return g;
}

void ModularGrads::set_zero() {
    boss.set_zero();
    for (auto& [type_id, roles] : modules) {
        for (GradStore& g : roles) g.set_zero();
    }
    logstd.setZero();
}

void ModularGrads::scale(double factor) {
    boss.scale(factor);
    for (auto& [type_id, roles] : modules) {
        for (GradStore& g : roles) g.scale(factor);
    }
    logstd *= factor;
}

double ModularGrads::squared_norm() const {
    double s = boss.squared_norm() + logstd.squaredNorm();
    for (const auto& [type_id, roles] : modules) {
        for (const GradStore& g : roles) s += g.squared_norm();
    }
    return s;
}

bool ModularGrads::all_finite() const {
    if (!boss.all_finite() || !logstd.allFinite()) return false;
    for (const auto& [type_id, roles] : modules) {
        for (const GradStore& g : roles) {
            if (!g.all_finite()) return false;
        }
    }
    return true;
}

std::vector<Vector> split_latent(const Vector& latent, int num_instances, int signal_dim) {
    if (latent.size() != static_cast<Eigen::Index>(num_instances) * signal_dim) {
        throw DimensionError("latent length != |P|*D");
    }
    std::vector<Vector> slices;
    slices.reserve(num_instances);
    for (int i = 0; i < num_instances; ++i) {
        slices.push_back(latent.segment(i * signal_dim, signal_dim));
    }
    return slices;
}

MonolithicPolicy MonolithicPolicy::create(int obs_dim, int num_joints, int num_instances,
                                          const PolicyConfig& config, Rng& rng,
                                          double logstd_init) {
    MonolithicPolicy policy;
    std::vector<int> dims{obs_dim};
    for (int i = 0; i < config.boss_layers - 1; ++i) dims.push_back(config.signal_dim);
    dims.push_back(num_instances * config.signal_dim);
    dims.push_back(num_joints);
    std::vector<Activation> acts(dims.size() - 1, Activation::kTanh);
    acts.back() = Activation::kIdentity;
    std::vector<double> gains(dims.size() - 1, 1.0);
    gains.back() = kPolicyOutputGain;
    policy.net = make_mlp(dims, acts, gains, rng);
    policy.logstd = Vector::Constant(num_joints, logstd_init);
    return policy;
}

Critic Critic::create(int obs_dim, int hidden_dim, Rng& rng) {
    Critic critic;
    critic.net = make_mlp({obs_dim, hidden_dim, hidden_dim, 1},
                          {Activation::kTanh, Activation::kTanh, Activation::kIdentity},
                          {1.0, 1.0, 1.0}, rng);
    return critic;
}

double log_prob(const Vector& means, const Vector& logstd, const Vector& action) {
    if (means.size() != logstd.size() || means.size() != action.size()) {
        throw DimensionError("log_prob length mismatch");
    }
    const Eigen::ArrayXd sigma = logstd.array().exp();
    const Eigen::ArrayXd z = (action - means).array() / sigma;
    return (-logstd.array() - kHalfLog2Pi - 0.5 * z.square()).sum();
}

std::pair<Vector, double> sample_action(const Vector& means, const Vector& logstd, Rng& rng) {
    if (means.size() != logstd.size()) throw DimensionError("sample_action length mismatch");
    Vector action(means.size());
    for (Eigen::Index i = 0; i < means.size(); ++i) {
        action(i) = means(i) + std::exp(logstd(i)) * rng.gaussian();
    }
    return {action, log_prob(means, logstd, action)};
}

double gaussian_entropy(const Vector& logstd) {
    return logstd.sum() + logstd.size() * (0.5 + kHalfLog2Pi);
}

Vector dlogp_dmean(const Vector& means, const Vector& logstd, const Vector& action) {
    const Eigen::ArrayXd var = (2.0 * logstd.array()).exp();
    return ((action - means).array() / var).matrix();
}

Vector dlogp_dlogstd(const Vector& means, const Vector& logstd, const Vector& action) {
    const Eigen::ArrayXd var = (2.0 * logstd.array()).exp();
    return ((action - means).array().square() / var - 1.0).matrix();
}

}  // namespace memo
