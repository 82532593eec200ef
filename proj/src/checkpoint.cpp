#include "memo/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

namespace memo {

namespace {

constexpr char kMagic[8] = {'M', 'E', 'M', 'O', 'C', 'K', 'P', 'T'};

std::uint32_t crc32_update(std::uint32_t crc, const void* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    const auto* bytes = static_cast<const unsigned char*>(data);
    crc ^= 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ bytes[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

class Writer {
public:
    void raw(const void* data, std::size_t len) {
        const auto* bytes = static_cast<const char*>(data);
        buffer_.insert(buffer_.end(), bytes, bytes + len);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void name(const std::string& s) {
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }
    void array(const std::string& label, const Matrix& m) {
        name(label);
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    }
    const std::vector<char>& buffer() const { return buffer_; }

private:
    std::vector<char> buffer_;
};

class Reader {
public:
    explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

    void raw(void* out, std::size_t len) {
        if (pos_ + len > data_.size()) throw CorruptFile("checkpoint truncated");
        std::memcpy(out, data_.data() + pos_, len);
        pos_ += len;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint16_t u16() {
        std::uint16_t v;
        raw(&v, 2);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    std::string name() {
        const std::uint16_t len = u16();
        std::string s(len, '\0');
        raw(s.data(), len);
        return s;
    }
    Matrix array() {
        const std::uint32_t rows = u32();
        const std::uint32_t cols = u32();
        const std::size_t count = static_cast<std::size_t>(rows) * cols;
        if (count > (data_.size() - pos_) / sizeof(double)) {
            throw CorruptFile("checkpoint array overruns the file");
        }
        Matrix m(rows, cols);
        raw(m.data(), sizeof(double) * count);
        return m;
    }
    std::size_t pos() const { return pos_; }

private:
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

void write_param_store(Writer& w, const std::string& prefix, const ParamStore& params,
                       std::uint32_t& count, bool dry_count) {
    for (int i = 0; i < params.num_layers(); ++i) {
        count += 2;
        if (dry_count) continue;
        const Layer& l = params.layers()[i];
        w.array(prefix + "/W" + std::to_string(i), l.weight);
        w.array(prefix + "/b" + std::to_string(i) + (l.activation == Activation::kTanh ? "t" : "i"),
                Matrix(l.bias));
    }
}

ParamStore read_param_store(const std::map<std::string, Matrix>& arrays,
                            const std::string& prefix) {
    ParamStore params;
    for (int i = 0;; ++i) {
        const auto w_it = arrays.find(prefix + "/W" + std::to_string(i));
        if (w_it == arrays.end()) break;
        const std::string b_base = prefix + "/b" + std::to_string(i);
        Activation act = Activation::kTanh;
        auto b_it = arrays.find(b_base + "t");
        if (b_it == arrays.end()) {
            b_it = arrays.find(b_base + "i");
            act = Activation::kIdentity;
        }
        if (b_it == arrays.end()) throw CorruptFile("missing bias array for " + prefix);
        params.add_layer(w_it->second, Vector(b_it->second.col(0)), act);
    }
    if (params.num_layers() == 0) throw CorruptFile("missing parameter arrays for " + prefix);
    return params;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.u32(Checkpoint::kFormatVersion);
    const bool modular = checkpoint.actor.kind == Actor::Kind::kModular;
    w.u8(modular ? 1 : 0);
    w.u8(checkpoint.env.kind == EnvKind::kCrawler ? 0 : 1);
    w.u8(checkpoint.env.terrain == Terrain::kFlat ? 0 : 1);
    w.u8(checkpoint.env.object == GraspObject::kDisk ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(checkpoint.env.count_a));
    w.u32(static_cast<std::uint32_t>(checkpoint.env.count_b));
    w.u32(static_cast<std::uint32_t>(checkpoint.policy_config.signal_dim));
    w.u32(static_cast<std::uint32_t>(checkpoint.policy_config.module_hidden));
    w.u32(static_cast<std::uint32_t>(checkpoint.policy_config.boss_layers));
    w.u32(static_cast<std::uint32_t>(checkpoint.policy_config.module_hidden_layers));
    if (modular) {
        const auto& partition = checkpoint.actor.modular.partition;
        w.u32(static_cast<std::uint32_t>(partition.type_arity.size()));
        for (const auto& [type_id, arity] : partition.type_arity) {
            w.i32(type_id);
            w.i32(arity);
        }
    } else {
        w.u32(0);
    }
    w.u32(static_cast<std::uint32_t>(checkpoint.actor.logstd().size()));
    w.u8(checkpoint.critic.has_value() ? 1 : 0);
    w.u64(checkpoint.rng_seed);
    w.u64(checkpoint.rng_draws);

    // count arrays, then emit
    std::uint32_t count = 0;
    Writer dry;
    if (modular) {
        write_param_store(dry, "boss", checkpoint.actor.modular.boss, count, true);
        for (const auto& [type_id, roles] : checkpoint.actor.modular.modules) {
            for (std::size_t r = 0; r < roles.size(); ++r) {
                write_param_store(dry, "t" + std::to_string(type_id) + "/r" + std::to_string(r),
                                  roles[r], count, true);
            }
        }
    } else {
        write_param_store(dry, "mono", checkpoint.actor.mono.net, count, true);
    }
    count += 1;  // logstd
    if (checkpoint.critic) {
        write_param_store(dry, "critic", checkpoint.critic->net, count, true);
    }
    count += 3;  // normalizer count/mean/m2
    w.u32(count);

    std::uint32_t emitted = 0;
    if (modular) {
        write_param_store(w, "boss", checkpoint.actor.modular.boss, emitted, false);
        for (const auto& [type_id, roles] : checkpoint.actor.modular.modules) {
            for (std::size_t r = 0; r < roles.size(); ++r) {
                write_param_store(w, "t" + std::to_string(type_id) + "/r" + std::to_string(r),
                                  roles[r], emitted, false);
            }
        }
    } else {
        write_param_store(w, "mono", checkpoint.actor.mono.net, emitted, false);
    }
    w.array("logstd", Matrix(checkpoint.actor.logstd()));
    if (checkpoint.critic) {
        write_param_store(w, "critic", checkpoint.critic->net, emitted, false);
    }
    w.array("norm/count", Matrix::Constant(1, 1, checkpoint.normalizer.count()));
    w.array("norm/mean", Matrix(checkpoint.normalizer.mean()));
    w.array("norm/m2", Matrix(checkpoint.normalizer.m2()));

    const std::uint32_t crc = crc32_update(0, w.buffer().data(), w.buffer().size());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    out.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    if (!out) throw IoError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < sizeof(kMagic) + 8) throw CorruptFile("checkpoint too small");

    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, data.data() + data.size() - 4, 4);
    const std::uint32_t crc = crc32_update(0, data.data(), data.size() - 4);
    if (crc != stored_crc) throw CorruptFile("checkpoint checksum mismatch");
    data.resize(data.size() - 4);

    Reader r(std::move(data));
    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CorruptFile("not a memo checkpoint");
    }
    const std::uint32_t version = r.u32();
    if (version != Checkpoint::kFormatVersion) {
        throw VersionMismatch("unsupported checkpoint version " + std::to_string(version));
    }

    Checkpoint ckpt;
    const bool modular = r.u8() != 0;
    ckpt.env.kind = r.u8() == 0 ? EnvKind::kCrawler : EnvKind::kLifter;
    ckpt.env.terrain = r.u8() == 0 ? Terrain::kFlat : Terrain::kRidged;
    ckpt.env.object = r.u8() == 0 ? GraspObject::kDisk : GraspObject::kWideDisk;
    ckpt.env.count_a = static_cast<int>(r.u32());
    ckpt.env.count_b = static_cast<int>(r.u32());
    ckpt.policy_config.signal_dim = static_cast<int>(r.u32());
    ckpt.policy_config.module_hidden = static_cast<int>(r.u32());
    ckpt.policy_config.boss_layers = static_cast<int>(r.u32());
    ckpt.policy_config.module_hidden_layers = static_cast<int>(r.u32());
    const std::uint32_t num_types = r.u32();
    std::map<int, int> type_arity;
    for (std::uint32_t i = 0; i < num_types; ++i) {
        const int type_id = r.i32();
        type_arity[type_id] = r.i32();
    }
    const std::uint32_t num_joints = r.u32();
    const bool has_critic = r.u8() != 0;
    ckpt.rng_seed = r.u64();
    ckpt.rng_draws = r.u64();

    const std::uint32_t array_count = r.u32();
    std::map<std::string, Matrix> arrays;
    for (std::uint32_t i = 0; i < array_count; ++i) {
        std::string label = r.name();
        arrays.emplace(std::move(label), r.array());
    }

    // rebuild the morphology context
    auto built = ckpt.env.kind == EnvKind::kCrawler
                     ? build_crawler(ckpt.env.count_a, ckpt.env.count_b)
                     : build_lifter(ckpt.env.count_a, ckpt.env.count_b);
    const ObsLayout layout = observation_layout(built.first, built.second, ckpt.env.kind);
    if (static_cast<std::uint32_t>(built.first.num_joints()) != num_joints) {
        throw CorruptFile("checkpoint joint count does not match its morphology");
    }

    if (modular) {
        ckpt.actor.kind = Actor::Kind::kModular;
        ModularPolicy& policy = ckpt.actor.modular;
        policy.partition = built.second;
        policy.layout = layout;
        policy.signal_dim = ckpt.policy_config.signal_dim;
        policy.boss = read_param_store(arrays, "boss");
        for (const auto& [type_id, arity] : policy.partition.type_arity) {
            const auto stored = type_arity.find(type_id);
            if (stored == type_arity.end() || stored->second != arity) {
                throw CorruptFile("checkpoint module types do not match its morphology");
            }
            std::vector<ParamStore> roles;
            for (int rr = 0; rr < arity; ++rr) {
                roles.push_back(read_param_store(
                    arrays, "t" + std::to_string(type_id) + "/r" + std::to_string(rr)));
            }
            policy.modules.emplace(type_id, std::move(roles));
        }
        policy.logstd = Vector(arrays.at("logstd").col(0));
    } else {
        ckpt.actor.kind = Actor::Kind::kMonolithic;
        ckpt.actor.mono.net = read_param_store(arrays, "mono");
        ckpt.actor.mono.logstd = Vector(arrays.at("logstd").col(0));
    }
    if (ckpt.actor.logstd().size() != static_cast<Eigen::Index>(num_joints)) {
        throw CorruptFile("logstd length does not match the joint count");
    }
    if (has_critic) {
        Critic critic;
        critic.net = read_param_store(arrays, "critic");
        ckpt.critic = std::move(critic);
    }
    ckpt.normalizer = RunningNormalizer(static_cast<int>(arrays.at("norm/mean").rows()));
    ckpt.normalizer.restore(arrays.at("norm/count")(0, 0), Vector(arrays.at("norm/mean").col(0)),
                            Vector(arrays.at("norm/m2").col(0)));
    return ckpt;
}

namespace {

// Structure transfer changes the observation dimensionality, but the layout
// is structured: the global block is kind-invariant and per-joint blocks are
// kind-aligned. Seed the target normalizer by mapping each target joint's
// statistics from a source joint of the same kind; frozen modules then see
// local features scaled the way they were trained.
RunningNormalizer map_normalizer_by_kind(const RunningNormalizer& src,
                                         const MorphologyGraph& src_graph,
                                         const ObsLayout& src_layout,
                                         const MorphologyGraph& target_graph,
                                         const ObsLayout& target_layout) {
    Vector mean = Vector::Zero(target_layout.total_dim());
    Vector m2 = Vector::Zero(target_layout.total_dim());
    mean.head(target_layout.global_dim) = src.mean().head(src_layout.global_dim);
    m2.head(target_layout.global_dim) = src.m2().head(src_layout.global_dim);
    for (const Joint& joint : target_graph.joints) {
        int match = -1;
        for (const Joint& candidate : src_graph.joints) {
            if (candidate.kind == joint.kind) {
                match = candidate.id;
                break;
            }
        }
        if (match < 0) throw TypeMismatch("no source joint of the required kind");
        const auto [tlo, thi] = target_layout.joint_slices[joint.id];
        const auto [slo, shi] = src_layout.joint_slices[match];
        mean.segment(tlo, thi - tlo) = src.mean().segment(slo, shi - slo);
        m2.segment(tlo, thi - tlo) = src.m2().segment(slo, shi - slo);
    }
    RunningNormalizer out(target_layout.total_dim());
    out.restore(src.count(), std::move(mean), std::move(m2));
    return out;
}

}  // namespace

AssembledPolicy assemble_transfer_policy(const Checkpoint& source, const TransferPlan& plan,
                                         Rng& rng) {
    if (source.actor.kind != Actor::Kind::kModular) {
        throw TypeMismatch("transfer source must hold a modular policy");
    }
    const ModularPolicy& src = source.actor.modular;

    auto built = plan.target_env.kind == EnvKind::kCrawler
                     ? build_crawler(plan.target_env.count_a, plan.target_env.count_b)
                     : build_lifter(plan.target_env.count_a, plan.target_env.count_b);
    const MorphologyGraph& graph = built.first;
    const ModulePartition& partition = built.second;
    const ObsLayout layout = observation_layout(graph, partition, plan.target_env.kind);

    for (const auto& [type_id, arity] : partition.type_arity) {
        const auto it = src.partition.type_arity.find(type_id);
        if (it == src.partition.type_arity.end() || src.modules.find(type_id) == src.modules.end()) {
            throw TypeMismatch("target module type " + std::to_string(type_id) +
                               " missing from the source checkpoint");
        }
        if (it->second != arity) {
            throw ArityMismatch("module type " + std::to_string(type_id) +
                                " has arity " + std::to_string(it->second) + " in the source but " +
                                std::to_string(arity) + " in the target");
        }
    }

    const bool same_morphology = source.env.kind == plan.target_env.kind &&
                                 source.env.count_a == plan.target_env.count_a &&
                                 source.env.count_b == plan.target_env.count_b;
    if (plan.mode == TransferMode::kFinetuneAll && !same_morphology) {
        throw TypeMismatch("finetune transfer requires the identical morphology");
    }

    AssembledPolicy out;
    out.freeze_modules = plan.mode == TransferMode::kFreezeModulesReinitBoss;
    out.actor.kind = Actor::Kind::kModular;
    ModularPolicy& policy = out.actor.modular;
    policy.partition = partition;
    policy.layout = layout;
    policy.signal_dim = src.signal_dim;
    for (const auto& [type_id, arity] : partition.type_arity) {
        policy.modules.emplace(type_id, src.modules.at(type_id));  // byte-exact copies
    }
    if (plan.mode == TransferMode::kFreezeModulesReinitBoss) {
        PolicyConfig cfg = source.policy_config;
        std::vector<int> dims{layout.total_dim()};
        for (int i = 0; i < cfg.boss_layers - 1; ++i) dims.push_back(cfg.signal_dim);
        dims.push_back(partition.num_instances() * cfg.signal_dim);
        std::vector<Activation> acts(dims.size() - 1, Activation::kTanh);
        std::vector<double> gains(dims.size() - 1, 1.0);
        policy.boss = make_mlp(dims, acts, gains, rng);
    } else {
        policy.boss = src.boss;
    }
    policy.logstd = Vector::Constant(graph.num_joints(), plan.logstd_init);

    if (same_morphology) {
        out.normalizer = source.normalizer;
    } else {
        auto src_built = source.env.kind == EnvKind::kCrawler
                             ? build_crawler(source.env.count_a, source.env.count_b)
                             : build_lifter(source.env.count_a, source.env.count_b);
        const ObsLayout src_layout =
            observation_layout(src_built.first, src_built.second, source.env.kind);
        out.normalizer = map_normalizer_by_kind(source.normalizer, src_built.first, src_layout,
                                                graph, layout);
    }
    return out;
}

TransferRunResult run_transfer(const Checkpoint& source, const TransferPlan& plan,
                               const PPOConfig& rl_config, std::uint64_t seed, MetricsSink* sink,
                               const std::string& run_id) {
    Rng master(seed);
    Rng assemble_rng = master.fork(41);
    AssembledPolicy assembled = assemble_transfer_policy(source, plan, assemble_rng);

    TransferRunResult result;
    result.actor = std::move(assembled.actor);
    result.normalizer = std::move(assembled.normalizer);
    result.froze_modules = assembled.freeze_modules;
    Rng critic_rng = master.fork(43);
    result.critic = Critic::create(result.actor.modular.layout.total_dim(),
                                   source.policy_config.signal_dim, critic_rng);
    result.rl = train_ppo(result.actor, result.critic, result.normalizer, plan.target_env,
                          rl_config, master.fork(47).seed(), assembled.freeze_modules, sink,
                          run_id, "transfer");
    return result;
}

}  // namespace memo
