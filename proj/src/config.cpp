#include "memo/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "memo/metrics.hpp"

namespace memo {

namespace {

struct RawEntry {
    std::string section;  // "" for top level
    std::string key;
    std::string value;
    int line = 0;
};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

// schema: section -> keys
const std::map<std::string, std::set<std::string>> kSchema = {
    {"", {"phase", "seeds", "output_dir"}},
    {"env",
     {"kind", "segments", "legs", "arm_joints", "fingers", "terrain", "object", "action_scale",
      "episode_len", "broken_joints", "broken_count", "broken_noise_scale"}},
    {"policy",
     {"architecture", "signal_dim", "module_hidden", "boss_layers", "module_hidden_layers"}},
    {"rl",
     {"total_timesteps", "batch_size", "num_envs", "epochs", "minibatch_count", "lr_start",
      "gamma", "lam", "clip_eps", "value_coef", "entropy_coef", "grad_clip", "naive_noise_sigma",
      "adam_eps"}},
    {"il",
     {"mode", "sigma", "reg_weight", "dagger_iterations", "epochs_per_iteration", "batch_size",
      "lr", "validation_trajectories", "expert_checkpoint", "adam_eps"}},
    {"transfer", {"source_checkpoint", "mode"}},
    {"analysis", {"checkpoint", "num_trajectories"}},
};

const std::map<Phase, std::set<std::string>> kPhaseSections = {
    {Phase::kTrainExpert, {"", "env", "policy", "rl"}},
    {Phase::kPretrainModules, {"", "env", "policy", "il"}},
    {Phase::kTransfer, {"", "env", "rl", "transfer"}},
    {Phase::kAnalyze, {"", "analysis"}},
};

long parse_long(const RawEntry& e) {
    char* end = nullptr;
    const long v = std::strtol(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0') {
        throw ParseError("line " + std::to_string(e.line) + ": expected integer for " + e.key);
    }
    return v;
}

int parse_int(const RawEntry& e) { return static_cast<int>(parse_long(e)); }

double parse_double(const RawEntry& e) {
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0') {
        throw ParseError("line " + std::to_string(e.line) + ": expected number for " + e.key);
    }
    return v;
}

std::vector<std::uint64_t> parse_u64_list(const RawEntry& e) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        char* end = nullptr;
        out.push_back(std::strtoull(item.c_str(), &end, 10));
        if (end == item.c_str() || *end != '\0') {
            throw ParseError("line " + std::to_string(e.line) + ": bad list entry '" + item +
                             "'");
        }
    }
    return out;
}

Phase parse_phase(const RawEntry& e) {
    if (e.value == "train_expert") return Phase::kTrainExpert;
    if (e.value == "pretrain") return Phase::kPretrainModules;
    if (e.value == "transfer") return Phase::kTransfer;
    if (e.value == "analyze") return Phase::kAnalyze;
    throw ParseError("line " + std::to_string(e.line) + ": unknown phase '" + e.value + "'");
}

IlLossMode parse_il_mode(const RawEntry& e) {
    if (e.value == "noise_injection") return IlLossMode::kNoiseInjection;
    if (e.value == "bc_only") return IlLossMode::kBcOnly;
    if (e.value == "dual_loss") return IlLossMode::kDualLoss;
    if (e.value == "l1_reg") return IlLossMode::kL1Reg;
    if (e.value == "l2_reg") return IlLossMode::kL2Reg;
    throw ParseError("line " + std::to_string(e.line) + ": unknown il mode '" + e.value + "'");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    std::vector<RawEntry> entries;
    {
        std::stringstream ss(text);
        std::string raw_line;
        std::string section;
        int line_no = 0;
        while (std::getline(ss, raw_line)) {
            ++line_no;
            const std::string line = trim(raw_line);
            if (line.empty() || line[0] == '#') continue;
            if (line.front() == '[') {
                if (line.back() != ']') {
                    throw ParseError("line " + std::to_string(line_no) + ": malformed section");
                }
                section = trim(line.substr(1, line.size() - 2));
                if (kSchema.find(section) == kSchema.end() || section.empty()) {
                    throw UnknownKeyError("line " + std::to_string(line_no) +
                                          ": unknown section [" + section + "]");
                }
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
            }
            RawEntry e;
            e.section = section;
            e.key = trim(line.substr(0, eq));
            e.value = trim(line.substr(eq + 1));
            e.line = line_no;
            if (e.key.empty()) {
                throw ParseError("line " + std::to_string(line_no) + ": empty key");
            }
            const auto schema_it = kSchema.find(e.section);
            if (schema_it->second.find(e.key) == schema_it->second.end()) {
                throw UnknownKeyError("line " + std::to_string(line_no) + ": unknown key '" +
                                      e.key + "' in section [" + e.section + "]");
            }
            entries.push_back(std::move(e));
        }
    }

    // phase first: it decides which sections are legal
    ExperimentConfig config;
    bool phase_set = false;
    for (const RawEntry& e : entries) {
        if (e.section.empty() && e.key == "phase") {
            config.phase = parse_phase(e);
            phase_set = true;
        }
    }
    if (!phase_set) throw MissingKeyError("missing required key 'phase'");
    const auto& allowed = kPhaseSections.at(config.phase);

    bool env_kind_set = false;
    bool count_a_set = false, count_b_set = false;
    bool batch_set = false, timesteps_set = false, num_envs_set = false;
    std::set<std::string> seen;
    for (const RawEntry& e : entries) {
        if (allowed.find(e.section) == allowed.end()) {
            throw UnknownKeyError("line " + std::to_string(e.line) + ": section [" + e.section +
                                  "] is not used by this phase");
        }
        if (!seen.insert(e.section + "/" + e.key).second) {
            throw ParseError("line " + std::to_string(e.line) + ": duplicate key '" + e.key +
                             "'");
        }
        if (e.section.empty()) {
            if (e.key == "seeds") {
                config.seeds = parse_u64_list(e);
                if (config.seeds.empty()) {
                    throw ParseError("line " + std::to_string(e.line) + ": empty seed list");
                }
            } else if (e.key == "output_dir") {
                config.output_dir = e.value;
            }
        } else if (e.section == "env") {
            if (e.key == "kind") {
                if (e.value == "crawler") {
                    config.env.kind = EnvKind::kCrawler;
                } else if (e.value == "lifter") {
                    config.env.kind = EnvKind::kLifter;
                } else {
                    throw ParseError("line " + std::to_string(e.line) + ": unknown kind '" +
                                     e.value + "'");
                }
                env_kind_set = true;
            } else if (e.key == "segments" || e.key == "arm_joints") {
                config.env.count_a = parse_int(e);
                count_a_set = true;
            } else if (e.key == "legs" || e.key == "fingers") {
                config.env.count_b = parse_int(e);
                count_b_set = true;
            } else if (e.key == "terrain") {
                if (e.value == "flat") {
                    config.env.terrain = Terrain::kFlat;
                } else if (e.value == "ridged") {
                    config.env.terrain = Terrain::kRidged;
                } else {
                    throw ParseError("line " + std::to_string(e.line) + ": unknown terrain");
                }
            } else if (e.key == "object") {
                if (e.value == "disk") {
                    config.env.object = GraspObject::kDisk;
                } else if (e.value == "wide_disk") {
                    config.env.object = GraspObject::kWideDisk;
                } else {
                    throw ParseError("line " + std::to_string(e.line) + ": unknown object");
                }
            } else if (e.key == "action_scale") {
                config.env.action_scale = parse_double(e);
            } else if (e.key == "episode_len") {
                config.env.episode_len = parse_int(e);
            } else if (e.key == "broken_joints") {
                config.env.broken_joints.clear();
                for (std::uint64_t v : parse_u64_list(e)) {
                    config.env.broken_joints.push_back(static_cast<int>(v));
                }
            } else if (e.key == "broken_count") {
                config.broken_count = parse_int(e);
            } else if (e.key == "broken_noise_scale") {
                config.env.broken_noise_scale = parse_double(e);
            }
        } else if (e.section == "policy") {
            if (e.key == "architecture") {
                if (e.value == "mlp") {
                    config.architecture = ActorArchitecture::kMlp;
                } else if (e.value == "modular") {
                    config.architecture = ActorArchitecture::kModular;
                } else {
                    throw ParseError("line " + std::to_string(e.line) + ": unknown architecture");
                }
            } else if (e.key == "signal_dim") {
                config.policy.signal_dim = parse_int(e);
            } else if (e.key == "module_hidden") {
                config.policy.module_hidden = parse_int(e);
            } else if (e.key == "boss_layers") {
                config.policy.boss_layers = parse_int(e);
            } else if (e.key == "module_hidden_layers") {
                config.policy.module_hidden_layers = parse_int(e);
            }
        } else if (e.section == "rl") {
            if (e.key == "total_timesteps") {
                config.rl.total_timesteps = parse_long(e);
                timesteps_set = true;
            } else if (e.key == "batch_size") {
                config.rl.batch_size = parse_int(e);
                batch_set = true;
            } else if (e.key == "num_envs") {
                config.rl.num_envs = parse_int(e);
                num_envs_set = true;
            } else if (e.key == "epochs") {
                config.rl.epochs = parse_int(e);
            } else if (e.key == "minibatch_count") {
                config.rl.minibatch_count = parse_int(e);
            } else if (e.key == "lr_start") {
                config.rl.lr_start = parse_double(e);
            } else if (e.key == "gamma") {
                config.rl.gamma = parse_double(e);
            } else if (e.key == "lam") {
                config.rl.lam = parse_double(e);
            } else if (e.key == "clip_eps") {
                config.rl.clip_eps = parse_double(e);
            } else if (e.key == "value_coef") {
                config.rl.value_coef = parse_double(e);
            } else if (e.key == "entropy_coef") {
                config.rl.entropy_coef = parse_double(e);
            } else if (e.key == "grad_clip") {
                config.rl.grad_clip = parse_double(e);
            } else if (e.key == "naive_noise_sigma") {
                config.naive_noise_sigma = parse_double(e);
            } else if (e.key == "adam_eps") {
                config.rl.adam_eps = parse_double(e);
            }
        } else if (e.section == "il") {
            if (e.key == "mode") {
                config.il.mode = parse_il_mode(e);
            } else if (e.key == "sigma") {
                config.il.sigma = parse_double(e);
            } else if (e.key == "reg_weight") {
                config.il.reg_weight = parse_double(e);
            } else if (e.key == "dagger_iterations") {
                config.il.dagger_iterations = parse_int(e);
            } else if (e.key == "epochs_per_iteration") {
                config.il.epochs_per_iteration = parse_int(e);
            } else if (e.key == "batch_size") {
                config.il.batch_size = parse_int(e);
            } else if (e.key == "lr") {
                config.il.lr = parse_double(e);
            } else if (e.key == "validation_trajectories") {
                config.il.validation_trajectories = parse_int(e);
            } else if (e.key == "expert_checkpoint") {
                config.expert_checkpoint = e.value;
            } else if (e.key == "adam_eps") {
                config.il.adam_eps = parse_double(e);
            }
        } else if (e.section == "transfer") {
            if (e.key == "source_checkpoint") {
                config.transfer_source = e.value;
            } else if (e.key == "mode") {
                if (e.value == "freeze_modules_reinit_boss") {
                    config.transfer_mode = TransferMode::kFreezeModulesReinitBoss;
                } else if (e.value == "finetune_all") {
                    config.transfer_mode = TransferMode::kFinetuneAll;
                } else {
                    throw ParseError("line " + std::to_string(e.line) + ": unknown transfer mode");
                }
            }
        } else if (e.section == "analysis") {
            if (e.key == "checkpoint") {
                config.analysis_checkpoint = e.value;
            } else if (e.key == "num_trajectories") {
                config.analysis_trajectories = parse_int(e);
            }
        }
    }

    const bool needs_env = allowed.find("env") != allowed.end();
    if (needs_env && !env_kind_set) throw MissingKeyError("missing required key 'kind' in [env]");
    if (needs_env) {
        // kind-dependent defaults
        if (config.env.kind == EnvKind::kLifter) {
            if (!count_a_set) config.env.count_a = 2;
            if (!count_b_set) config.env.count_b = 3;
            if (!batch_set) config.rl.batch_size = 100;
            if (!timesteps_set) config.rl.total_timesteps = 100000;
            if (!num_envs_set) config.rl.num_envs = 10;
        } else {
            if (!count_a_set) config.env.count_a = 3;
            if (!count_b_set) config.env.count_b = 3;
        }
    }
    if (config.phase == Phase::kPretrainModules && config.expert_checkpoint.empty()) {
        throw MissingKeyError("missing required key 'expert_checkpoint' in [il]");
    }
    if (config.phase == Phase::kTransfer && config.transfer_source.empty()) {
        throw MissingKeyError("missing required key 'source_checkpoint' in [transfer]");
    }
    if (config.phase == Phase::kAnalyze && config.analysis_checkpoint.empty()) {
        throw MissingKeyError("missing required key 'checkpoint' in [analysis]");
    }
    if (config.broken_count < 0) throw ConfigError("broken_count must be non-negative");
    if (config.naive_noise_sigma < 0.0) throw ConfigError("naive_noise_sigma must be >= 0");
    if (config.naive_noise_sigma > 0.0 && config.architecture == ActorArchitecture::kMlp &&
        config.phase == Phase::kTrainExpert) {
        throw ConfigError("naive noise injection needs the modular architecture");
    }
    return config;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::kTrainExpert: return "train_expert";
        case Phase::kPretrainModules: return "pretrain";
        case Phase::kTransfer: return "transfer";
        case Phase::kAnalyze: return "analyze";
    }
    return "?";
}

std::string join_u64(const std::vector<std::uint64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join_int(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
    std::string s;
    s += "phase = ";
    s += phase_name(c.phase);
    s += "\nseeds = " + join_u64(c.seeds);
    s += "\noutput_dir = " + c.output_dir + "\n";
    const auto& allowed = kPhaseSections.at(c.phase);
    if (allowed.count("env")) {
        s += "\n[env]\n";
        s += std::string("kind = ") + (c.env.kind == EnvKind::kCrawler ? "crawler" : "lifter") +
             "\n";
        if (c.env.kind == EnvKind::kCrawler) {
            s += "segments = " + std::to_string(c.env.count_a) + "\n";
            s += "legs = " + std::to_string(c.env.count_b) + "\n";
        } else {
            s += "arm_joints = " + std::to_string(c.env.count_a) + "\n";
            s += "fingers = " + std::to_string(c.env.count_b) + "\n";
        }
        s += std::string("terrain = ") + (c.env.terrain == Terrain::kFlat ? "flat" : "ridged") +
             "\n";
        s += std::string("object = ") +
             (c.env.object == GraspObject::kDisk ? "disk" : "wide_disk") + "\n";
        s += "action_scale = " + format_double(c.env.action_scale) + "\n";
        s += "episode_len = " + std::to_string(c.env.resolved_episode_len()) + "\n";
        s += "broken_joints = " + join_int(c.env.broken_joints) + "\n";
        s += "broken_count = " + std::to_string(c.broken_count) + "\n";
        s += "broken_noise_scale = " + format_double(c.env.broken_noise_scale) + "\n";
    }
    if (allowed.count("policy")) {
        s += "\n[policy]\n";
        s += std::string("architecture = ") +
             (c.architecture == ActorArchitecture::kMlp ? "mlp" : "modular") + "\n";
        s += "signal_dim = " + std::to_string(c.policy.signal_dim) + "\n";
        s += "module_hidden = " + std::to_string(c.policy.module_hidden) + "\n";
        s += "boss_layers = " + std::to_string(c.policy.boss_layers) + "\n";
        s += "module_hidden_layers = " + std::to_string(c.policy.module_hidden_layers) + "\n";
    }
    if (allowed.count("rl")) {
        s += "\n[rl]\n";
        s += "total_timesteps = " + std::to_string(c.rl.total_timesteps) + "\n";
        s += "batch_size = " + std::to_string(c.rl.batch_size) + "\n";
        s += "num_envs = " + std::to_string(c.rl.num_envs) + "\n";
        s += "epochs = " + std::to_string(c.rl.epochs) + "\n";
        s += "minibatch_count = " + std::to_string(c.rl.minibatch_count) + "\n";
        s += "lr_start = " + format_double(c.rl.lr_start) + "\n";
        s += "gamma = " + format_double(c.rl.gamma) + "\n";
        s += "lam = " + format_double(c.rl.lam) + "\n";
        s += "clip_eps = " + format_double(c.rl.clip_eps) + "\n";
        s += "value_coef = " + format_double(c.rl.value_coef) + "\n";
        s += "entropy_coef = " + format_double(c.rl.entropy_coef) + "\n";
        s += "grad_clip = " + format_double(c.rl.grad_clip) + "\n";
        s += "naive_noise_sigma = " + format_double(c.naive_noise_sigma) + "\n";
        s += "adam_eps = " + format_double(c.rl.adam_eps) + "\n";
    }
    if (allowed.count("il")) {
        s += "\n[il]\n";
        const char* mode = "noise_injection";
        switch (c.il.mode) {
            case IlLossMode::kNoiseInjection: mode = "noise_injection"; break;
            case IlLossMode::kBcOnly: mode = "bc_only"; break;
            case IlLossMode::kDualLoss: mode = "dual_loss"; break;
            case IlLossMode::kL1Reg: mode = "l1_reg"; break;
            case IlLossMode::kL2Reg: mode = "l2_reg"; break;
        }
        s += std::string("mode = ") + mode + "\n";
        s += "sigma = " + format_double(c.il.sigma) + "\n";
        s += "reg_weight = " + format_double(c.il.reg_weight) + "\n";
        s += "dagger_iterations = " + std::to_string(c.il.dagger_iterations) + "\n";
        s += "epochs_per_iteration = " + std::to_string(c.il.epochs_per_iteration) + "\n";
        s += "batch_size = " + std::to_string(c.il.batch_size) + "\n";
        s += "lr = " + format_double(c.il.lr) + "\n";
        s += "validation_trajectories = " + std::to_string(c.il.validation_trajectories) + "\n";
        s += "expert_checkpoint = " + c.expert_checkpoint + "\n";
        s += "adam_eps = " + format_double(c.il.adam_eps) + "\n";
    }
    if (allowed.count("transfer")) {
        s += "\n[transfer]\n";
        s += "source_checkpoint = " + c.transfer_source + "\n";
        s += std::string("mode = ") + (c.transfer_mode == TransferMode::kFreezeModulesReinitBoss
                                           ? "freeze_modules_reinit_boss"
                                           : "finetune_all") +
             "\n";
    }
    if (allowed.count("analysis")) {
        s += "\n[analysis]\n";
        s += "checkpoint = " + c.analysis_checkpoint + "\n";
        s += "num_trajectories = " + std::to_string(c.analysis_trajectories) + "\n";
    }
    return s;
}

std::string config_hash(const ExperimentConfig& config) {
    // hash the experiment parameters, not where their artifacts land
    ExperimentConfig canonical = config;
    canonical.output_dir = "runs";
    const std::string text = serialize_config(canonical);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

struct CurveRow {
    long index = 0;
    long env_steps = 0;
    std::optional<double> mean_reward;
    std::optional<double> reported;
};

std::vector<CurveRow> read_metrics_curve(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file " + path);
    std::string line;
    if (!std::getline(in, line)) throw AggregationError("empty metrics file " + path);
    if (line != CsvMetricsWriter::header()) {
        throw AggregationError("unexpected metrics header in " + path);
    }
    std::vector<CurveRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        fields.resize(11);
        CurveRow row;
        row.index = std::strtol(fields[2].c_str(), nullptr, 10);
        row.env_steps = std::strtol(fields[3].c_str(), nullptr, 10);
        if (!fields[4].empty()) row.mean_reward = std::strtod(fields[4].c_str(), nullptr);
        if (!fields[5].empty()) row.reported = std::strtod(fields[5].c_str(), nullptr);
        rows.push_back(row);
    }
    return rows;
}

void append_stats(std::string& line, const std::vector<double>& values, bool complete) {
    if (!complete || values.empty()) {
        line += ",,";
        return;
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double std_dev = 0.0;
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - mean) * (v - mean);
        std_dev = std::sqrt(acc / (values.size() - 1));
    }
    line += ',' + format_double(mean) + ',' + format_double(std_dev);
}

}  // namespace

void emit_curve_data(const std::vector<std::string>& metrics_csv_paths,
                     const std::string& output_path) {
    if (metrics_csv_paths.empty()) throw AggregationError("no metrics files given");
    std::vector<std::vector<CurveRow>> runs;
    runs.reserve(metrics_csv_paths.size());
    for (const std::string& path : metrics_csv_paths) {
        runs.push_back(read_metrics_curve(path));
    }
    const std::size_t steps = runs[0].size();
    for (const auto& run : runs) {
        if (run.size() != steps) throw AggregationError("runs have different row counts");
        for (std::size_t i = 0; i < steps; ++i) {
            if (run[i].index != runs[0][i].index || run[i].env_steps != runs[0][i].env_steps) {
                throw AggregationError("runs have mismatched step grids");
            }
        }
    }

    std::ofstream out(output_path);
    if (!out) throw IoError("cannot open " + output_path);
    out << "index,env_steps,mean_reward_mean,mean_reward_std,reported_mean,reported_std\n";
    for (std::size_t i = 0; i < steps; ++i) {
        std::string line =
            std::to_string(runs[0][i].index) + ',' + std::to_string(runs[0][i].env_steps);
        std::vector<double> mean_vals, reported_vals;
        bool mean_complete = true, reported_complete = true;
        for (const auto& run : runs) {
            if (run[i].mean_reward) {
                mean_vals.push_back(*run[i].mean_reward);
            } else {
                mean_complete = false;
            }
            if (run[i].reported) {
                reported_vals.push_back(*run[i].reported);
            } else {
                reported_complete = false;
            }
        }
        append_stats(line, mean_vals, mean_complete);
        append_stats(line, reported_vals, reported_complete);
        out << line << '\n';
    }
}

}  // namespace memo
