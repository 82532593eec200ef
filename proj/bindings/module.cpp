#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "memo/analysis.hpp"
#include "memo/checkpoint.hpp"
#include "memo/config.hpp"
#include "memo/il.hpp"
#include "memo/rl.hpp"
#include "memo/runner.hpp"

namespace py = pybind11;
using namespace memo;

namespace {

EnvKind parse_kind(const std::string& kind) {
    if (kind == "crawler") return EnvKind::kCrawler;
    if (kind == "lifter") return EnvKind::kLifter;
    throw ConfigError("unknown env kind '" + kind + "'");
}

EnvConfig make_env_config(const std::string& kind, int count_a, int count_b,
                          const std::string& terrain, const std::string& object,
                          double action_scale, int episode_len, std::vector<int> broken_joints,
                          double broken_noise_scale, std::uint64_t seed) {
    EnvConfig cfg;
    cfg.kind = parse_kind(kind);
    cfg.count_a = count_a;
    cfg.count_b = count_b;
    if (terrain == "flat") {
        cfg.terrain = Terrain::kFlat;
    } else if (terrain == "ridged") {
        cfg.terrain = Terrain::kRidged;
    } else {
        throw ConfigError("unknown terrain '" + terrain + "'");
    }
    if (object == "disk") {
        cfg.object = GraspObject::kDisk;
    } else if (object == "wide_disk") {
        cfg.object = GraspObject::kWideDisk;
    } else {
        throw ConfigError("unknown object '" + object + "'");
    }
    cfg.action_scale = action_scale;
    cfg.episode_len = episode_len;
    cfg.broken_joints = std::move(broken_joints);
    cfg.broken_noise_scale = broken_noise_scale;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_memo, m) {
    m.doc() = "Planar modular-controller training toolkit (C++ core)";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigurationError", PyExc_ValueError);
    py::register_exception<MissingPrerequisite>(m, "MissingPrerequisiteError",
                                                PyExc_FileNotFoundError);

    py::class_<Joint>(m, "Joint")
        .def_readonly("id", &Joint::id)
        .def_readonly("parent_link", &Joint::parent_link)
        .def_readonly("child_link", &Joint::child_link)
        .def("__repr__", [](const Joint& j) {
            return "Joint(id=" + std::to_string(j.id) + ")";
        });

    py::class_<MorphologyGraph>(m, "MorphologyGraph")
        .def_property_readonly("num_joints", &MorphologyGraph::num_joints)
        .def_readonly("joints", &MorphologyGraph::joints)
        .def_readonly("root_link", &MorphologyGraph::root_link);

    py::class_<ModuleInstance>(m, "ModuleInstance")
        .def_readonly("instance_id", &ModuleInstance::instance_id)
        .def_readonly("type_id", &ModuleInstance::type_id)
        .def_readonly("joint_ids", &ModuleInstance::joint_ids);

    py::class_<ModulePartition>(m, "ModulePartition")
        .def_property_readonly("num_instances", &ModulePartition::num_instances)
        .def_readonly("instances", &ModulePartition::instances)
        .def_readonly("type_arity", &ModulePartition::type_arity);

    py::class_<ObsLayout>(m, "ObsLayout")
        .def_readonly("global_dim", &ObsLayout::global_dim)
        .def_readonly("per_joint_dim", &ObsLayout::per_joint_dim)
        .def_readonly("num_joints", &ObsLayout::num_joints)
        .def_readonly("joint_slices", &ObsLayout::joint_slices)
        .def_property_readonly("total_dim", &ObsLayout::total_dim);

    m.def("build_crawler", &build_crawler, py::arg("num_body_segments"), py::arg("num_legs"));
    m.def("build_lifter", &build_lifter, py::arg("num_arm_joints"), py::arg("num_fingers"));
    m.def("validate_partition", &validate_partition, py::arg("graph"), py::arg("partition"));
    m.def(
        "observation_layout",
        [](const MorphologyGraph& graph, const ModulePartition& partition,
           const std::string& kind) {
            return observation_layout(graph, partition, parse_kind(kind));
        },
        py::arg("graph"), py::arg("partition"), py::arg("kind"));

    py::class_<EnvConfig>(m, "EnvConfig")
        .def(py::init(&make_env_config), py::arg("kind") = "crawler", py::arg("count_a") = 3,
             py::arg("count_b") = 3, py::arg("terrain") = "flat", py::arg("object") = "disk",
             py::arg("action_scale") = 0.1, py::arg("episode_len") = 0,
             py::arg("broken_joints") = std::vector<int>{},
             py::arg("broken_noise_scale") = 0.1, py::arg("seed") = 0)
        .def_readonly("count_a", &EnvConfig::count_a)
        .def_readonly("count_b", &EnvConfig::count_b)
        .def_property_readonly("episode_len", &EnvConfig::resolved_episode_len);

    py::class_<Env>(m, "Env")
        .def(py::init<EnvConfig>(), py::arg("config"))
        .def("reset", &Env::reset)
        .def(
            "step",
            [](Env& env, const Vector& action) {
                auto r = env.step(action);
                return py::make_tuple(r.obs, r.reward, r.reported_reward, r.done);
            },
            py::arg("action"), "Returns (obs, reward, reported_reward, done).")
        .def_property_readonly("obs_dim", &Env::obs_dim)
        .def_property_readonly("num_joints", &Env::num_joints)
        .def_property_readonly("joint_angles",
                               [](const Env& env) { return env.state().joint_angles; })
        .def_property_readonly("root_x", [](const Env& env) { return env.state().root_x; })
        .def_property_readonly("attached", [](const Env& env) { return env.state().attached; })
        .def_property_readonly("disk_center", [](const Env& env) {
            return py::make_tuple(env.state().disk_center.x(), env.state().disk_center.y());
        });

    m.def("reward_locomotion", &reward_locomotion, py::arg("vx"), py::arg("orientation_term"),
          py::arg("action"));
    m.def("reward_grasp", &reward_grasp, py::arg("disk_z"), py::arg("avg_fingertip_dist"),
          py::arg("all_contact"));

    py::class_<RunningNormalizer>(m, "RunningNormalizer")
        .def(py::init<int>(), py::arg("dim"))
        .def("update", &RunningNormalizer::update)
        .def("normalize", &RunningNormalizer::normalize)
        .def_property_readonly("count", &RunningNormalizer::count)
        .def_property_readonly("mean", &RunningNormalizer::mean)
        .def_property_readonly("variance", &RunningNormalizer::variance);

    m.def(
        "orthogonal_init",
        [](int rows, int cols, double gain, std::uint64_t seed) {
            Rng rng(seed);
            return orthogonal_init(rows, cols, gain, rng);
        },
        py::arg("rows"), py::arg("cols"), py::arg("gain") = 1.0, py::arg("seed") = 0);

    m.def("log_prob", &log_prob, py::arg("means"), py::arg("logstd"), py::arg("action"));

    m.def(
        "gae",
        [](const Vector& rewards, const Vector& values, const Vector& dones, double bootstrap,
           double gamma, double lam) {
            RolloutBuffer buffer;
            buffer.steps = static_cast<int>(rewards.size());
            buffer.num_envs = 1;
            buffer.rewards = rewards;
            buffer.values = values;
            buffer.dones = dones;
            buffer.bootstrap_values = Vector::Constant(1, bootstrap);
            compute_gae(buffer, gamma, lam, false);
            return py::make_tuple(buffer.raw_advantages, buffer.returns);
        },
        py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("bootstrap"),
        py::arg("gamma") = 0.995, py::arg("lam") = 0.95,
        "Single-environment GAE; returns (advantages, returns).");

    m.def(
        "jacobi_svd",
        [](const Matrix& input) {
            const SvdResult r = jacobi_svd(input);
            return py::make_tuple(r.singular_values, r.u, r.v);
        },
        py::arg("matrix"), "Returns (singular_values, U, V) with input = U @ diag(s) @ V.T.");

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_property_readonly("is_modular",
                               [](const Checkpoint& c) {
                                   return c.actor.kind == Actor::Kind::kModular;
                               })
        .def_property_readonly("env_kind",
                               [](const Checkpoint& c) {
                                   return c.env.kind == EnvKind::kCrawler
                                              ? std::string("crawler")
                                              : std::string("lifter");
                               })
        .def_property_readonly("count_a", [](const Checkpoint& c) { return c.env.count_a; })
        .def_property_readonly("count_b", [](const Checkpoint& c) { return c.env.count_b; })
        .def_property_readonly("signal_dim",
                               [](const Checkpoint& c) { return c.policy_config.signal_dim; })
        .def("mean_action",
             [](const Checkpoint& c, const Vector& raw_obs) {
                 return c.actor.mean_action(c.normalizer.normalize(raw_obs));
             },
             py::arg("raw_obs"),
             "Deterministic action means for a raw observation (normalization included).")
        .def("evaluate",
             [](const Checkpoint& c, int episodes, std::uint64_t seed) {
                 return evaluate_policy(c.actor, c.normalizer, c.env, episodes, seed);
             },
             py::arg("episodes") = 3, py::arg("seed") = 0,
             "Mean reported episode reward on the checkpoint's own environment.");

    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    m.def(
        "spectrum_summary",
        [](const Checkpoint& ckpt, int num_trajectories, std::uint64_t seed) {
            if (ckpt.actor.kind != Actor::Kind::kModular) {
                throw ConfigError("spectrum analysis needs a modular checkpoint");
            }
            const SpectrumReport r = spectra_over_trajectories(
                ckpt.actor.modular, ckpt.normalizer, ckpt.env, num_trajectories, seed);
            py::dict out;
            out["pooled_median"] = r.pooled_median;
            out["fraction_below_tenth"] = r.fraction_below_tenth;
            out["states_visited"] = r.states_visited;
            out["skipped_zero_jacobians"] = r.skipped_zero_jacobians;
            out["histogram"] = r.histogram;
            return out;
        },
        py::arg("checkpoint"), py::arg("num_trajectories") = 20, py::arg("seed") = 0);

    m.def(
        "run_experiment",
        [](const std::string& config_path, py::object seed, py::object out_dir) {
            ExperimentConfig config = parse_config(config_path);
            if (!seed.is_none()) config.seeds = {seed.cast<std::uint64_t>()};
            if (!out_dir.is_none()) config.output_dir = out_dir.cast<std::string>();
            const RunOutcome outcome = run_experiment(config);
            return outcome.run_dirs;
        },
        py::arg("config_path"), py::arg("seed") = py::none(), py::arg("out_dir") = py::none(),
        "Run one experiment phase per seed; returns the run directories.");

    m.def("config_hash_of", [](const std::string& config_path) {
        return config_hash(parse_config(config_path));
    });

    m.def("emit_curve_data", &emit_curve_data, py::arg("metrics_csv_paths"),
          py::arg("output_path"));
}
