#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "memo/errors.hpp"
#include "memo/morphology.hpp"
#include "memo/nn.hpp"
#include "memo/rng.hpp"

namespace memo {

enum class Terrain { kFlat, kRidged };
enum class GraspObject { kDisk, kWideDisk };

inline int default_episode_len(EnvKind kind) { return kind == EnvKind::kCrawler ? 128 : 50; }

struct EnvConfig {
    EnvKind kind = EnvKind::kCrawler;
    int count_a = 3;  // crawler: body segments; lifter: arm joints
    int count_b = 3;  // crawler: legs; lifter: fingers
    Terrain terrain = Terrain::kFlat;
    GraspObject object = GraspObject::kDisk;
    double action_scale = 0.1;  // max joint delta per step, radians
    int episode_len = 0;        // 0 -> kind default (128 crawler, 50 lifter)
    std::vector<int> broken_joints;
    double broken_noise_scale = 0.1;
    std::uint64_t seed = 0;

    int resolved_episode_len() const {
        return episode_len > 0 ? episode_len : default_episode_len(kind);
    }
};

struct EnvState {
    Vector joint_angles;
    Vector joint_velocities;
    double root_x = 0.0;
    int step_index = 0;
    // crawler extras
    std::vector<Eigen::Vector2d> prev_tips;
    double last_dx = 0.0;
    double prev_pitch = 0.0;
    double pitch_rate = 0.0;
    // lifter extras
    Eigen::Vector2d disk_center{0.0, 0.0};
    Eigen::Vector2d prev_palm{0.0, 0.0};
    bool attached = false;
};

// R = 10*V_x + 0.1*orientation - 0.7*||a||^2/N. The reported (logged) reward
// drops the action penalty.
double reward_locomotion(double vx, double orientation_term, const Vector& action);

double reward_grasp(double disk_z, double avg_fingertip_dist, bool all_contact);

// Welford running statistics; normalize clamps to [-10, 10].
class RunningNormalizer {
public:
    RunningNormalizer() = default;
    explicit RunningNormalizer(int dim);

    void update(const Vector& obs);
    void merge(const RunningNormalizer& other);
    Vector normalize(const Vector& obs) const;
    Matrix normalize_rows(const Matrix& obs) const;

    int dim() const { return static_cast<int>(mean_.size()); }
    double count() const { return count_; }
    const Vector& mean() const { return mean_; }
    const Vector& m2() const { return m2_; }
    Vector variance() const;

    void restore(double count, Vector mean, Vector m2);

private:
    double count_ = 0.0;
    Vector mean_;
    Vector m2_;
};

// Deterministic planar environment. Locomotion uses anchor-and-pull
// kinematics: feet grounded before and after a step anchor the body, and the
// body advances by the mean backward sweep of those feet.
class Env {
public:
    explicit Env(EnvConfig config);

    const EnvConfig& config() const { return config_; }
    const MorphologyGraph& graph() const { return graph_; }
    const ModulePartition& partition() const { return partition_; }
    const ObsLayout& layout() const { return layout_; }
    int num_joints() const { return graph_.num_joints(); }
    int obs_dim() const { return layout_.total_dim(); }

    Vector reset();

    struct StepResult {
        Vector obs;
        double reward = 0.0;
        double reported_reward = 0.0;
        bool done = false;
    };
    StepResult step(const Vector& action);

    const EnvState& state() const { return state_; }

    // geometry introspection (test and analysis hooks)
    std::vector<Eigen::Vector2d> foot_tips() const;
    Eigen::Vector2d palm_position() const;
    std::vector<Eigen::Vector2d> fingertip_positions() const;

    static constexpr double kBodyJointLimit = 0.6;
    static constexpr double kLimbJointLimit = 1.2;
    static constexpr double kRidgeClearance = 0.08;
    static constexpr double kRidgeSlowFactor = 0.25;
    static constexpr double kContactEps = 0.02;
    static constexpr double kDiskRadius = 0.10;
    static constexpr double kWideDiskRadius = 0.14;

    double disk_radius() const;

private:
    void build_crawler_obs(Vector& obs) const;
    void build_lifter_obs(Vector& obs) const;
    Vector observe() const;
    double joint_limit(int joint_id) const;

    EnvConfig config_;
    MorphologyGraph graph_;
    ModulePartition partition_;
    ObsLayout layout_;
    EnvState state_;
    Rng rng_;
};

}  // namespace memo
