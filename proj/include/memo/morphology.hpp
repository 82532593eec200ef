#pragma once

#include <map>
#include <utility>
#include <vector>

#include "memo/errors.hpp"

namespace memo {

enum class JointKind { kBody, kHip, kKnee, kArm, kFingerBase, kFingerTip };

enum class EnvKind { kCrawler, kLifter };

struct Joint {
    int id = 0;
    int parent_link = 0;
    int child_link = 0;
    JointKind kind = JointKind::kBody;
};

struct LinkInfo {
    int id = 0;
    double length = 0.0;
};

struct MorphologyGraph {
    std::vector<Joint> joints;
    std::vector<LinkInfo> links;
    int root_link = 0;

    int num_joints() const { return static_cast<int>(joints.size()); }
};

// Typed module instance: an ordered, role-aligned subset of joints.
struct ModuleInstance {
    int instance_id = 0;
    int type_id = 0;
    std::vector<int> joint_ids;
};

struct ModulePartition {
    std::vector<ModuleInstance> instances;
    std::map<int, int> type_arity;

    int num_instances() const { return static_cast<int>(instances.size()); }
};

// Index ranges into the flat observation vector: [global | per-joint blocks].
struct ObsLayout {
    int global_dim = 0;
    int per_joint_dim = 0;
    int num_joints = 0;
    std::vector<std::pair<int, int>> joint_slices;  // joint_id -> [lo, hi)
    std::vector<std::vector<std::pair<int, int>>> module_slices;  // instance -> ranges

    int total_dim() const { return global_dim + per_joint_dim * num_joints; }
};

// Planar crawler: a chain of body segments, one two-joint leg per segment.
// Body joints are arity-1 modules of type 0; legs are arity-2 (hip, knee)
// modules of type 1.
std::pair<MorphologyGraph, ModulePartition> build_crawler(int num_body_segments, int num_legs);

// Planar lifter: one arm module (type 0, arity = num_arm_joints) hanging from
// a fixed base, plus two-joint finger modules (type 1) mounted on the palm.
std::pair<MorphologyGraph, ModulePartition> build_lifter(int num_arm_joints, int num_fingers);

void validate_partition(const MorphologyGraph& graph, const ModulePartition& partition);

ObsLayout observation_layout(const MorphologyGraph& graph, EnvKind env_kind);

// Same layout with per-instance module slices resolved against a partition.
ObsLayout observation_layout(const MorphologyGraph& graph, const ModulePartition& partition,
                             EnvKind env_kind);

// Module type ids used by the builders.
inline constexpr int kCrawlerBodyType = 0;
inline constexpr int kCrawlerLegType = 1;
inline constexpr int kLifterArmType = 0;
inline constexpr int kLifterFingerType = 1;

}  // namespace memo
