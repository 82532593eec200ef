#include "memo/morphology.hpp"

#include <algorithm>
#include <string>

namespace memo {

namespace {
constexpr double kBodySegmentLength = 0.30;
constexpr double kLegUpperLength = 0.25;
constexpr double kLegLowerLength = 0.25;
constexpr double kArmTotalLength = 0.55;
constexpr double kFingerLinkLength = 0.18;
}  // namespace

std::pair<MorphologyGraph, ModulePartition> build_crawler(int num_body_segments, int num_legs) {
    if (num_body_segments < 2 || num_legs != num_body_segments) {
        throw MorphologyError("crawler needs num_legs == num_body_segments >= 2");
    }
    const int s = num_body_segments;
    MorphologyGraph graph;
    graph.root_link = 0;
    for (int k = 0; k < s; ++k) {
        graph.links.push_back(LinkInfo{k, kBodySegmentLength});
    }
    // Body joints 0..s-2 connect consecutive segments.
    for (int k = 0; k + 1 < s; ++k) {
        graph.joints.push_back(Joint{k, k, k + 1, JointKind::kBody});
    }
    // One leg per segment: hip then knee, joints appended after body joints.
    for (int k = 0; k < s; ++k) {
        const int upper = s + 2 * k;
        const int lower = s + 2 * k + 1;
        graph.links.push_back(LinkInfo{upper, kLegUpperLength});
        graph.links.push_back(LinkInfo{lower, kLegLowerLength});
        const int hip = (s - 1) + 2 * k;
        const int knee = hip + 1;
        graph.joints.push_back(Joint{hip, k, upper, JointKind::kHip});
        graph.joints.push_back(Joint{knee, upper, lower, JointKind::kKnee});
    }
    std::sort(graph.joints.begin(), graph.joints.end(),
              [](const Joint& a, const Joint& b) { return a.id < b.id; });

    ModulePartition partition;
    partition.type_arity[kCrawlerBodyType] = 1;
    partition.type_arity[kCrawlerLegType] = 2;
    int instance_id = 0;
    for (int k = 0; k + 1 < s; ++k) {
        partition.instances.push_back(ModuleInstance{instance_id++, kCrawlerBodyType, {k}});
    }
    for (int k = 0; k < s; ++k) {
        const int hip = (s - 1) + 2 * k;
        partition.instances.push_back(
            ModuleInstance{instance_id++, kCrawlerLegType, {hip, hip + 1}});
    }
    return {std::move(graph), std::move(partition)};
}

std::pair<MorphologyGraph, ModulePartition> build_lifter(int num_arm_joints, int num_fingers) {
    if (num_arm_joints < 1 || num_fingers < 2) {
        throw MorphologyError("lifter needs num_arm_joints >= 1 and num_fingers >= 2");
    }
    const int a = num_arm_joints;
    MorphologyGraph graph;
    graph.root_link = 0;
    graph.links.push_back(LinkInfo{0, 0.0});  // fixed base mount
    for (int k = 0; k < a; ++k) {
        graph.links.push_back(LinkInfo{1 + k, kArmTotalLength / a});
    }
    for (int k = 0; k < a; ++k) {
        graph.joints.push_back(Joint{k, k, k + 1, JointKind::kArm});
    }
    for (int f = 0; f < num_fingers; ++f) {
        const int upper = 1 + a + 2 * f;
        const int lower = upper + 1;
        graph.links.push_back(LinkInfo{upper, kFingerLinkLength});
        graph.links.push_back(LinkInfo{lower, kFingerLinkLength});
        const int base = a + 2 * f;
        const int tip = base + 1;
        graph.joints.push_back(Joint{base, a, upper, JointKind::kFingerBase});
        graph.joints.push_back(Joint{tip, upper, lower, JointKind::kFingerTip});
    }

    ModulePartition partition;
    partition.type_arity[kLifterArmType] = a;
    partition.type_arity[kLifterFingerType] = 2;
    std::vector<int> arm_joints(a);
    for (int k = 0; k < a; ++k) arm_joints[k] = k;
    partition.instances.push_back(ModuleInstance{0, kLifterArmType, std::move(arm_joints)});
    for (int f = 0; f < num_fingers; ++f) {
        const int base = a + 2 * f;
        partition.instances.push_back(
            ModuleInstance{1 + f, kLifterFingerType, {base, base + 1}});
    }
    return {std::move(graph), std::move(partition)};
}

void validate_partition(const MorphologyGraph& graph, const ModulePartition& partition) {
    const int n = graph.num_joints();
    std::vector<int> seen(n, 0);
    for (const ModuleInstance& inst : partition.instances) {
        auto arity_it = partition.type_arity.find(inst.type_id);
        if (arity_it == partition.type_arity.end() ||
            static_cast<int>(inst.joint_ids.size()) != arity_it->second) {
            throw ArityError("instance " + std::to_string(inst.instance_id) +
                             " size does not match its type arity");
        }
        for (int j : inst.joint_ids) {
            if (j < 0 || j >= n) {
                throw CoverageError("instance references unknown joint " + std::to_string(j));
            }
            if (seen[j]++) {
                throw OverlapError("joint " + std::to_string(j) +
                                   " assigned to multiple instances");
            }
        }
    }
    for (int j = 0; j < n; ++j) {
        if (!seen[j]) {
            throw CoverageError("joint " + std::to_string(j) + " not covered by any instance");
        }
    }
}

ObsLayout observation_layout(const MorphologyGraph& graph, EnvKind env_kind) {
    bool has_leg = false, has_finger = false;
    for (const Joint& j : graph.joints) {
        if (j.kind == JointKind::kHip || j.kind == JointKind::kKnee ||
            j.kind == JointKind::kBody) {
            has_leg = true;
        }
        if (j.kind == JointKind::kArm || j.kind == JointKind::kFingerBase ||
            j.kind == JointKind::kFingerTip) {
            has_finger = true;
        }
    }
    ObsLayout layout;
    switch (env_kind) {
        case EnvKind::kCrawler:
            if (has_finger) throw MorphologyError("crawler layout on a grasping morphology");
            layout.global_dim = 5;
            break;
        case EnvKind::kLifter:
            if (has_leg) throw MorphologyError("lifter layout on a locomotion morphology");
            layout.global_dim = 3;
            break;
        default:
            throw MorphologyError("unknown env kind");
    }
    layout.per_joint_dim = 4;
    layout.num_joints = graph.num_joints();
    layout.joint_slices.resize(layout.num_joints);
    for (int j = 0; j < layout.num_joints; ++j) {
        const int lo = layout.global_dim + layout.per_joint_dim * j;
        layout.joint_slices[j] = {lo, lo + layout.per_joint_dim};
    }
    return layout;
}

ObsLayout observation_layout(const MorphologyGraph& graph, const ModulePartition& partition,
                             EnvKind env_kind) {
    ObsLayout layout = observation_layout(graph, env_kind);
    layout.module_slices.resize(partition.instances.size());
    for (const ModuleInstance& inst : partition.instances) {
        for (int j : inst.joint_ids) {
            if (j < 0 || j >= layout.num_joints) {
                throw MorphologyError("partition references joint outside the graph");
            }
            layout.module_slices[inst.instance_id].push_back(layout.joint_slices[j]);
        }
    }
    return layout;
}

}  // namespace memo
