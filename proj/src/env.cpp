#include "memo/env.hpp"

#include <algorithm>
#include <cmath>

namespace memo {

namespace {

constexpr double kSegmentLength = 0.30;
constexpr double kLegUpper = 0.25;
constexpr double kLegLower = 0.25;
constexpr double kRootHeight = kLegUpper + kLegLower - 0.05;

constexpr double kBaseHeight = 1.0;
constexpr double kArmTotal = 0.55;
constexpr double kFingerLink = 0.18;
constexpr double kPalmHalfWidth = 0.12;
constexpr double kFingerSplay = 0.5;

inline Eigen::Vector2d rotate(double angle, const Eigen::Vector2d& v) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

// Direction of a link whose rest pose points straight down, bent by `angle`.
inline Eigen::Vector2d down_dir(double angle) { return {std::sin(angle), -std::cos(angle)}; }

struct CrawlerFrame {
    std::vector<double> seg_angle;          // absolute segment orientation
    std::vector<Eigen::Vector2d> seg_start;  // chain junctions, body frame
    std::vector<Eigen::Vector2d> attach;     // leg attachment points
    std::vector<Eigen::Vector2d> knee;
    std::vector<Eigen::Vector2d> tip;
};

CrawlerFrame crawler_frame(int segments, const Vector& angles) {
    const int nb = segments - 1;
    CrawlerFrame f;
    f.seg_angle.resize(segments);
    f.seg_start.resize(segments + 1);
    f.attach.resize(segments);
    f.knee.resize(segments);
    f.tip.resize(segments);
    f.seg_angle[0] = 0.0;
    f.seg_start[0] = {0.0, kRootHeight};
    for (int k = 0; k < segments; ++k) {
        if (k > 0) f.seg_angle[k] = f.seg_angle[k - 1] + angles(k - 1);
        const Eigen::Vector2d dir{std::cos(f.seg_angle[k]), std::sin(f.seg_angle[k])};
        f.seg_start[k + 1] = f.seg_start[k] + kSegmentLength * dir;
        f.attach[k] = f.seg_start[k] + 0.5 * kSegmentLength * dir;
        const double hip = angles(nb + 2 * k);
        const double knee = angles(nb + 2 * k + 1);
        const double beta = f.seg_angle[k] + hip;
        f.knee[k] = f.attach[k] + kLegUpper * down_dir(beta);
        f.tip[k] = f.knee[k] + kLegLower * down_dir(beta + knee);
    }
    return f;
}

struct LifterFrame {
    std::vector<Eigen::Vector2d> arm_joint;  // positions of arm joints
    Eigen::Vector2d palm;
    double palm_angle = 0.0;
    std::vector<Eigen::Vector2d> mount;
    std::vector<Eigen::Vector2d> knuckle;
    std::vector<Eigen::Vector2d> tip;
};

LifterFrame lifter_frame(int arm_joints, int fingers, const Vector& angles) {
    LifterFrame f;
    const double link = kArmTotal / arm_joints;
    f.arm_joint.resize(arm_joints);
    Eigen::Vector2d p{0.0, kBaseHeight};
    double phi = 0.0;
    for (int j = 0; j < arm_joints; ++j) {
        f.arm_joint[j] = p;
        phi += angles(j);
        p += link * down_dir(phi);
    }
    f.palm = p;
    f.palm_angle = phi;
    const Eigen::Vector2d lateral{std::cos(phi), std::sin(phi)};
    f.mount.resize(fingers);
    f.knuckle.resize(fingers);
    f.tip.resize(fingers);
    for (int i = 0; i < fingers; ++i) {
        const double u = fingers > 1 ? 2.0 * i / (fingers - 1) - 1.0 : 0.0;
        f.mount[i] = f.palm + kPalmHalfWidth * u * lateral;
        const double base = angles(arm_joints + 2 * i);
        const double tip = angles(arm_joints + 2 * i + 1);
        const double delta = phi + base;
        f.knuckle[i] = f.mount[i] + kFingerLink * down_dir(delta);
        f.tip[i] = f.knuckle[i] + kFingerLink * down_dir(delta + tip);
    }
    return f;
}

}  // namespace

double reward_locomotion(double vx, double orientation_term, const Vector& action) {
    const int n = static_cast<int>(action.size());
    if (n < 1) throw DimensionError("reward_locomotion needs a nonempty action");
    return 10.0 * vx + 0.1 * orientation_term - 0.7 * action.squaredNorm() / n;
}

double reward_grasp(double disk_z, double avg_fingertip_dist, bool all_contact) {
    if (all_contact) return 10.0 * disk_z - 0.1 * avg_fingertip_dist;
    return -0.1 * avg_fingertip_dist;
}

RunningNormalizer::RunningNormalizer(int dim)
    : count_(0.0), mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)) {}

void RunningNormalizer::update(const Vector& obs) {
    if (obs.size() != mean_.size()) throw DimensionError("normalizer dim mismatch");
    count_ += 1.0;
    const Vector delta = obs - mean_;
    mean_ += delta / count_;
    m2_.array() += delta.array() * (obs - mean_).array();
}

void RunningNormalizer::merge(const RunningNormalizer& other) {
    if (other.dim() != dim()) throw DimensionError("normalizer dim mismatch");
    if (other.count_ == 0.0) return;
    if (count_ == 0.0) {
        *this = other;
        return;
    }
    const double total = count_ + other.count_;
    const Vector delta = other.mean_ - mean_;
    mean_ += delta * (other.count_ / total);
    m2_ += other.m2_ +
           delta.cwiseProduct(delta) * (count_ * other.count_ / total);
    count_ = total;
}

Vector RunningNormalizer::variance() const {
    return m2_ / std::max(count_, 1.0);
}

Vector RunningNormalizer::normalize(const Vector& obs) const {
    if (obs.size() != mean_.size()) throw DimensionError("normalizer dim mismatch");
    const Vector denom = (variance().array() + 1e-8).sqrt();
    return ((obs - mean_).array() / denom.array()).cwiseMin(10.0).cwiseMax(-10.0);
}

Matrix RunningNormalizer::normalize_rows(const Matrix& obs) const {
    if (obs.cols() != mean_.size()) throw DimensionError("normalizer dim mismatch");
    const Eigen::ArrayXd denom = (variance().array() + 1e-8).sqrt();
    Matrix out(obs.rows(), obs.cols());
    for (Eigen::Index r = 0; r < obs.rows(); ++r) {
        out.row(r) = ((obs.row(r).transpose() - mean_).array() / denom)
                         .cwiseMin(10.0)
                         .cwiseMax(-10.0);
    }
    return out;
}

void RunningNormalizer::restore(double count, Vector mean, Vector m2) {
    if (mean.size() != m2.size()) throw DimensionError("normalizer restore shape mismatch");
    count_ = count;
    mean_ = std::move(mean);
    m2_ = std::move(m2);
}

Env::Env(EnvConfig config) : config_(std::move(config)), rng_(config_.seed) {
    if (config_.action_scale <= 0.0) throw MorphologyError("action_scale must be positive");
    auto built = config_.kind == EnvKind::kCrawler
                     ? build_crawler(config_.count_a, config_.count_b)
                     : build_lifter(config_.count_a, config_.count_b);
    graph_ = std::move(built.first);
    partition_ = std::move(built.second);
    layout_ = observation_layout(graph_, partition_, config_.kind);
    for (int j : config_.broken_joints) {
        if (j < 0 || j >= graph_.num_joints()) {
            throw MorphologyError("broken joint id outside the morphology");
        }
    }
    reset();
}

double Env::joint_limit(int joint_id) const {
    return graph_.joints[joint_id].kind == JointKind::kBody ? kBodyJointLimit : kLimbJointLimit;
}

double Env::disk_radius() const {
    return config_.object == GraspObject::kDisk ? kDiskRadius : kWideDiskRadius;
}

Vector Env::reset() {
    const int n = graph_.num_joints();
    state_.joint_angles = Vector::Zero(n);
    state_.joint_velocities = Vector::Zero(n);
    state_.root_x = 0.0;
    state_.step_index = 0;
    state_.last_dx = 0.0;
    state_.prev_pitch = 0.0;
    state_.pitch_rate = 0.0;
    if (config_.kind == EnvKind::kCrawler) {
        state_.prev_tips = crawler_frame(config_.count_a, state_.joint_angles).tip;
    } else {
        const int a = config_.count_a;
        for (int f = 0; f < config_.count_b; ++f) {
            const double u = config_.count_b > 1 ? 2.0 * f / (config_.count_b - 1) - 1.0 : 0.0;
            state_.joint_angles(a + 2 * f) = kFingerSplay * u;
        }
        state_.disk_center = {0.0, disk_radius()};
        state_.prev_palm = lifter_frame(a, config_.count_b, state_.joint_angles).palm;
        state_.attached = false;
    }
    return observe();
}

Env::StepResult Env::step(const Vector& action) {
    const int n = graph_.num_joints();
    if (action.size() != n) throw DimensionError("action size does not match joint count");

    const Vector clipped = action.cwiseMin(1.0).cwiseMax(-1.0);
    Vector effective = clipped;
    for (int j : config_.broken_joints) {
        effective(j) = config_.broken_noise_scale * rng_.uniform(-1.0, 1.0);
    }

    Vector new_angles = state_.joint_angles + config_.action_scale * effective;
    for (int j = 0; j < n; ++j) {
        const double lim = joint_limit(j);
        new_angles(j) = std::clamp(new_angles(j), -lim, lim);
    }
    state_.joint_velocities = new_angles - state_.joint_angles;
    state_.joint_angles = std::move(new_angles);

    StepResult result;
    if (config_.kind == EnvKind::kCrawler) {
        const int nb = config_.count_a - 1;
        const CrawlerFrame frame = crawler_frame(config_.count_a, state_.joint_angles);
        double sweep = 0.0;
        int stance = 0;
        bool swing_clear = true;
        for (int k = 0; k < config_.count_a; ++k) {
            const bool grounded_before = state_.prev_tips[k].y() <= 0.0;
            const bool grounded_after = frame.tip[k].y() <= 0.0;
            if (grounded_before && grounded_after) {
                sweep += frame.tip[k].x() - state_.prev_tips[k].x();
                ++stance;
            } else if (frame.tip[k].y() <= kRidgeClearance) {
                swing_clear = false;
            }
        }
        double dx = stance > 0 ? -sweep / stance : 0.0;
        if (config_.terrain == Terrain::kRidged && dx > 0.0 && !swing_clear) {
            dx *= kRidgeSlowFactor;
        }
        state_.root_x += dx;
        state_.last_dx = dx;
        double orientation = 1.0;
        if (nb > 0) {
            orientation = state_.joint_angles.head(nb).array().cos().mean();
        }
        result.reward = reward_locomotion(dx, orientation, clipped);
        result.reported_reward = 10.0 * dx + 0.1 * orientation;
        state_.prev_tips = frame.tip;
        const double pitch = nb > 0 ? state_.joint_angles.head(nb).mean() : 0.0;
        state_.pitch_rate = pitch - state_.prev_pitch;
        state_.prev_pitch = pitch;
    } else {
        const LifterFrame frame = lifter_frame(config_.count_a, config_.count_b, state_.joint_angles);
        if (state_.attached) {
            state_.disk_center += frame.palm - state_.prev_palm;
        }
        state_.prev_palm = frame.palm;
        const double r = disk_radius();
        double dist_sum = 0.0;
        bool all_contact = true;
        for (const Eigen::Vector2d& tip : frame.tip) {
            const double d = std::abs((tip - state_.disk_center).norm() - r);
            dist_sum += d;
            if (d > kContactEps) all_contact = false;
        }
        const double avg_dist = dist_sum / config_.count_b;
        if (state_.attached && !all_contact) {
            state_.attached = false;
            state_.disk_center.y() = r;  // dropped
        } else if (!state_.attached && all_contact) {
            state_.attached = true;
        }
        result.reward = reward_grasp(state_.disk_center.y(), avg_dist, all_contact);
        result.reported_reward = result.reward;
    }

    ++state_.step_index;
    result.done = state_.step_index >= config_.resolved_episode_len();
    result.obs = observe();
    return result;
}

void Env::build_crawler_obs(Vector& obs) const {
    const int nb = config_.count_a - 1;
    const CrawlerFrame frame = crawler_frame(config_.count_a, state_.joint_angles);
    const double pitch = nb > 0 ? state_.joint_angles.head(nb).mean() : 0.0;
    obs(0) = kRootHeight;
    obs(1) = state_.last_dx;
    obs(2) = 0.0;
    obs(3) = pitch;
    obs(4) = state_.pitch_rate;
    // Body joint j sits at junction j+1; its feature is the end of the child
    // segment relative to the joint, in the parent segment's frame.
    for (int j = 0; j < nb; ++j) {
        const int lo = layout_.joint_slices[j].first;
        obs(lo) = state_.joint_angles(j);
        obs(lo + 1) = state_.joint_velocities(j);
        const Eigen::Vector2d rel =
            rotate(-frame.seg_angle[j], frame.seg_start[j + 2] - frame.seg_start[j + 1]);
        obs(lo + 2) = rel.x();
        obs(lo + 3) = rel.y();
    }
    // Leg joints: foot tip relative to the joint, in the segment (module) frame.
    for (int k = 0; k < config_.count_a; ++k) {
        const int hip = nb + 2 * k;
        for (int which = 0; which < 2; ++which) {
            const int j = hip + which;
            const int lo = layout_.joint_slices[j].first;
            obs(lo) = state_.joint_angles(j);
            obs(lo + 1) = state_.joint_velocities(j);
            const Eigen::Vector2d origin = which == 0 ? frame.attach[k] : frame.knee[k];
            const Eigen::Vector2d rel = rotate(-frame.seg_angle[k], frame.tip[k] - origin);
            obs(lo + 2) = rel.x();
            obs(lo + 3) = rel.y();
        }
    }
}

void Env::build_lifter_obs(Vector& obs) const {
    const LifterFrame frame = lifter_frame(config_.count_a, config_.count_b, state_.joint_angles);
    obs(0) = state_.disk_center.x() - frame.palm.x();
    obs(1) = state_.disk_center.y() - frame.palm.y();
    obs(2) = state_.disk_center.y();
    for (int j = 0; j < config_.count_a; ++j) {
        const int lo = layout_.joint_slices[j].first;
        obs(lo) = state_.joint_angles(j);
        obs(lo + 1) = state_.joint_velocities(j);
        const Eigen::Vector2d rel = frame.palm - frame.arm_joint[j];
        obs(lo + 2) = rel.x();
        obs(lo + 3) = rel.y();
    }
    for (int f = 0; f < config_.count_b; ++f) {
        for (int which = 0; which < 2; ++which) {
            const int j = config_.count_a + 2 * f + which;
            const int lo = layout_.joint_slices[j].first;
            obs(lo) = state_.joint_angles(j);
            obs(lo + 1) = state_.joint_velocities(j);
            const Eigen::Vector2d origin = which == 0 ? frame.mount[f] : frame.knuckle[f];
            const Eigen::Vector2d rel = rotate(-frame.palm_angle, frame.tip[f] - origin);
            obs(lo + 2) = rel.x();
            obs(lo + 3) = rel.y();
        }
    }
}

Vector Env::observe() const {
    Vector obs = Vector::Zero(layout_.total_dim());
    if (config_.kind == EnvKind::kCrawler) {
        build_crawler_obs(obs);
    } else {
        build_lifter_obs(obs);
    }
    return obs;
}

std::vector<Eigen::Vector2d> Env::foot_tips() const {
    if (config_.kind != EnvKind::kCrawler) throw MorphologyError("foot_tips on a lifter");
    return crawler_frame(config_.count_a, state_.joint_angles).tip;
}

Eigen::Vector2d Env::palm_position() const {
    if (config_.kind != EnvKind::kLifter) throw MorphologyError("palm_position on a crawler");
    return lifter_frame(config_.count_a, config_.count_b, state_.joint_angles).palm;
}

std::vector<Eigen::Vector2d> Env::fingertip_positions() const {
    if (config_.kind != EnvKind::kLifter) throw MorphologyError("fingertips on a crawler");
    return lifter_frame(config_.count_a, config_.count_b, state_.joint_angles).tip;
}

}  // namespace memo
