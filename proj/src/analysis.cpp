#include "memo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "memo/metrics.hpp"

namespace memo {

Matrix jacobian_wrt_latent(const ModularPolicy& policy, const Vector& normalized_obs) {
    const Vector latent = policy.boss_forward(normalized_obs);
    std::vector<MlpTape> tapes;
    policy.modules_forward(latent, normalized_obs, &tapes);

    Matrix jac = Matrix::Zero(policy.num_joints(), policy.latent_dim());
    Vector unit(1);
    for (const ModuleInstance& inst : policy.partition.instances) {
        const auto& roles = policy.modules.at(inst.type_id);
        for (std::size_t r = 0; r < inst.joint_ids.size(); ++r) {
            const int j = inst.joint_ids[r];
            GradStore scratch = GradStore::zeros_like(roles[r]);
            unit(0) = 1.0;
            const Vector dinput = mlp_backward(tapes[j], unit, scratch);
            jac.row(j).segment(inst.instance_id * policy.signal_dim, policy.signal_dim) =
                dinput.tail(policy.signal_dim).transpose();
        }
    }
    return jac;
}

SvdResult jacobi_svd(const Matrix& input) {
    if (!input.allFinite()) throw NumericalError("jacobi_svd on non-finite input");
    const bool transposed = input.rows() < input.cols();
    Matrix work = transposed ? Matrix(input.transpose()) : input;
    const Eigen::Index n = work.rows();
    const Eigen::Index k = work.cols();  // n >= k

    Matrix rot = Matrix::Identity(k, k);
    const double tol = 1e-14;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool converged = true;
        for (Eigen::Index p = 0; p + 1 < k; ++p) {
            for (Eigen::Index q = p + 1; q < k; ++q) {
                const double app = work.col(p).squaredNorm();
                const double aqq = work.col(q).squaredNorm();
                const double apq = work.col(p).dot(work.col(q));
                if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
                converged = false;
                const double theta = 0.5 * std::atan2(2.0 * apq, app - aqq);
                const double c = std::cos(theta), s = std::sin(theta);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double wp = work(i, p), wq = work(i, q);
                    work(i, p) = c * wp + s * wq;
                    work(i, q) = -s * wp + c * wq;
                }
                for (Eigen::Index i = 0; i < k; ++i) {
                    const double vp = rot(i, p), vq = rot(i, q);
                    rot(i, p) = c * vp + s * vq;
                    rot(i, q) = -s * vp + c * vq;
                }
            }
        }
        if (converged) break;
    }

    Vector sigma(k);
    Matrix left(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        sigma(j) = work.col(j).norm();
        left.col(j) = sigma(j) > 0.0 ? Vector(work.col(j) / sigma(j)) : Vector(Vector::Zero(n));
    }

    std::vector<Eigen::Index> order(k);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return sigma(a) > sigma(b); });
    SvdResult result;
    result.singular_values.resize(k);
    Matrix left_sorted(n, k), rot_sorted(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        result.singular_values(j) = sigma(order[j]);
        left_sorted.col(j) = left.col(order[j]);
        rot_sorted.col(j) = rot.col(order[j]);
    }
    // work = input (or its transpose) times rot; input = left * sigma * rot^T
    if (transposed) {
        result.u = rot_sorted;
        result.v = left_sorted;
    } else {
        result.u = left_sorted;
        result.v = rot_sorted;
    }
    return result;
}

SpectrumReport spectra_over_trajectories(const ModularPolicy& policy,
                                         const RunningNormalizer& normalizer,
                                         const EnvConfig& env_config, int num_trajectories,
                                         std::uint64_t base_seed) {
    if (num_trajectories < 1) throw ConfigError("need at least one trajectory");
    SpectrumReport report;
    report.histogram.assign(SpectrumReport::kBins, 0);

    for (int traj = 0; traj < num_trajectories; ++traj) {
        EnvConfig ec = env_config;
        ec.seed = base_seed + static_cast<std::uint64_t>(traj);
        Env env(ec);
        Vector raw = env.reset();
        const int episode_len = ec.resolved_episode_len();
        for (int t = 0; t < episode_len; ++t) {
            const Vector nobs = normalizer.normalize(raw);
            ++report.states_visited;
            const Matrix jac = jacobian_wrt_latent(policy, nobs);
            const SvdResult svd = jacobi_svd(jac);
            const double top = svd.singular_values(0);
            if (top <= 0.0) {
                ++report.skipped_zero_jacobians;
            } else {
                std::vector<double> normalized(svd.singular_values.size());
                for (Eigen::Index i = 0; i < svd.singular_values.size(); ++i) {
                    const double v = svd.singular_values(i) / top;
                    normalized[static_cast<std::size_t>(i)] = v;
                    report.pooled.push_back(v);
                    const int bin = std::min(SpectrumReport::kBins - 1,
                                             static_cast<int>(v * SpectrumReport::kBins));
                    ++report.histogram[bin];
                }
                report.per_state.push_back(std::move(normalized));
            }
            auto result = env.step(policy.mean_action(nobs));
            if (result.done) break;
            raw = std::move(result.obs);
        }
    }

    if (!report.pooled.empty()) {
        std::vector<double> sorted = report.pooled;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        report.pooled_median =
            n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        report.fraction_below_tenth =
            static_cast<double>(std::count_if(sorted.begin(), sorted.end(),
                                              [](double v) { return v < 0.1; })) /
            static_cast<double>(n);
    }
    return report;
}

void write_spectrum_csvs(const SpectrumReport& report, const std::string& values_path,
                         const std::string& histogram_path) {
    std::ofstream values(values_path);
    if (!values) throw IoError("cannot open " + values_path);
    values << "state_index,value\n";
    for (std::size_t s = 0; s < report.per_state.size(); ++s) {
        for (double v : report.per_state[s]) {
            values << s << ',' << format_double(v) << '\n';
        }
    }

    std::ofstream hist(histogram_path);
    if (!hist) throw IoError("cannot open " + histogram_path);
    hist << "bin_lo,bin_hi,count\n";
    for (int b = 0; b < SpectrumReport::kBins; ++b) {
        hist << format_double(static_cast<double>(b) / SpectrumReport::kBins) << ','
             << format_double(static_cast<double>(b + 1) / SpectrumReport::kBins) << ','
             << report.histogram[b] << '\n';
    }
}

}  // namespace memo
