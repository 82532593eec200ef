#pragma once

#include <string>
#include <vector>

#include "memo/env.hpp"
#include "memo/policy.hpp"

namespace memo {

// Exact actuator-boss Jacobian J[n, m] = d mean_n / d H_m at one state,
// assembled from one reverse pass per joint. No latent noise.
Matrix jacobian_wrt_latent(const ModularPolicy& policy, const Vector& normalized_obs);

struct SvdResult {
    Vector singular_values;  // descending, non-negative
    Matrix u;                // rows x k
    Matrix v;                // cols x k, input = u * diag(s) * v^T
};

// One-sided Jacobi SVD for small dense matrices.
SvdResult jacobi_svd(const Matrix& input);

struct SpectrumReport {
    static constexpr int kBins = 20;

    std::vector<std::vector<double>> per_state;  // normalized values, descending
    std::vector<double> pooled;
    std::vector<long> histogram;  // kBins bins over [0, 1]
    double pooled_median = 0.0;
    double fraction_below_tenth = 0.0;
    int skipped_zero_jacobians = 0;
    int states_visited = 0;
};

// Rolls deterministic-mean episodes, computes the normalized singular
// spectrum of the Jacobian at every visited state, and pools the values.
// Zero Jacobians are skipped and counted.
SpectrumReport spectra_over_trajectories(const ModularPolicy& policy,
                                         const RunningNormalizer& normalizer,
                                         const EnvConfig& env_config, int num_trajectories,
                                         std::uint64_t base_seed);

void write_spectrum_csvs(const SpectrumReport& report, const std::string& values_path,
                         const std::string& histogram_path);

}  // namespace memo
