#pragma once

#include <string>
#include <vector>

#include "memo/config.hpp"

namespace memo {

struct RunOutcome {
    std::vector<std::string> run_dirs;
    std::vector<std::string> run_ids;
};

// Executes the configured phase once per seed. Each run writes
// output_dir/<run_id>/ with config_hash.txt, metrics.csv, and a checkpoint or
// spectrum CSVs as the phase dictates. run_id = <config-hash-prefix>_s<seed>.
RunOutcome run_experiment(const ExperimentConfig& config);

}  // namespace memo
