#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "memo/errors.hpp"

namespace memo {

// One appended telemetry record. RL phases fill the reward columns, IL
// phases the loss-decomposition columns; absent values serialize as empty
// CSV fields.
struct MetricsRow {
    std::string run_id;
    std::string phase;
    long index = 0;      // update or epoch counter, monotone within a run
    long env_steps = 0;
    std::optional<double> mean_reward;
    std::optional<double> reported_reward;
    std::optional<double> l1_bc;
    std::optional<double> l2_inv;
    std::optional<double> lp;
    std::optional<double> ratio;
    double wall_seconds = 0.0;
};

struct MetricsSink {
    virtual ~MetricsSink() = default;
    virtual void write(const MetricsRow& row) = 0;
};

class CsvMetricsWriter : public MetricsSink {
public:
    explicit CsvMetricsWriter(const std::string& path);
    void write(const MetricsRow& row) override;

    static std::string header();
    static std::string format_row(const MetricsRow& row);

private:
    std::ofstream out_;
};

struct VectorMetricsSink : MetricsSink {
    std::vector<MetricsRow> rows;
    void write(const MetricsRow& row) override { rows.push_back(row); }
};

// Worker-thread cap: MEMO_THREADS when set, else hardware concurrency.
int max_worker_threads();

// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace memo
