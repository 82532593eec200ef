#include "memo/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace memo {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // prefer the shortest representation that still round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
        if (std::strtod(probe, nullptr) == v) return probe;
    }
    return buf;
}

namespace {
std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}
}  // namespace

CsvMetricsWriter::CsvMetricsWriter(const std::string& path) : out_(path) {
    if (!out_) throw IoError("cannot open metrics file " + path);
    out_ << header() << '\n';
}

std::string CsvMetricsWriter::header() {
    return "run_id,phase,index,env_steps,mean_reward,reported_reward,l1_bc,l2_inv,lp,ratio,"
           "wall_seconds";
}

std::string CsvMetricsWriter::format_row(const MetricsRow& row) {
    std::string line;
    line += row.run_id;
    line += ',';
    line += row.phase;
    line += ',';
    line += std::to_string(row.index);
    line += ',';
    line += std::to_string(row.env_steps);
    line += ',';
    line += format_optional(row.mean_reward);
    line += ',';
    line += format_optional(row.reported_reward);
    line += ',';
    line += format_optional(row.l1_bc);
    line += ',';
    line += format_optional(row.l2_inv);
    line += ',';
    line += format_optional(row.lp);
    line += ',';
    line += format_optional(row.ratio);
    line += ',';
    line += format_double(row.wall_seconds);
    return line;
}

void CsvMetricsWriter::write(const MetricsRow& row) {
    out_ << format_row(row) << '\n';
    out_.flush();
}

int max_worker_threads() {
    if (const char* env = std::getenv("MEMO_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace memo
