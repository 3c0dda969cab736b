#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "versenet/poem.hpp"

namespace versenet {

// Line-delimited poem records behind a header line carrying the iteration and
// the expected count; a load can therefore never yield a silent partial pool.
std::string pool_filename(int iteration);
std::string persist_pool(const PoemPool& pool, const std::string& dir);
PoemPool load_pool(const std::string& path);

struct MetricsRow {
    std::string run_id;
    int iteration = 0;
    std::string agent;  // agent index, "mean", or "-" for pool-level statistics
    std::string statistic;
    double value = 0.0;
};

// Fixed header: run_id,iteration,agent,statistic,value
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> load_metrics_csv(const std::string& path);

// tmp-file-plus-rename so partially written files never shadow complete ones.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

std::string format_double(double value);

}  // namespace versenet
