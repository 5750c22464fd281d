#pragma once

#include "morphogen/config.hpp"
#include "morphogen/optimizer.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace morphogen {

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

struct SweepSpec {
    RunConfig base;
    std::vector<SweepAxis> axes;
    double confidence = 0.99;
    int comparisons = 1;  // Bonferroni divisor
};

/// Base config lines plus `axis <key> = v1 | v2 | ...`, `sweep_confidence = c` and
/// `sweep_comparisons = n`. Axis keys and values are validated up front.
SweepSpec parse_sweep_text(const std::string& text);
SweepSpec parse_sweep(const std::filesystem::path& path);

struct SweepCondition {
    std::vector<std::pair<std::string, std::string>> settings;
    RunConfig config;
};

/// Cross product of the axes, first axis varying slowest.
std::vector<SweepCondition> expand_conditions(const SweepSpec& spec);

struct SweepRun {
    std::size_t condition = 0;
    std::uint64_t seed = 0;
    std::vector<double> fitness;  // per completed attempt
    std::vector<std::size_t> alive;
    bool failed = false;
    std::string error;
};

using SweepRunner = std::function<std::vector<AttemptRecord>(const RunConfig&, std::uint64_t)>;

/// One run per condition x seed on `parallelism` worker threads. A throwing or
/// failed run is reported through `log` and kept with failed = true.
std::vector<SweepRun> run_sweep(const SweepSpec& spec, int parallelism, const SweepRunner& runner = {},
                                const std::function<void(const std::string&)>& log = {});

/// Per condition and attempt: run count, mean fitness and its normal interval.
/// Failed runs are left out. Rows depend only on the set of runs, not their order.
std::string aggregate_csv(const SweepSpec& spec, std::vector<SweepRun> runs);

}  // namespace morphogen
