#pragma once

// Experiment drivers behind the CLI subcommands. Each run_* function is pure
// computation returning a result struct; the matching write_* emits the CSV
// and JSON files under cfg.out_dir. Deterministic outputs never contain
// timings; those go to separate *_timings.csv files.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfsmooth/experiments/config.hpp"

namespace perfsmooth::experiments {

enum class RunStatus { coalesced, cutoff_exceeded, data_exhausted };

const char* to_string(RunStatus s);

struct RunRecord {
    std::size_t replicate = 0;
    RunStatus status = RunStatus::cutoff_exceeded;
    std::size_t coalescence_depth = 0;
    State sample = 0;
    std::size_t observations_consumed = 0;
    double seconds = 0.0;
};

struct SampleResult {
    std::vector<RunRecord> records;
    std::vector<double> sample_law;
    std::size_t coalesced = 0;
    std::size_t cutoff_failures = 0;
    std::size_t data_exhausted = 0;
    double failure_fraction = 0.0;
    nlohmann::json summary;
};

SampleResult run_sample(const ExperimentConfig& cfg);
void write_sample(const ExperimentConfig& cfg, const SampleResult& res);

struct Figure1Column {
    std::string label;
    Dataset data;
    std::vector<double> beta;               ///< beta(M^y_{n,0}) for depth 0..beta_depth
    std::vector<std::size_t> depth_counts;  ///< index = coalescence depth
    std::size_t cutoff_failures = 0;
    std::size_t replicates = 0;
    double fraction_within = 0.0;           ///< share of runs with depth <= cfg.within
    std::optional<std::size_t> beta_below_1e6;  ///< first depth with beta < 1e-6
};

std::vector<Figure1Column> run_figure1(const ExperimentConfig& cfg);
void write_figure1(const ExperimentConfig& cfg, const std::vector<Figure1Column>& cols);

struct Table1Timing {
    std::size_t n = 0;
    std::size_t draws = 0;
    double mean_pct = 0.0;
    double sd_pct = 0.0;
    std::size_t runs = 0;
};

struct Table1Result {
    std::vector<std::size_t> n;
    std::vector<double> dependence;
    std::vector<Table1Timing> timing;
};

Table1Result run_table1(const ExperimentConfig& cfg);
void write_table1(const ExperimentConfig& cfg, const Table1Result& res);

nlohmann::json run_diagnose(const ExperimentConfig& cfg);
void write_diagnose(const ExperimentConfig& cfg, const nlohmann::json& report);

/// Runs f(r) for r in [0, count) on `workers` threads; results are ordered by r.
template <typename T, typename F>
std::vector<T> parallel_replicates(std::size_t count, std::size_t workers, F f);

}  // namespace perfsmooth::experiments

#include "perfsmooth/experiments/parallel.inl"
