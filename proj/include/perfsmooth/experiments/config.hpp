#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfsmooth/models.hpp"

namespace perfsmooth::experiments {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class DataKind { none, simulated, random_walk, drift, csv };

struct DataSource {
    DataKind kind = DataKind::none;
    std::string label;
    std::size_t length = 0;  ///< 0 means "as long as the experiment needs"
    double sigma2 = 0.25;
    double slope = 0.003;
    std::filesystem::path csv_path;
    std::optional<std::uint64_t> seed;
};

struct ExperimentConfig {
    std::string name = "experiment";
    json model;
    std::vector<DataSource> data;
    std::size_t replicates = 1000;
    std::size_t cutoff = 1000;
    std::uint64_t seed = 1;
    std::size_t target_depth = 0;
    std::filesystem::path out_dir = "out";
    std::size_t workers = 1;

    // figure1
    std::size_t beta_depth = 1000;
    std::size_t within = 200;
    // table1
    std::vector<std::size_t> table_n = {5, 10, 25, 50, 100};
    std::vector<std::size_t> table_draws = {100, 1000, 10000};
    std::size_t smoother_depth = 1000;
    // diagnose
    std::size_t probe_depths = 20;
    std::size_t checkpoint_spacing = 1;

    /// Effective configuration, as hashed into every output header.
    json effective;
};

ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Re-derives `effective` after command-line overrides.
void refresh_effective(ExperimentConfig& cfg);

/// Signal plus optional emission; chains without emissions run plain CFTP.
struct ResolvedModel {
    ModelSpec spec;
    KernelSequence signal;
    std::optional<HmmModel> hmm;
    std::optional<ProbVector> invariant;
};

ResolvedModel build_model(const json& model_spec);

StochasticMatrix matrix_from_json(const json& j);
ProbVector vector_from_json(const json& j);
std::shared_ptr<const EmissionModel> emission_from_json(const json& j);

/// CSV with columns (time, value); times must be 0, -1, -2, ... in any row order.
ObservationWindow read_observation_csv(const std::filesystem::path& path);

/// Fixed data realization for an experiment: `needed` observations, or the
/// whole record for CSV input. Also returns hidden states for simulated data.
struct Dataset {
    ObservationWindow observations;
    std::vector<State> states;
};

Dataset load_dataset(const DataSource& src, const HmmModel& model, std::uint64_t seed,
                     std::size_t needed);

}  // namespace perfsmooth::experiments
