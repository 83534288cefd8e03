#pragma once

// Built-in example models: the degenerate-observation rotation chain, the
// reducible block chain, the three-state Gaussian model, plus path
// simulation and misspecified observation generators.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "perfsmooth/hmm.hpp"

namespace perfsmooth {

class GaussianEmission final : public EmissionModel {
  public:
    GaussianEmission(std::vector<double> means, std::vector<double> variances);

    double density(TimeIndex n, State x, Observation y) const override;
    bool has_sampler() const override { return true; }
    Observation sample(TimeIndex n, State x, RngStream& rng) const override;
    bool strictly_positive() const override { return true; }

    const std::vector<double>& means() const { return means_; }
    const std::vector<double>& variances() const { return variances_; }

  private:
    std::vector<double> means_;
    std::vector<double> variances_;
};

/// g(x, y) = 1{y == label[x]} under counting measure.
class IndicatorEmission final : public EmissionModel {
  public:
    explicit IndicatorEmission(std::vector<int> labels);

    double density(TimeIndex n, State x, Observation y) const override;
    bool has_sampler() const override { return true; }
    Observation sample(TimeIndex n, State x, RngStream& rng) const override;
    bool strictly_positive() const override { return false; }

  private:
    std::vector<int> labels_;
};

/// Explicit density table over a finite alphabet {0, ..., A-1}; each row is
/// the emission law of one state under counting measure.
class TabularEmission final : public EmissionModel {
  public:
    explicit TabularEmission(std::vector<std::vector<double>> table);

    double density(TimeIndex n, State x, Observation y) const override;
    bool has_sampler() const override { return true; }
    Observation sample(TimeIndex n, State x, RngStream& rng) const override;
    bool strictly_positive() const override;

    std::size_t alphabet_size() const { return table_.front().size(); }

  private:
    std::vector<std::vector<double>> table_;
};

/// Name, parameters, and the correspondence between internal 0-based state
/// labels and the labels used when the model was first written down.
struct ModelSpec {
    std::string name;
    std::map<std::string, double> parameters;
    std::vector<std::string> label_map;  ///< label_map[internal] = original label
};

struct NamedModel {
    ModelSpec spec;
    HmmModel model;
};

/// Four-state rotation: M(x,x) = M(x, x-1 mod 4) = 1/2, observing the
/// parity of the state. Original labels 0..3 are kept.
NamedModel degenerate_rotation();

/// The family pi^w of absolute probabilities for the rotation model's
/// conditional kernels given binary observations y (depth-indexed). Returns
/// entries for depths 0..depth.
std::vector<ProbVector> degenerate_absolute_probs(double w, const ObservationWindow& y,
                                                  std::size_t depth);

/// Two flat 2x2 blocks on {0,1} and {2,3}; invariant (1/2, 1/2, 0, 0).
/// Defaults to unit-variance Gaussian emissions centred at 0, 1, 2, 3.
NamedModel reducible_block(std::shared_ptr<const EmissionModel> emission = nullptr);

/// Three-state model with tridiagonal signal parameterized by delta and
/// N(0,1), N(1,1), N(0,1) emissions. Original labels 1, 2, 3.
NamedModel gaussian_three_state(double delta);

/// Homogeneous chain with uniform rows and the given emissions.
NamedModel flat_signal(std::size_t s, std::shared_ptr<const EmissionModel> emission);

struct SimulatedPath {
    std::vector<State> states;        ///< depth-indexed
    ObservationWindow observations;   ///< depth-indexed
    std::uint64_t seed = 0;
};

/// Draws X_{-K} from the invariant law and runs the chain forward to time 0,
/// emitting at every time.
SimulatedPath simulate_hmm(const HmmModel& model, std::size_t depth_k, RngStream rng);

/// Y_0 = 0, Y_n = Y_{n+1} + V_n with V_n ~ N(0, sigma2).
ObservationStream random_walk_obs(double sigma2, RngStream rng);

/// Y_n = slope * n + V_n with V_n ~ N(0, sigma2).
ObservationStream drift_obs(double slope, double sigma2, RngStream rng);

/// Materializes `length` observations from a stream (depths 0..length-1).
ObservationWindow materialize(ObservationStream& stream, std::size_t length);

}  // namespace perfsmooth
