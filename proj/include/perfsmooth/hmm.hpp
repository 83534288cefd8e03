#pragma once

// Hidden Markov models on the nonpositive time axis, the backward phi
// recursion, the conditional signal kernels it induces, and the perfect
// smoothing samplers built on top of them.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "perfsmooth/chain_core.hpp"
#include "perfsmooth/coupling.hpp"
#include "perfsmooth/rng.hpp"

namespace perfsmooth {

/// A point of the observation space. Built-in models use a real scalar;
/// discrete alphabets store the symbol index.
struct Observation {
    double value = 0.0;

    bool operator==(const Observation&) const = default;
};

/// Observations indexed by depth: window[d] is y at time -d.
using ObservationWindow = std::vector<Observation>;

/// Emission density g_n(x, y) with respect to a fixed dominating measure,
/// plus an optional sampler from the same law.
class EmissionModel {
  public:
    virtual ~EmissionModel() = default;

    virtual double density(TimeIndex n, State x, Observation y) const = 0;

    virtual bool has_sampler() const { return false; }
    virtual Observation sample(TimeIndex n, State x, RngStream& rng) const;

    /// True when g(x, y) > 0 for every state and every observation.
    virtual bool strictly_positive() const = 0;
};

class UnsupportedOperation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

class DataExhausted : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class OutOfOrderQuery : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

struct HmmModel {
    KernelSequence signal;
    std::shared_ptr<const EmissionModel> emission;
    std::optional<ProbVector> invariant_dist;

    /// Checks sizes and, when present, that the invariant vector is fixed by
    /// the signal kernels at a few probe depths.
    HmmModel(KernelSequence signal, std::shared_ptr<const EmissionModel> emission,
             std::optional<ProbVector> invariant_dist = std::nullopt);

    std::size_t size() const { return signal.size(); }
    double g(TimeIndex n, State x, Observation y) const;
};

/// Pull-based backward source of observations. Values are produced in depth
/// order 0, 1, 2, ... and cached; pulling depth d forces every shallower
/// depth first.
class ObservationStream {
  public:
    /// Called exactly once per depth, in increasing depth order.
    using Generator = std::function<Observation(std::size_t depth)>;

    explicit ObservationStream(Generator gen);

    /// A finite record; pulling beyond its end throws DataExhausted.
    static ObservationStream from_window(ObservationWindow window);

    Observation pull(TimeIndex n);

    /// Number of distinct depths pulled so far.
    std::size_t pulls_made() const { return cache_.size(); }
    const ObservationWindow& pulled() const { return cache_; }

  private:
    Generator gen_;
    ObservationWindow cache_;
};

/// Normalized phi at some time plus the log of the factor that was divided
/// out, so that the raw phi equals exp(log_norm) * phi.
struct PhiState {
    std::vector<double> phi;
    double log_norm = 0.0;
    /// nullopt stands for time 1, where phi is identically one.
    std::optional<TimeIndex> time;
    bool all_zero = false;

    static PhiState terminal(std::size_t s);
};

/// Values below this are flushed to zero in the unnormalized recursion.
inline constexpr double kPhiFlushThreshold = 1e-300;

/// phi_n(x) = sum_{x'} M_n(x,x') g_n(x', y_n) phi_{n+1}(x'), renormalized.
PhiState phi_backward_step(const HmmModel& model, TimeIndex n, Observation y_n,
                           const PhiState& next);

/// M_n^y built from phi_{n+1} (`phi_next`) and phi_n (`phi_curr`). Rows where
/// phi_n vanishes fall back to M_n.
StochasticMatrix conditional_kernel(const HmmModel& model, TimeIndex n, Observation y_n,
                                    const PhiState& phi_next, const PhiState& phi_curr);

/// Lazily produces M_n^y while walking backward through an observation
/// stream. Single pass: each query must be strictly earlier than the last.
class ConditionalKernelSource final : public KernelSource {
  public:
    ConditionalKernelSource(const HmmModel& model, ObservationStream& obs);

    std::size_t size() const override { return model_->size(); }
    StochasticMatrix kernel(TimeIndex n) override;

    /// phi at the last advanced time (time 1 before the first query).
    const PhiState& phi() const { return phi_; }
    /// phi one step later than phi().
    const PhiState& phi_next() const { return phi_next_; }

  private:
    void advance();

    const HmmModel* model_;
    ObservationStream* obs_;
    PhiState phi_next_;
    PhiState phi_;
    std::optional<StochasticMatrix> last_kernel_;
    std::size_t advanced_ = 0;  // number of phi steps taken
    std::optional<TimeIndex> last_query_;
};

ConditionalKernelSource make_conditional_source(const HmmModel& model, ObservationStream& obs);

/// Conditional kernels M^y at depths 0 .. count-1 for a finite window.
std::vector<StochasticMatrix> conditional_kernels(const HmmModel& model,
                                                  const ObservationWindow& window,
                                                  std::size_t count);

struct HmmCouplingResult {
    CouplingOutcome outcome;
    std::size_t observations_consumed = 0;
};

/// Perfect draw from the smoothing law at `target` by coupling from the past
/// over the conditional kernels.
HmmCouplingResult hmm_cftp(const HmmModel& model, ObservationStream& obs, TimeIndex target,
                           RngStream& rng, std::size_t cutoff);

/// Exact draw from P(X_0 | y_m, ..., y_0) given window[0..|m|]. Requires a
/// homogeneous model with known invariant distribution.
State finite_obs_cftp(const HmmModel& model, const ObservationWindow& window, RngStream& rng);

/// The law sampled by finite_obs_cftp, computed densely.
ProbVector finite_obs_law(const HmmModel& model, const ObservationWindow& window);

struct SmootherApproximation {
    ProbVector law;
    /// beta(M^y_{n-K,n}); bounds the dependence on the start state.
    double beta = 1.0;
};

inline constexpr std::size_t kDefaultSmootherDepth = 1000;

/// Row `start_state` of M^y_{n-K, n}.
SmootherApproximation approximate_smoother(const HmmModel& model, const ObservationWindow& window,
                                           TimeIndex n, std::size_t depth_k = kDefaultSmootherDepth,
                                           State start_state = 0);

struct MultiSampleResult {
    std::vector<State> samples;
    CouplingOutcome step1;
    double step1_seconds = 0.0;
    double step2_seconds = 0.0;
};

/// Exact X_n* by coupling, then N conditionally independent draws from
/// M^y_{n,0}(X_n*, .). Marginals are exact; draws are dependent in general.
MultiSampleResult multi_sample(const HmmModel& model, const ObservationWindow& window,
                               TimeIndex n, std::size_t count, RngStream& rng,
                               std::size_t cutoff);

/// ||lambda_n - pi_0 (x) pi_0|| for the pair law of two draws of multi_sample.
double pairwise_dependence(const HmmModel& model, const ObservationWindow& window, TimeIndex n,
                           std::size_t depth_k = kDefaultSmootherDepth);

/// Same quantity from explicit inputs: pi_n, M^y_{n,0} and pi_0.
double pairwise_dependence(const ProbVector& pi_n, const StochasticMatrix& forward,
                           const ProbVector& pi_0);

/// Upper bound on beta(M^y_{n,k}) from a certificate for M_{n,k}.
double beta_bound(const MinorizationCertificate& cert, const HmmModel& model,
                  const ObservationWindow& window, TimeIndex n, TimeIndex k);

struct ProbeSettings {
    ObservationWindow observations;  ///< points at which emissions are probed
    DepthRange depths{0, 0};         ///< signal depths probed
};

struct SufficientConditionsReport {
    bool surely_successful = false;
    bool as_successful_evidence = false;
    double min_signal_entry = 0.0;
    bool emission_positive_somewhere = false;
    bool emission_positive_everywhere = false;
    std::optional<MinorizationCertificate> certificate;
    std::vector<std::string> notes;
};

SufficientConditionsReport sufficient_conditions_report(const HmmModel& model,
                                                        const ProbeSettings& probe);

}  // namespace perfsmooth
