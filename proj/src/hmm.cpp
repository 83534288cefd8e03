#include "perfsmooth/hmm.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace perfsmooth {

namespace {

// Reducible chains flush the same coordinate on every run; keep stderr readable.
std::atomic<unsigned> flush_logs{0};
constexpr unsigned kFlushLogLimit = 5;

void log_flush(std::size_t x, double v, TimeIndex n) {
    const unsigned k = flush_logs.fetch_add(1, std::memory_order_relaxed);
    if (k < kFlushLogLimit)
        std::clog << "perfsmooth: flushing phi(" << x << ") = " << v << " at time " << n.time() << "\n";
    else if (k == kFlushLogLimit)
        std::clog << "perfsmooth: further phi flushes not logged\n";
}

}  // namespace

Observation EmissionModel::sample(TimeIndex, State, RngStream&) const {
    throw UnsupportedOperation("emission model has no sampler");
}

HmmModel::HmmModel(KernelSequence signal_, std::shared_ptr<const EmissionModel> emission_,
                   std::optional<ProbVector> invariant_dist_)
    : signal(std::move(signal_)),
      emission(std::move(emission_)),
      invariant_dist(std::move(invariant_dist_)) {
    if (!emission) throw std::invalid_argument("HMM needs an emission model");
    if (invariant_dist) {
        if (invariant_dist->size() != signal.size()) {
            throw DimensionMismatch("invariant distribution has the wrong size");
        }
        const ProbVector pushed = propagate(*invariant_dist, signal.at({0}));
        if (total_variation(pushed, *invariant_dist) > 1e-10) {
            throw std::invalid_argument("invariant distribution is not fixed by the signal kernel");
        }
    }
}

double HmmModel::g(TimeIndex n, State x, Observation y) const {
    const double v = emission->density(n, x, y);
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::domain_error("emission density must be finite and nonnegative");
    }
    return v;
}

// ---------------------------------------------------------------------------
// ObservationStream

ObservationStream::ObservationStream(Generator gen) : gen_(std::move(gen)) {}

ObservationStream ObservationStream::from_window(ObservationWindow window) {
    auto shared = std::make_shared<const ObservationWindow>(std::move(window));
    return ObservationStream([shared](std::size_t d) {
        if (d >= shared->size()) {
            throw DataExhausted("observation record ends at time -" +
                                std::to_string(shared->size() - 1) + " but time -" +
                                std::to_string(d) +
                                " was needed; consider the finite-window sampler");
        }
        return (*shared)[d];
    });
}

Observation ObservationStream::pull(TimeIndex n) {
    while (cache_.size() <= n.depth) cache_.push_back(gen_(cache_.size()));
    return cache_[n.depth];
}

// ---------------------------------------------------------------------------
// phi recursion and conditional kernels

PhiState PhiState::terminal(std::size_t s) {
    PhiState p;
    p.phi.assign(s, 1.0 / static_cast<double>(s));
    p.log_norm = std::log(static_cast<double>(s));
    return p;
}

namespace {

// One phi step. When `kernel` is given, also fills the conditional kernel at
// n, which reuses the same weights and row sums.
PhiState backward_step(const HmmModel& model, TimeIndex n, Observation y_n, const PhiState& next,
                       std::optional<StochasticMatrix>* kernel) {
    const std::size_t s = model.size();
    PhiState out;
    out.time = n;
    out.phi.assign(s, 0.0);
    const StochasticMatrix m = model.signal.at(n);
    if (next.all_zero) {
        out.all_zero = true;
        out.log_norm = -std::numeric_limits<double>::infinity();
        if (kernel) *kernel = m;
        return out;
    }

    std::vector<double> weighted(s), denom(s);
    for (std::size_t xp = 0; xp < s; ++xp) weighted[xp] = model.g(n, xp, y_n) * next.phi[xp];

    double total = 0.0;
    for (std::size_t x = 0; x < s; ++x) {
        double acc = 0.0;
        for (std::size_t xp = 0; xp < s; ++xp) acc += m(x, xp) * weighted[xp];
        denom[x] = acc;
        if (acc > 0.0 && acc < kPhiFlushThreshold) {
            log_flush(x, acc, n);
            acc = 0.0;
        }
        out.phi[x] = acc;
        total += acc;
    }
    if (total == 0.0) {
        out.all_zero = true;
        out.log_norm = -std::numeric_limits<double>::infinity();
        if (kernel) *kernel = m;
        return out;
    }
    for (double& v : out.phi) v /= total;
    out.log_norm = next.log_norm + std::log(total);

    if (kernel) {
        std::vector<double> entries(s * s);
        for (std::size_t x = 0; x < s; ++x) {
            const bool fallback = out.phi[x] == 0.0 || denom[x] == 0.0;
            for (std::size_t xp = 0; xp < s; ++xp)
                entries[x * s + xp] = fallback ? m(x, xp) : m(x, xp) * weighted[xp] / denom[x];
        }
        *kernel = StochasticMatrix::from_entries(s, std::move(entries), /*repair_drift=*/true);
    }
    return out;
}

}  // namespace

PhiState phi_backward_step(const HmmModel& model, TimeIndex n, Observation y_n,
                           const PhiState& next) {
    const bool adjacent = next.time ? next.time->depth + 1 == n.depth : n.depth == 0;
    if (!adjacent || next.phi.size() != model.size()) {
        throw std::invalid_argument("phi_backward_step needs phi at the following time");
    }
    return backward_step(model, n, y_n, next, nullptr);
}

StochasticMatrix conditional_kernel(const HmmModel& model, TimeIndex n, Observation y_n,
                                    const PhiState& phi_next, const PhiState& phi_curr) {
    const std::size_t s = model.size();
    if (phi_curr.time != n || phi_next.phi.size() != s || phi_curr.phi.size() != s) {
        throw std::invalid_argument("conditional_kernel needs phi at times n and n+1");
    }
    const StochasticMatrix m = model.signal.at(n);
    std::vector<double> weighted(s);
    for (std::size_t xp = 0; xp < s; ++xp) weighted[xp] = model.g(n, xp, y_n) * phi_next.phi[xp];

    std::vector<double> entries(s * s);
    for (std::size_t x = 0; x < s; ++x) {
        double denom = 0.0;
        for (std::size_t xp = 0; xp < s; ++xp) denom += m(x, xp) * weighted[xp];
        // denom is phi_n(x) before normalization; the ratio is scale free.
        if (phi_curr.all_zero || phi_curr.phi[x] == 0.0 || denom == 0.0) {
            for (std::size_t xp = 0; xp < s; ++xp) entries[x * s + xp] = m(x, xp);
        } else {
            for (std::size_t xp = 0; xp < s; ++xp) {
                entries[x * s + xp] = m(x, xp) * weighted[xp] / denom;
            }
        }
    }
    return StochasticMatrix::from_entries(s, std::move(entries), /*repair_drift=*/true);
}

ConditionalKernelSource::ConditionalKernelSource(const HmmModel& model, ObservationStream& obs)
    : model_(&model),
      obs_(&obs),
      phi_next_(PhiState::terminal(model.size())),
      phi_(PhiState::terminal(model.size())) {}

void ConditionalKernelSource::advance() {
    const TimeIndex n{advanced_};
    PhiState fresh = backward_step(*model_, n, obs_->pull(n), phi_, &last_kernel_);
    phi_next_ = std::move(phi_);
    phi_ = std::move(fresh);
    ++advanced_;
}

StochasticMatrix ConditionalKernelSource::kernel(TimeIndex n) {
    if (last_query_ && n.depth <= last_query_->depth) {
        throw OutOfOrderQuery("conditional kernels must be queried at strictly earlier times");
    }
    while (advanced_ <= n.depth) advance();
    last_query_ = n;
    return *last_kernel_;
}

ConditionalKernelSource make_conditional_source(const HmmModel& model, ObservationStream& obs) {
    return ConditionalKernelSource(model, obs);
}

std::vector<StochasticMatrix> conditional_kernels(const HmmModel& model,
                                                  const ObservationWindow& window,
                                                  std::size_t count) {
    if (window.size() < count) {
        throw DataExhausted("observation window too short for " + std::to_string(count) +
                            " conditional kernels");
    }
    ObservationStream obs([&window](std::size_t d) { return window[d]; });
    ConditionalKernelSource src(model, obs);
    std::vector<StochasticMatrix> out;
    out.reserve(count);
    for (std::size_t d = 0; d < count; ++d) out.push_back(src.kernel({d}));
    return out;
}

namespace {

// Product of kernels[hi-1] * ... * kernels[lo], i.e. M_{-hi, -lo}.
StochasticMatrix forward_product(const std::vector<StochasticMatrix>& kernels, std::size_t lo,
                                 std::size_t hi, std::size_t s) {
    StochasticMatrix out = StochasticMatrix::identity(s);
    for (std::size_t d = hi; d > lo; --d) out = out * kernels[d - 1];
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// Samplers

HmmCouplingResult hmm_cftp(const HmmModel& model, ObservationStream& obs, TimeIndex target,
                           RngStream& rng, std::size_t cutoff) {
    const std::size_t before = obs.pulls_made();
    ConditionalKernelSource src(model, obs);
    HmmCouplingResult out{cftp(src, target, rng, cutoff), 0};
    out.observations_consumed = obs.pulls_made() - before;
    return out;
}

namespace {

void require_homogeneous_invariant(const HmmModel& model) {
    if (!model.invariant_dist) {
        throw std::invalid_argument("finite-window sampler needs the invariant distribution");
    }
}

std::vector<double> start_weights(const HmmModel& model, TimeIndex m, Observation y_m,
                                  const PhiState& phi_after) {
    const std::size_t s = model.size();
    std::vector<double> w(s);
    for (std::size_t x = 0; x < s; ++x) {
        w[x] = (*model.invariant_dist)[x] * model.g(m, x, y_m) * phi_after.phi[x];
    }
    return w;
}

}  // namespace

State finite_obs_cftp(const HmmModel& model, const ObservationWindow& window, RngStream& rng) {
    require_homogeneous_invariant(model);
    if (window.empty()) throw std::invalid_argument("empty observation window");
    const std::size_t m_depth = window.size() - 1;

    ObservationStream obs([&window](std::size_t d) { return window[d]; });
    ConditionalKernelSource src(model, obs);
    ComposedMap map = ComposedMap::identity(model.size());
    if (m_depth > 0) {
        CouplingTrace trace = cftp_trace(src, {0}, rng, m_depth);
        if (const auto* hit = std::get_if<Coalesced>(&trace.outcome)) return hit->sample;
        map = std::move(trace.map);
    }
    // Reached time m without coalescing: draw Z_m from pi g_m phi_{m+1}.
    const TimeIndex m{m_depth};
    const std::vector<double> w = start_weights(model, m, window[m_depth], src.phi());
    const ProbVector start = ProbVector::normalized(w);
    return map.image[sample_from(start.weights(), rng)];
}

ProbVector finite_obs_law(const HmmModel& model, const ObservationWindow& window) {
    require_homogeneous_invariant(model);
    if (window.empty()) throw std::invalid_argument("empty observation window");
    const std::size_t m_depth = window.size() - 1;
    const std::size_t s = model.size();

    ObservationStream obs([&window](std::size_t d) { return window[d]; });
    ConditionalKernelSource src(model, obs);
    std::vector<StochasticMatrix> kernels;
    for (std::size_t d = 0; d < m_depth; ++d) kernels.push_back(src.kernel({d}));
    const ProbVector start =
        ProbVector::normalized(start_weights(model, {m_depth}, window[m_depth], src.phi()));
    return propagate(start, forward_product(kernels, 0, m_depth, s));
}

SmootherApproximation approximate_smoother(const HmmModel& model, const ObservationWindow& window,
                                           TimeIndex n, std::size_t depth_k, State start_state) {
    if (depth_k == 0) throw std::invalid_argument("smoother depth must be positive");
    if (start_state >= model.size()) throw std::out_of_range("start state out of range");
    const std::size_t needed = n.depth + depth_k;
    if (window.size() < needed) {
        throw DataExhausted("observation window must cover time -" + std::to_string(needed - 1));
    }
    const auto kernels = conditional_kernels(model, window, needed);
    const StochasticMatrix prod = forward_product(kernels, n.depth, needed, model.size());
    return {prod.row_vector(start_state), dobrushin(prod)};
}

MultiSampleResult multi_sample(const HmmModel& model, const ObservationWindow& window,
                               TimeIndex n, std::size_t count, RngStream& rng,
                               std::size_t cutoff) {
    if (count == 0) throw std::invalid_argument("multi_sample needs at least one draw");
    const std::size_t s = model.size();
    MultiSampleResult out{{}, CutoffExceeded{cutoff}, 0.0, 0.0};

    // Step 1: M^y_{n,0} and an exact draw at time n, sharing one backward pass.
    auto t0 = std::chrono::steady_clock::now();
    ObservationStream obs([&window](std::size_t d) {
        if (d >= window.size()) throw DataExhausted("observation window exhausted");
        return window[d];
    });
    ConditionalKernelSource src(model, obs);
    StochasticMatrix forward = StochasticMatrix::identity(s);
    for (std::size_t d = 0; d < n.depth; ++d) forward = src.kernel({d}) * forward;
    out.step1 = cftp(src, n, rng, cutoff);
    out.step1_seconds = seconds_since(t0);
    const auto* start = std::get_if<Coalesced>(&out.step1);
    if (!start) return out;

    // Step 2.
    t0 = std::chrono::steady_clock::now();
    out.samples.resize(count);
    const auto row = forward.row(start->sample);
    for (auto& v : out.samples) v = sample_from(row, rng);
    out.step2_seconds = seconds_since(t0);
    return out;
}

double pairwise_dependence(const ProbVector& pi_n, const StochasticMatrix& forward,
                           const ProbVector& pi_0) {
    const std::size_t s = forward.size();
    if (pi_n.size() != s || pi_0.size() != s) throw DimensionMismatch("pairwise_dependence sizes");
    double acc = 0.0;
    for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t xp = 0; xp < s; ++xp) {
            double joint = 0.0;
            for (std::size_t z = 0; z < s; ++z) joint += pi_n[z] * forward(z, x) * forward(z, xp);
            acc += std::abs(joint - pi_0[x] * pi_0[xp]);
        }
    }
    return 0.5 * acc;
}

double pairwise_dependence(const HmmModel& model, const ObservationWindow& window, TimeIndex n,
                           std::size_t depth_k) {
    const std::size_t needed = n.depth + depth_k;
    if (window.size() < needed) {
        throw DataExhausted("observation window must cover time -" + std::to_string(needed - 1));
    }
    const auto kernels = conditional_kernels(model, window, needed);
    const std::size_t s = model.size();
    const ProbVector pi_n = forward_product(kernels, n.depth, needed, s).row_vector(0);
    const ProbVector pi_0 = forward_product(kernels, 0, depth_k, s).row_vector(0);
    return pairwise_dependence(pi_n, forward_product(kernels, 0, n.depth, s), pi_0);
}

double beta_bound(const MinorizationCertificate& cert, const HmmModel& model,
                  const ObservationWindow& window, TimeIndex n, TimeIndex k) {
    if (k.depth >= n.depth) throw std::invalid_argument("beta_bound needs n < k");
    const std::size_t span = n.depth - k.depth;
    if (span != cert.span_steps) {
        throw std::invalid_argument("certificate span does not match the window");
    }
    const double base = cert.eps_minus / cert.eps_plus;
    if (span == 1) return 1.0 - base;

    if (window.size() < n.depth) throw DataExhausted("observation window too short");
    double ratio = base;
    for (std::size_t d = k.depth; d < n.depth; ++d) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (std::size_t x = 0; x < model.size(); ++x) {
            const double v = model.g({d}, x, window[d]);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(lo > 0.0)) throw std::domain_error("beta_bound needs strictly positive emissions");
        ratio *= lo / hi;
    }
    return 1.0 - ratio;
}

SufficientConditionsReport sufficient_conditions_report(const HmmModel& model,
                                                        const ProbeSettings& probe) {
    SufficientConditionsReport rep;
    const std::size_t s = model.size();

    rep.min_signal_entry = std::numeric_limits<double>::infinity();
    for (std::size_t d = probe.depths.first; d <= probe.depths.last; ++d) {
        rep.min_signal_entry = std::min(rep.min_signal_entry, model.signal.at({d}).min_entry());
    }

    rep.emission_positive_somewhere = true;
    rep.emission_positive_everywhere = true;
    for (std::size_t i = 0; i < probe.observations.size(); ++i) {
        const TimeIndex t{i};
        bool any = false;
        bool all = true;
        for (std::size_t x = 0; x < s; ++x) {
            const bool pos = model.g(t, x, probe.observations[i]) > 0.0;
            any = any || pos;
            all = all && pos;
        }
        rep.emission_positive_somewhere = rep.emission_positive_somewhere && any;
        rep.emission_positive_everywhere = rep.emission_positive_everywhere && all;
    }
    if (probe.observations.empty()) {
        rep.notes.push_back("no observations probed; emission conditions taken from the model");
        rep.emission_positive_everywhere = model.emission->strictly_positive();
        rep.emission_positive_somewhere = rep.emission_positive_everywhere;
    }

    bool every_depth_minorized = true;
    for (std::size_t d = probe.depths.first; d <= probe.depths.last; ++d) {
        std::optional<MinorizationCertificate> found;
        for (std::size_t m = 1; m <= s * s && !found; ++m) {
            found = minorize(backward_product(model.signal, {d + m}, {d}), m);
        }
        if (!found) {
            every_depth_minorized = false;
            rep.notes.push_back("no minorization with m <= s^2 at depth " + std::to_string(d));
        } else if (!rep.certificate) {
            rep.certificate = found;
        }
    }
    if (rep.certificate && rep.certificate->eps_minus < 1e-12) {
        rep.notes.push_back("minorization mass below 1e-12; treat as borderline");
    }

    rep.surely_successful = rep.min_signal_entry > 0.0 && rep.emission_positive_somewhere;
    rep.as_successful_evidence = every_depth_minorized && rep.emission_positive_everywhere;
    return rep;
}

}  // namespace perfsmooth
