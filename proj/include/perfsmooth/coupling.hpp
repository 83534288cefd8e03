#pragma once

// Random maps, their backward compositions, and coupling from the past over
// independent random maps.

#include <cstddef>
#include <variant>
#include <vector>

#include "perfsmooth/chain_core.hpp"
#include "perfsmooth/rng.hpp"

namespace perfsmooth {

using State = std::size_t;

/// One sampled map E -> E; image[x] is the successor of x.
struct RandomMap {
    std::vector<State> image;
};

/// Composition of `span` consecutive single-step maps.
struct ComposedMap {
    std::vector<State> image;
    std::size_t span = 0;

    static ComposedMap identity(std::size_t s);
};

struct Coalesced {
    State sample = 0;
    std::size_t coalescence_depth = 0;  ///< number of maps composed, k - T_k
    std::size_t steps_used = 0;
};

struct CutoffExceeded {
    std::size_t cutoff = 0;
};

using CouplingOutcome = std::variant<Coalesced, CutoffExceeded>;

inline bool coalesced(const CouplingOutcome& o) { return std::holds_alternative<Coalesced>(o); }

/// Draws image[x] ~ K(x, .) by inverse CDF, consuming one uniform per state in
/// order x = 0, ..., s-1.
RandomMap sample_random_map(const StochasticMatrix& k, RngStream& rng);

/// Inverse-CDF draw of a single state from `row`.
State sample_from(std::span<const double> row, RngStream& rng);

/// result.image[x] = existing.image[newer_step.image[x]].
ComposedMap compose(const RandomMap& newer_step, const ComposedMap& existing);

bool is_coalesced(const ComposedMap& m);

/// Bookkeeping for a coupling run, for callers that need the final map.
struct CouplingTrace {
    CouplingOutcome outcome;
    ComposedMap map;  ///< Phi_{n-j, n} after the last step taken
};

/// Coupling from the past targeting time n. Extends backward one step at a
/// time, sampling exactly one fresh map per depth, and gives up after
/// `cutoff` maps; the trace then holds Phi_{n-cutoff, n}.
CouplingTrace cftp_trace(KernelSource& src, TimeIndex target, RngStream& rng,
                         std::size_t cutoff);

CouplingOutcome cftp(KernelSource& src, TimeIndex target, RngStream& rng, std::size_t cutoff);

/// Exact law of the coalescence time, computed by propagating the
/// distribution of Phi_{n-j,n} over the function space E^E. Entry j-1 holds
/// Q(T_n >= n - j), the probability of coalescence within j maps.
std::vector<double> exact_coalescence_cdf(const KernelSequence& seq, TimeIndex target,
                                          std::size_t max_depth);

inline constexpr std::size_t kMaxOracleStates = 5;

}  // namespace perfsmooth
