#include "perfsmooth/coupling.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <string>

namespace perfsmooth {

ComposedMap ComposedMap::identity(std::size_t s) {
    ComposedMap m;
    m.image.resize(s);
    for (std::size_t x = 0; x < s; ++x) m.image[x] = x;
    return m;
}

State sample_from(std::span<const double> row, RngStream& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    State last_positive = 0;
    for (std::size_t z = 0; z < row.size(); ++z) {
        if (row[z] <= 0.0) continue;
        cum += row[z];
        last_positive = z;
        if (u < cum) return z;
    }
    // Rounding left u above the accumulated mass.
    return last_positive;
}

RandomMap sample_random_map(const StochasticMatrix& k, RngStream& rng) {
    RandomMap m;
    m.image.resize(k.size());
    for (std::size_t x = 0; x < k.size(); ++x) m.image[x] = sample_from(k.row(x), rng);
    return m;
}

ComposedMap compose(const RandomMap& newer_step, const ComposedMap& existing) {
    const std::size_t s = existing.image.size();
    if (newer_step.image.size() != s) throw DimensionMismatch("composing maps of different sizes");
    ComposedMap out;
    out.image.resize(s);
    for (std::size_t x = 0; x < s; ++x) out.image[x] = existing.image[newer_step.image[x]];
    out.span = existing.span + 1;
    return out;
}

bool is_coalesced(const ComposedMap& m) {
    for (State v : m.image) {
        if (v != m.image.front()) return false;
    }
    return !m.image.empty();
}

CouplingTrace cftp_trace(KernelSource& src, TimeIndex target, RngStream& rng,
                         std::size_t cutoff) {
    if (cutoff == 0) throw std::invalid_argument("cutoff must be at least 1");
    CouplingTrace trace{CutoffExceeded{cutoff}, ComposedMap::identity(src.size())};
    for (std::size_t j = 0; j < cutoff; ++j) {
        const StochasticMatrix k = src.kernel(target.earlier(j));
        trace.map = compose(sample_random_map(k, rng), trace.map);
        if (is_coalesced(trace.map)) {
            // Every start state agrees; report the image of state 0.
            assert(std::all_of(trace.map.image.begin(), trace.map.image.end(),
                               [&](State x) { return x == trace.map.image[0]; }));
            trace.outcome = Coalesced{trace.map.image[0], j + 1, j + 1};
            return trace;
        }
    }
    return trace;
}

CouplingOutcome cftp(KernelSource& src, TimeIndex target, RngStream& rng, std::size_t cutoff) {
    return cftp_trace(src, target, rng, cutoff).outcome;
}

// ---------------------------------------------------------------------------
// Exact oracle over E^E.

namespace {

std::size_t ipow(std::size_t b, std::size_t e) {
    std::size_t r = 1;
    while (e--) r *= b;
    return r;
}

// Functions E -> E are encoded base s with image[0] as the least digit.
void decode(std::size_t code, std::size_t s, std::vector<State>& image) {
    for (std::size_t x = 0; x < s; ++x) {
        image[x] = code % s;
        code /= s;
    }
}

}  // namespace

std::vector<double> exact_coalescence_cdf(const KernelSequence& seq, TimeIndex target,
                                          std::size_t max_depth) {
    const std::size_t s = seq.size();
    if (s > kMaxOracleStates) {
        throw std::invalid_argument("exact coalescence oracle supports at most " +
                                    std::to_string(kMaxOracleStates) + " states");
    }
    const std::size_t nfun = ipow(s, s);
    std::vector<std::size_t> place(s);
    for (std::size_t x = 0; x < s; ++x) place[x] = ipow(s, x);

    // Law of the current composed map restricted to non-coalesced functions;
    // coalesced mass is absorbing and tracked separately.
    std::vector<double> law(nfun, 0.0);
    std::size_t id_code = 0;
    for (std::size_t x = 0; x < s; ++x) id_code += x * place[x];
    law[id_code] = 1.0;

    std::vector<double> cdf;
    cdf.reserve(max_depth);
    double coalesced_mass = (s == 1) ? 1.0 : 0.0;
    if (s == 1) law[id_code] = 0.0;

    std::vector<State> f(s), g(s);
    std::vector<double> q(s * s);  // q[x*s + v] = P(new(x) = v | old = f)
    std::vector<double> next(nfun);
    for (std::size_t j = 0; j < max_depth; ++j) {
        const StochasticMatrix k = seq.at(target.earlier(j));
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t code = 0; code < nfun; ++code) {
            const double p = law[code];
            if (p == 0.0) continue;
            decode(code, s, f);
            std::fill(q.begin(), q.end(), 0.0);
            for (std::size_t x = 0; x < s; ++x) {
                for (std::size_t z = 0; z < s; ++z) q[x * s + f[z]] += k(x, z);
            }
            for (std::size_t ncode = 0; ncode < nfun; ++ncode) {
                decode(ncode, s, g);
                double w = p;
                for (std::size_t x = 0; x < s && w > 0.0; ++x) w *= q[x * s + g[x]];
                if (w == 0.0) continue;
                bool constant = true;
                for (std::size_t x = 1; x < s; ++x) constant = constant && g[x] == g[0];
                if (constant) {
                    coalesced_mass += w;
                } else {
                    next[ncode] += w;
                }
            }
        }
        law.swap(next);
        cdf.push_back(coalesced_mass);
    }
    return cdf;
}

}  // namespace perfsmooth
