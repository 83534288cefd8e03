#include "perfsmooth/chain_core.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>

namespace perfsmooth {

namespace {

void check_weights(std::span<const double> w) {
    double sum = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("probability weights must be finite and nonnegative");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kAlgebraicTol) {
        throw std::invalid_argument("probability weights sum to " + std::to_string(sum));
    }
}

}  // namespace

TimeIndex TimeIndex::at_time(std::int64_t n) {
    if (n > 0) throw std::invalid_argument("times are nonpositive");
    return {static_cast<std::size_t>(-n)};
}

// ---------------------------------------------------------------------------
// ProbVector

ProbVector::ProbVector(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw std::invalid_argument("empty probability vector");
    check_weights(weights_);
}

ProbVector ProbVector::normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double v : weights) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("cannot normalize negative or non-finite weights");
        }
        sum += v;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("cannot normalize a null vector");
    for (double& v : weights) v /= sum;
    return ProbVector(std::move(weights));
}

ProbVector ProbVector::uniform(std::size_t s) {
    return ProbVector(std::vector<double>(s, 1.0 / static_cast<double>(s)));
}

ProbVector ProbVector::point_mass(std::size_t s, std::size_t x) {
    std::vector<double> w(s, 0.0);
    w.at(x) = 1.0;
    return ProbVector(std::move(w));
}

// ---------------------------------------------------------------------------
// StochasticMatrix

StochasticMatrix::StochasticMatrix(const std::vector<std::vector<double>>& rows)
    : size_(rows.size()) {
    if (size_ == 0) throw std::invalid_argument("empty matrix");
    entries_.reserve(size_ * size_);
    for (const auto& r : rows) {
        if (r.size() != size_) throw DimensionMismatch("matrix must be square");
        check_weights(r);
        entries_.insert(entries_.end(), r.begin(), r.end());
    }
}

StochasticMatrix StochasticMatrix::identity(std::size_t s) {
    std::vector<double> e(s * s, 0.0);
    for (std::size_t x = 0; x < s; ++x) e[x * s + x] = 1.0;
    return from_entries(s, std::move(e));
}

StochasticMatrix StochasticMatrix::flat(std::size_t s) {
    return rank_one(ProbVector::uniform(s));
}

StochasticMatrix StochasticMatrix::rank_one(const ProbVector& row) {
    const std::size_t s = row.size();
    std::vector<double> e;
    e.reserve(s * s);
    for (std::size_t x = 0; x < s; ++x) e.insert(e.end(), row.values().begin(), row.values().end());
    return from_entries(s, std::move(e));
}

StochasticMatrix StochasticMatrix::from_entries(std::size_t s, std::vector<double> entries,
                                                bool repair_drift) {
    if (s == 0 || entries.size() != s * s) throw DimensionMismatch("entries must hold s*s values");
    for (std::size_t x = 0; x < s; ++x) {
        double sum = 0.0;
        for (std::size_t z = 0; z < s; ++z) {
            double v = entries[x * s + z];
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw std::invalid_argument("kernel entries must be finite and nonnegative");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > kAlgebraicTol) {
            if (!repair_drift || !(sum > 0.0)) {
                throw std::invalid_argument("row " + std::to_string(x) + " sums to " +
                                            std::to_string(sum));
            }
            std::clog << "perfsmooth: renormalizing row " << x << " (drift " << (sum - 1.0)
                      << ")\n";
            for (std::size_t z = 0; z < s; ++z) entries[x * s + z] /= sum;
        }
    }
    StochasticMatrix m;
    m.size_ = s;
    m.entries_ = std::move(entries);
    return m;
}

ProbVector StochasticMatrix::row_vector(std::size_t x) const {
    auto r = row(x);
    return ProbVector(std::vector<double>(r.begin(), r.end()));
}

double StochasticMatrix::min_entry() const {
    return *std::min_element(entries_.begin(), entries_.end());
}

double StochasticMatrix::max_row_sum_error() const {
    double worst = 0.0;
    for (std::size_t x = 0; x < size_; ++x) {
        auto r = row(x);
        worst = std::max(worst, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0));
    }
    return worst;
}

StochasticMatrix operator*(const StochasticMatrix& a, const StochasticMatrix& b) {
    const std::size_t s = a.size();
    if (b.size() != s) throw DimensionMismatch("matrix product of different sizes");
    std::vector<double> c(s * s, 0.0);
    for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t z = 0; z < s; ++z) {
            const double axz = a(x, z);
            if (axz == 0.0) continue;
            for (std::size_t y = 0; y < s; ++y) c[x * s + y] += axz * b(z, y);
        }
    }
    return StochasticMatrix::from_entries(s, std::move(c), /*repair_drift=*/true);
}

StochasticMatrix matrix_power(const StochasticMatrix& k, std::size_t m) {
    StochasticMatrix out = StochasticMatrix::identity(k.size());
    for (std::size_t i = 0; i < m; ++i) out = out * k;
    return out;
}

ProbVector propagate(const ProbVector& mu, const StochasticMatrix& k) {
    const std::size_t s = k.size();
    if (mu.size() != s) throw DimensionMismatch("vector and kernel sizes differ");
    std::vector<double> out(s, 0.0);
    for (std::size_t x = 0; x < s; ++x) {
        if (mu[x] == 0.0) continue;
        for (std::size_t y = 0; y < s; ++y) out[y] += mu[x] * k(x, y);
    }
    return ProbVector::normalized(std::move(out));
}

// ---------------------------------------------------------------------------
// KernelSequence

KernelSequence::KernelSequence(std::size_t s, Generator gen)
    : size_(s), gen_(std::make_shared<const Generator>(std::move(gen))) {
    if (s == 0) throw std::invalid_argument("empty state space");
}

KernelSequence KernelSequence::homogeneous(StochasticMatrix k) {
    const std::size_t s = k.size();
    return KernelSequence(s, [k = std::move(k)](TimeIndex) { return k; });
}

KernelSequence KernelSequence::window(std::vector<StochasticMatrix> kernels) {
    if (kernels.empty()) throw std::invalid_argument("empty kernel window");
    const std::size_t s = kernels.front().size();
    for (const auto& k : kernels) {
        if (k.size() != s) throw DimensionMismatch("kernel window mixes sizes");
    }
    auto shared = std::make_shared<const std::vector<StochasticMatrix>>(std::move(kernels));
    return KernelSequence(s, [shared](TimeIndex n) {
        if (n.depth >= shared->size()) {
            throw std::out_of_range("kernel window has no entry at depth " +
                                    std::to_string(n.depth));
        }
        return (*shared)[n.depth];
    });
}

StochasticMatrix KernelSequence::at(TimeIndex n) const {
    StochasticMatrix k = (*gen_)(n);
    if (k.size() != size_) throw DimensionMismatch("kernel sequence produced a wrong-size matrix");
    return k;
}

// ---------------------------------------------------------------------------
// Diagnostics

double total_variation(std::span<const double> mu, std::span<const double> nu) {
    if (mu.size() != nu.size()) throw DimensionMismatch("total variation of different lengths");
    double acc = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) acc += std::abs(mu[x] - nu[x]);
    return 0.5 * acc;
}

double dobrushin(const StochasticMatrix& k) {
    const std::size_t s = k.size();
    double min_overlap = 1.0;
    for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t xp = x + 1; xp < s; ++xp) {
            double overlap = 0.0;
            for (std::size_t z = 0; z < s; ++z) overlap += std::min(k(x, z), k(xp, z));
            min_overlap = std::min(min_overlap, overlap);
        }
    }
    return std::clamp(1.0 - min_overlap, 0.0, 1.0);
}

StochasticMatrix backward_product(const KernelSequence& seq, TimeIndex n, TimeIndex k) {
    StochasticMatrix out = StochasticMatrix::identity(seq.size());
    // M_{n+1} is at depth n.depth-1; the product runs forward in time.
    for (std::size_t d = n.depth; d > k.depth; --d) out = out * seq.at({d - 1});
    return out;
}

AbsoluteProbabilityCheck check_absolute_probabilities(
    const KernelSequence& seq, const std::function<ProbVector(TimeIndex)>& pi,
    DepthRange window, double tol) {
    if (window.last < window.first) throw std::invalid_argument("empty window");
    AbsoluteProbabilityCheck out;
    for (std::size_t d = window.first; d <= window.last; ++d) {
        const ProbVector prev = pi({d + 1});
        const ProbVector cur = pi({d});
        const StochasticMatrix m = seq.at({d});
        std::vector<double> pushed(seq.size(), 0.0);
        for (std::size_t x = 0; x < seq.size(); ++x) {
            for (std::size_t y = 0; y < seq.size(); ++y) pushed[y] += prev[x] * m(x, y);
        }
        out.max_residual = std::max(out.max_residual, total_variation(pushed, cur.weights()));
    }
    out.ok = out.max_residual <= tol;
    return out;
}

double doeblin_mass(const StochasticMatrix& k) {
    const std::size_t s = k.size();
    double mass = 0.0;
    for (std::size_t z = 0; z < s; ++z) {
        double col_min = k(0, z);
        for (std::size_t x = 1; x < s; ++x) col_min = std::min(col_min, k(x, z));
        mass += col_min;
    }
    return mass;
}

double stenflo_coefficient(const KernelSequence& seq, DepthRange window) {
    if (window.last < window.first) throw std::invalid_argument("empty window");
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t d = window.first; d <= window.last; ++d) {
        c = std::min(c, doeblin_mass(seq.at({d})));
    }
    return c;
}

std::vector<double> weak_ergodicity_series(const KernelSequence& seq,
                                           const std::vector<TimeIndex>& checkpoints) {
    if (checkpoints.empty() || checkpoints.front().depth != 0) {
        throw std::invalid_argument("checkpoints must start at time 0");
    }
    std::vector<double> terms;
    terms.reserve(checkpoints.size());
    for (std::size_t i = 0; i + 1 < checkpoints.size(); ++i) {
        if (checkpoints[i + 1].depth <= checkpoints[i].depth) {
            throw std::invalid_argument("checkpoints must be strictly decreasing in time");
        }
        terms.push_back(1.0 - dobrushin(backward_product(seq, checkpoints[i + 1], checkpoints[i])));
    }
    return terms;
}

bool MinorizationCertificate::verify(const StochasticMatrix& p, double tol) const {
    if (!(eps_minus > 0.0) || eps_minus > eps_plus || nu.size() != p.size()) return false;
    for (std::size_t x = 0; x < p.size(); ++x) {
        for (std::size_t z = 0; z < p.size(); ++z) {
            if (eps_minus * nu[z] > p(x, z) + tol) return false;
            if (p(x, z) > eps_plus * nu[z] + tol) return false;
        }
    }
    return true;
}

std::optional<MinorizationCertificate> minorize(const StochasticMatrix& p,
                                                std::size_t span_steps) {
    const std::size_t s = p.size();
    std::vector<double> col_min(s);
    for (std::size_t z = 0; z < s; ++z) {
        col_min[z] = p(0, z);
        for (std::size_t x = 1; x < s; ++x) col_min[z] = std::min(col_min[z], p(x, z));
    }
    const double eps_minus = std::accumulate(col_min.begin(), col_min.end(), 0.0);
    if (eps_minus == 0.0) return std::nullopt;

    MinorizationCertificate cert;
    cert.eps_minus = eps_minus;
    cert.nu = ProbVector::normalized(col_min);
    cert.span_steps = span_steps;
    // The upper bound needs every column of p to sit on the support of nu.
    double eps_plus = 0.0;
    for (std::size_t z = 0; z < s; ++z) {
        for (std::size_t x = 0; x < s; ++x) {
            if (cert.nu[z] > 0.0) {
                eps_plus = std::max(eps_plus, p(x, z) / cert.nu[z]);
            } else if (p(x, z) > 0.0) {
                return std::nullopt;
            }
        }
    }
    cert.eps_plus = eps_plus;
    if (!cert.verify(p)) return std::nullopt;
    return cert;
}

std::optional<MinorizationCertificate> find_minorization(const StochasticMatrix& k,
                                                         std::size_t m) {
    if (m == 0) throw std::invalid_argument("minorization span must be positive");
    return minorize(matrix_power(k, m), m);
}

}  // namespace perfsmooth
