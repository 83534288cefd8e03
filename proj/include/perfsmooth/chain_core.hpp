#pragma once

// Probability vectors, row-stochastic matrices, backward products and the
// ergodicity diagnostics used throughout the library.
//
// Time convention: the chains live on the nonpositive integers and are only
// ever walked backward from 0, so every time index is stored as a
// nonnegative depth d standing for time -d.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace perfsmooth {

inline constexpr double kAlgebraicTol = 1e-12;

/// A point on the nonpositive time axis, stored as its depth below 0.
struct TimeIndex {
    std::size_t depth = 0;

    static TimeIndex at_time(std::int64_t n);
    std::int64_t time() const { return -static_cast<std::int64_t>(depth); }

    /// One step further into the past.
    TimeIndex earlier(std::size_t steps = 1) const { return {depth + steps}; }

    auto operator<=>(const TimeIndex&) const = default;
};

/// Inclusive range of depths [first, last].
struct DepthRange {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t count() const { return last - first + 1; }
};

class DimensionMismatch : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ProbVector {
  public:
    ProbVector() = default;
    /// Validates nonnegativity and unit mass within kAlgebraicTol.
    explicit ProbVector(std::vector<double> weights);

    /// Scales a nonnegative, non-null vector to unit mass.
    static ProbVector normalized(std::vector<double> weights);
    static ProbVector uniform(std::size_t s);
    static ProbVector point_mass(std::size_t s, std::size_t x);

    std::size_t size() const { return weights_.size(); }
    double operator[](std::size_t x) const { return weights_[x]; }
    std::span<const double> weights() const { return weights_; }
    const std::vector<double>& values() const { return weights_; }

  private:
    std::vector<double> weights_;
};

/// Dense s x s row-stochastic matrix, row-major.
class StochasticMatrix {
  public:
    StochasticMatrix() = default;
    explicit StochasticMatrix(const std::vector<std::vector<double>>& rows);

    static StochasticMatrix identity(std::size_t s);
    /// Every row uniform.
    static StochasticMatrix flat(std::size_t s);
    /// Every row equal to `row`.
    static StochasticMatrix rank_one(const ProbVector& row);
    /// Row-major entries. Rows must sum to 1 within kAlgebraicTol unless
    /// `repair_drift`, in which case larger drift is renormalized and logged.
    static StochasticMatrix from_entries(std::size_t s, std::vector<double> entries,
                                         bool repair_drift = false);

    std::size_t size() const { return size_; }
    double operator()(std::size_t x, std::size_t z) const { return entries_[x * size_ + z]; }
    std::span<const double> row(std::size_t x) const {
        return {entries_.data() + x * size_, size_};
    }
    ProbVector row_vector(std::size_t x) const;
    const std::vector<double>& entries() const { return entries_; }

    double min_entry() const;
    double max_row_sum_error() const;

    friend StochasticMatrix operator*(const StochasticMatrix& a, const StochasticMatrix& b);
    bool operator==(const StochasticMatrix&) const = default;

  private:
    std::size_t size_ = 0;
    std::vector<double> entries_;
};

/// K^m, with K^0 the identity.
StochasticMatrix matrix_power(const StochasticMatrix& k, std::size_t m);

/// Row vector times matrix, mu K.
ProbVector propagate(const ProbVector& mu, const StochasticMatrix& k);

/// Any time-indexed source of transition kernels. M at depth d is the kernel
/// from time -d-1 to time -d.
class KernelSource {
  public:
    virtual ~KernelSource() = default;
    virtual std::size_t size() const = 0;
    virtual StochasticMatrix kernel(TimeIndex n) = 0;
};

/// A pure, immutable kernel sequence. Copies share the underlying function.
class KernelSequence final : public KernelSource {
  public:
    using Generator = std::function<StochasticMatrix(TimeIndex)>;

    KernelSequence(std::size_t s, Generator gen);

    static KernelSequence homogeneous(StochasticMatrix k);
    /// kernels[d] is the kernel at depth d; querying beyond the end throws.
    static KernelSequence window(std::vector<StochasticMatrix> kernels);

    std::size_t size() const override { return size_; }
    StochasticMatrix kernel(TimeIndex n) override { return at(n); }
    StochasticMatrix at(TimeIndex n) const;

  private:
    std::size_t size_;
    std::shared_ptr<const Generator> gen_;
};

struct MinorizationCertificate {
    double eps_minus = 0.0;
    double eps_plus = 0.0;
    ProbVector nu;
    std::size_t span_steps = 1;

    /// eps_minus nu(x') <= p(x,x') <= eps_plus nu(x') for all x, x'.
    bool verify(const StochasticMatrix& p, double tol = kAlgebraicTol) const;
};

struct AbsoluteProbabilityCheck {
    bool ok = false;
    double max_residual = 0.0;
};

double total_variation(std::span<const double> mu, std::span<const double> nu);
inline double total_variation(const ProbVector& mu, const ProbVector& nu) {
    return total_variation(mu.weights(), nu.weights());
}

/// beta(K) = 1 - min over row pairs of sum_z min{K(x,z), K(x',z)}.
double dobrushin(const StochasticMatrix& k);

/// M_{n,k} = M_{n+1} ... M_k; identity whenever k <= n (that is, whenever
/// k.depth >= n.depth).
StochasticMatrix backward_product(const KernelSequence& seq, TimeIndex n, TimeIndex k);

/// Max over depths d in `window` of ||pi(d+1) M(d) - pi(d)|| (total variation).
AbsoluteProbabilityCheck check_absolute_probabilities(
    const KernelSequence& seq, const std::function<ProbVector(TimeIndex)>& pi,
    DepthRange window, double tol = kAlgebraicTol);

/// sum_{x'} min_x M(x,x'), the Doeblin mass of a single kernel.
double doeblin_mass(const StochasticMatrix& k);

/// Minimum of doeblin_mass over the window.
double stenflo_coefficient(const KernelSequence& seq, DepthRange window);

/// Terms 1 - beta(M_{n_{i+1}, n_i}) for consecutive checkpoints, which must
/// start at depth 0 and strictly increase in depth.
std::vector<double> weak_ergodicity_series(const KernelSequence& seq,
                                           const std::vector<TimeIndex>& checkpoints);

/// Column-minimum minorization of K^m. Returns nullopt when some column
/// minimum structure gives zero mass (exact zero test).
std::optional<MinorizationCertificate> find_minorization(const StochasticMatrix& k,
                                                         std::size_t m);

/// Same construction applied directly to an already-formed m-step kernel.
std::optional<MinorizationCertificate> minorize(const StochasticMatrix& p,
                                                std::size_t span_steps);

}  // namespace perfsmooth
