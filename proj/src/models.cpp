#include "perfsmooth/models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace perfsmooth {

// ---------------------------------------------------------------------------
// Emission families

GaussianEmission::GaussianEmission(std::vector<double> means, std::vector<double> variances)
    : means_(std::move(means)), variances_(std::move(variances)) {
    if (means_.empty() || means_.size() != variances_.size()) {
        throw DimensionMismatch("gaussian emission needs one mean and variance per state");
    }
    for (double v : variances_) {
        if (!(v > 0.0)) throw std::invalid_argument("gaussian variances must be positive");
    }
}

double GaussianEmission::density(TimeIndex, State x, Observation y) const {
    const double d = y.value - means_.at(x);
    const double var = variances_[x];
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

Observation GaussianEmission::sample(TimeIndex, State x, RngStream& rng) const {
    return {rng.normal(means_.at(x), std::sqrt(variances_[x]))};
}

IndicatorEmission::IndicatorEmission(std::vector<int> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw std::invalid_argument("indicator emission needs labels");
}

double IndicatorEmission::density(TimeIndex, State x, Observation y) const {
    return y.value == static_cast<double>(labels_.at(x)) ? 1.0 : 0.0;
}

Observation IndicatorEmission::sample(TimeIndex, State x, RngStream&) const {
    return {static_cast<double>(labels_.at(x))};
}

TabularEmission::TabularEmission(std::vector<std::vector<double>> table)
    : table_(std::move(table)) {
    if (table_.empty() || table_.front().empty()) throw std::invalid_argument("empty table");
    for (const auto& row : table_) {
        if (row.size() != table_.front().size()) {
            throw DimensionMismatch("emission table rows differ in length");
        }
        ProbVector check(row);  // each row is a law on the alphabet
    }
}

double TabularEmission::density(TimeIndex, State x, Observation y) const {
    const double idx = y.value;
    if (idx < 0.0 || idx != std::floor(idx) || idx >= static_cast<double>(alphabet_size())) {
        return 0.0;
    }
    return table_.at(x)[static_cast<std::size_t>(idx)];
}

Observation TabularEmission::sample(TimeIndex, State x, RngStream& rng) const {
    return {static_cast<double>(sample_from(table_.at(x), rng))};
}

bool TabularEmission::strictly_positive() const {
    for (const auto& row : table_) {
        for (double v : row) {
            if (!(v > 0.0)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Builders

NamedModel degenerate_rotation() {
    std::vector<std::vector<double>> rows(4, std::vector<double>(4, 0.0));
    for (std::size_t x = 0; x < 4; ++x) {
        rows[x][x] = 0.5;
        rows[x][(x + 3) % 4] = 0.5;
    }
    HmmModel model(KernelSequence::homogeneous(StochasticMatrix(rows)),
                   std::make_shared<IndicatorEmission>(std::vector<int>{0, 1, 0, 1}),
                   ProbVector::uniform(4));
    return {{"degenerate_rotation", {}, {"0", "1", "2", "3"}}, std::move(model)};
}

std::vector<ProbVector> degenerate_absolute_probs(double w, const ObservationWindow& y,
                                                  std::size_t depth) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("w must lie in [0, 1]");
    if (y.size() < depth + 1) throw DataExhausted("observation window too short");
    auto parity = [&y](std::size_t d) {
        const double v = y[d].value;
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("observations must be binary");
        return static_cast<std::size_t>(v);
    };

    const NamedModel rot = degenerate_rotation();
    const auto kernels = conditional_kernels(rot.model, y, depth + 1);

    std::vector<ProbVector> out;
    out.reserve(depth + 1);
    const std::size_t y0 = parity(0);
    std::vector<double> pi0(4, 0.0);
    pi0[y0] = w;
    pi0[y0 + 2] = 1.0 - w;
    out.emplace_back(pi0);

    // pi_{n-1} lives on A_{n-1} = {a, a+2}; pi_n on A_n = {b, b+2}. Solve the
    // 2x2 system pi_n(b_j) = sum_i pi_{n-1}(a_i) M^y_n(a_i, b_j).
    for (std::size_t d = 0; d < depth; ++d) {
        const StochasticMatrix& m = kernels[d];
        const std::size_t b = parity(d);
        const std::size_t a = parity(d + 1);
        const double m00 = m(a, b), m01 = m(a, b + 2);
        const double m10 = m(a + 2, b), m11 = m(a + 2, b + 2);
        const double det = m00 * m11 - m10 * m01;
        if (det == 0.0) throw std::runtime_error("singular absolute-probability recursion");
        const ProbVector& cur = out.back();
        const double rb = cur[b], rb2 = cur[b + 2];
        std::vector<double> prev(4, 0.0);
        prev[a] = (rb * m11 - rb2 * m10) / det;
        prev[a + 2] = (rb2 * m00 - rb * m01) / det;
        out.emplace_back(prev);
    }
    return out;
}

NamedModel reducible_block(std::shared_ptr<const EmissionModel> emission) {
    if (!emission) {
        emission = std::make_shared<GaussianEmission>(std::vector<double>{0.0, 1.0, 2.0, 3.0},
                                                      std::vector<double>(4, 1.0));
    }
    if (!emission->strictly_positive()) {
        throw std::invalid_argument("reducible_block needs strictly positive emissions");
    }
    const std::vector<std::vector<double>> rows = {{0.5, 0.5, 0.0, 0.0},
                                                   {0.5, 0.5, 0.0, 0.0},
                                                   {0.0, 0.0, 0.5, 0.5},
                                                   {0.0, 0.0, 0.5, 0.5}};
    HmmModel model(KernelSequence::homogeneous(StochasticMatrix(rows)), std::move(emission),
                   ProbVector({0.5, 0.5, 0.0, 0.0}));
    return {{"reducible_block", {}, {"0", "1", "2", "3"}}, std::move(model)};
}

NamedModel gaussian_three_state(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    const std::vector<std::vector<double>> rows = {{1.0 - delta, delta, 0.0},
                                                   {delta / 2.0, 1.0 - delta, delta / 2.0},
                                                   {0.0, delta, 1.0 - delta}};
    HmmModel model(KernelSequence::homogeneous(StochasticMatrix(rows)),
                   std::make_shared<GaussianEmission>(std::vector<double>{0.0, 1.0, 0.0},
                                                      std::vector<double>(3, 1.0)),
                   ProbVector({0.25, 0.5, 0.25}));
    return {{"gaussian_three_state", {{"delta", delta}}, {"1", "2", "3"}}, std::move(model)};
}

NamedModel flat_signal(std::size_t s, std::shared_ptr<const EmissionModel> emission) {
    HmmModel model(KernelSequence::homogeneous(StochasticMatrix::flat(s)), std::move(emission),
                   ProbVector::uniform(s));
    std::vector<std::string> labels;
    for (std::size_t x = 0; x < s; ++x) labels.push_back(std::to_string(x));
    return {{"flat_signal", {{"states", static_cast<double>(s)}}, labels}, std::move(model)};
}

// ---------------------------------------------------------------------------
// Simulation

SimulatedPath simulate_hmm(const HmmModel& model, std::size_t depth_k, RngStream rng) {
    if (!model.invariant_dist) throw std::invalid_argument("simulate_hmm needs an invariant law");
    if (!model.emission->has_sampler()) {
        throw UnsupportedOperation("simulate_hmm needs an emission sampler");
    }
    SimulatedPath path;
    path.seed = rng.seed();
    path.states.resize(depth_k + 1);
    path.observations.resize(depth_k + 1);

    State x = sample_from(model.invariant_dist->weights(), rng);
    for (std::size_t d = depth_k + 1; d-- > 0;) {
        if (d != depth_k) x = sample_from(model.signal.at({d}).row(x), rng);
        path.states[d] = x;
        path.observations[d] = model.emission->sample({d}, x, rng);
    }
    return path;
}

ObservationStream random_walk_obs(double sigma2, RngStream rng) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    const double sd = std::sqrt(sigma2);
    double level = 0.0;
    return ObservationStream([rng, sd, level](std::size_t d) mutable {
        if (d > 0) level += rng.normal(0.0, sd);
        return Observation{level};
    });
}

ObservationStream drift_obs(double slope, double sigma2, RngStream rng) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    const double sd = std::sqrt(sigma2);
    return ObservationStream([rng, sd, slope](std::size_t d) mutable {
        return Observation{slope * -static_cast<double>(d) + rng.normal(0.0, sd)};
    });
}

ObservationWindow materialize(ObservationStream& stream, std::size_t length) {
    if (length > 0) stream.pull({length - 1});
    return ObservationWindow(stream.pulled().begin(), stream.pulled().begin() + length);
}

}  // namespace perfsmooth
