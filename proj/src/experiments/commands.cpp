#include "perfsmooth/experiments/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <memory>
#include <numeric>

#include "perfsmooth/experiments/output.hpp"

namespace perfsmooth::experiments {

using nlohmann::json;

const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::coalesced: return "coalesced";
        case RunStatus::cutoff_exceeded: return "cutoff_exceeded";
        case RunStatus::data_exhausted: return "data_exhausted";
    }
    return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

RunRecord record_from(std::size_t r, const CouplingOutcome& o) {
    RunRecord rec;
    rec.replicate = r;
    if (const auto* c = std::get_if<Coalesced>(&o)) {
        rec.status = RunStatus::coalesced;
        rec.coalescence_depth = c->coalescence_depth;
        rec.sample = c->sample;
    } else {
        rec.status = RunStatus::cutoff_exceeded;
    }
    return rec;
}

json quantiles(std::vector<std::size_t> depths) {
    if (depths.empty()) return nullptr;
    std::sort(depths.begin(), depths.end());
    auto q = [&](double p) {
        const auto idx = static_cast<std::size_t>(std::ceil(p * depths.size())) - 1;
        return depths[std::min(idx, depths.size() - 1)];
    };
    return {{"min", depths.front()}, {"q50", q(0.5)}, {"q90", q(0.9)},
            {"q99", q(0.99)},        {"max", depths.back()}};
}

// Observations pulled from a shared, fixed realization.
ObservationStream stream_over(std::shared_ptr<const ObservationWindow> w) {
    return ObservationStream([w](std::size_t d) {
        if (d >= w->size()) {
            throw DataExhausted("observation record ends at time -" + std::to_string(w->size() - 1) +
                                "; use a longer record or the finite-window sampler");
        }
        return (*w)[d];
    });
}

const HmmModel& require_hmm(const ResolvedModel& m, const char* what) {
    if (!m.hmm) throw ConfigError(std::string(what) + " needs a model with emissions");
    return *m.hmm;
}

const DataSource& require_data(const ExperimentConfig& cfg, const char* what) {
    if (cfg.data.empty() || cfg.data.front().kind == DataKind::none) {
        throw ConfigError(std::string(what) + " needs a data source");
    }
    return cfg.data.front();
}

}  // namespace

// ---------------------------------------------------------------------------
// sample

SampleResult run_sample(const ExperimentConfig& cfg) {
    const ResolvedModel model = build_model(cfg.model);
    const RngStream root(cfg.seed);
    const TimeIndex target{cfg.target_depth};
    const bool use_hmm = model.hmm && !cfg.data.empty() && cfg.data.front().kind != DataKind::none;
    if (model.hmm && !use_hmm) throw ConfigError("a model with emissions needs a data source");

    std::vector<RunRecord> records;
    if (use_hmm) {
        const Dataset data = load_dataset(cfg.data.front(), *model.hmm, cfg.seed,
                                          cfg.cutoff + cfg.target_depth + 1);
        auto window = std::make_shared<const ObservationWindow>(data.observations);
        const HmmModel& hmm = *model.hmm;
        records = parallel_replicates<RunRecord>(cfg.replicates, cfg.workers, [&](std::size_t r) {
            const auto t0 = Clock::now();
            RngStream rng = root.substream(r);
            ObservationStream obs = stream_over(window);
            RunRecord rec;
            try {
                const HmmCouplingResult res = hmm_cftp(hmm, obs, target, rng, cfg.cutoff);
                rec = record_from(r, res.outcome);
                rec.observations_consumed = res.observations_consumed;
            } catch (const DataExhausted&) {
                rec.replicate = r;
                rec.status = RunStatus::data_exhausted;
                rec.observations_consumed = obs.pulls_made();
            }
            rec.seconds = seconds_since(t0);
            return rec;
        });
    } else {
        const KernelSequence& seq = model.signal;
        records = parallel_replicates<RunRecord>(cfg.replicates, cfg.workers, [&](std::size_t r) {
            const auto t0 = Clock::now();
            RngStream rng = root.substream(r);
            KernelSequence local = seq;
            RunRecord rec = record_from(r, cftp(local, target, rng, cfg.cutoff));
            rec.seconds = seconds_since(t0);
            return rec;
        });
    }

    SampleResult res;
    res.records = std::move(records);
    res.sample_law.assign(model.signal.size(), 0.0);
    std::vector<std::size_t> depths;
    for (const auto& rec : res.records) {
        switch (rec.status) {
            case RunStatus::coalesced:
                ++res.coalesced;
                res.sample_law[rec.sample] += 1.0;
                depths.push_back(rec.coalescence_depth);
                break;
            case RunStatus::cutoff_exceeded: ++res.cutoff_failures; break;
            case RunStatus::data_exhausted: ++res.data_exhausted; break;
        }
    }
    if (res.coalesced > 0) {
        for (double& v : res.sample_law) v /= static_cast<double>(res.coalesced);
    }
    res.failure_fraction =
        static_cast<double>(res.cutoff_failures) / static_cast<double>(cfg.replicates);

    json& s = res.summary;
    s["schema"] = "perfsmooth/sample-summary/v" + std::to_string(kSchemaVersion);
    s["config_hash"] = config_hash(cfg.effective);
    s["name"] = cfg.name;
    s["model"] = model.spec.name;
    s["label_map"] = model.spec.label_map;
    s["target_time"] = target.time();
    s["replicates"] = cfg.replicates;
    s["cutoff"] = cfg.cutoff;
    s["coalesced"] = res.coalesced;
    s["cutoff_failures"] = res.cutoff_failures;
    s["failure_fraction"] = res.failure_fraction;
    s["data_exhausted"] = res.data_exhausted;
    s["sample_law"] = res.sample_law;
    s["coalescence_depth_quantiles"] = quantiles(depths);
    if (res.data_exhausted > 0) {
        s["warning"] =
            "the observation record was too short for some runs; supply more data or use "
            "the finite-window sampler, which falls back to an exact draw at the record's start";
    }
    return res;
}

void write_sample(const ExperimentConfig& cfg, const SampleResult& res) {
    const std::string hash = config_hash(cfg.effective);
    CsvWriter rec(cfg.out_dir / "records.csv", "records", hash,
                  {"replicate", "status", "coalescence_depth", "sample", "observations_consumed"});
    CsvWriter tim(cfg.out_dir / "records_timings.csv", "records-timings", hash,
                  {"replicate", "seconds"});
    for (const auto& r : res.records) {
        rec.row(r.replicate, std::string(to_string(r.status)), r.coalescence_depth, r.sample,
                r.observations_consumed);
        tim.row(r.replicate, r.seconds);
    }
    write_json(cfg.out_dir / "summary.json", res.summary);
}

// ---------------------------------------------------------------------------
// figure1

std::vector<Figure1Column> run_figure1(const ExperimentConfig& cfg) {
    const ResolvedModel model = build_model(cfg.model);
    const HmmModel& hmm = require_hmm(model, "figure1");
    require_data(cfg, "figure1");
    const RngStream root(cfg.seed);

    std::vector<Figure1Column> cols;
    for (std::size_t c = 0; c < cfg.data.size(); ++c) {
        const DataSource& src = cfg.data[c];
        Figure1Column col;
        col.label = src.label.empty() ? "data" + std::to_string(c) : src.label;
        col.data = load_dataset(src, hmm, cfg.seed, std::max(cfg.cutoff, cfg.beta_depth) + 1);
        const std::size_t nbeta = std::min(cfg.beta_depth, col.data.observations.size());

        const auto kernels = conditional_kernels(hmm, col.data.observations, nbeta);
        StochasticMatrix prod = StochasticMatrix::identity(hmm.size());
        col.beta.push_back(dobrushin(prod));
        for (std::size_t d = 0; d < nbeta; ++d) {
            prod = kernels[d] * prod;
            col.beta.push_back(dobrushin(prod));
            if (!col.beta_below_1e6 && col.beta.back() < 1e-6) col.beta_below_1e6 = d + 1;
        }

        auto window = std::make_shared<const ObservationWindow>(col.data.observations);
        const RngStream col_root = root.substream(1'000'000'000ULL + c);
        const auto records =
            parallel_replicates<RunRecord>(cfg.replicates, cfg.workers, [&](std::size_t r) {
                RngStream rng = col_root.substream(r);
                ObservationStream obs = stream_over(window);
                try {
                    return record_from(r, hmm_cftp(hmm, obs, {0}, rng, cfg.cutoff).outcome);
                } catch (const DataExhausted&) {
                    RunRecord rec;
                    rec.replicate = r;
                    rec.status = RunStatus::data_exhausted;
                    return rec;
                }
            });

        col.replicates = cfg.replicates;
        col.depth_counts.assign(cfg.cutoff + 1, 0);
        std::size_t within = 0;
        for (const auto& rec : records) {
            if (rec.status == RunStatus::coalesced) {
                ++col.depth_counts[rec.coalescence_depth];
                if (rec.coalescence_depth <= cfg.within) ++within;
            } else {
                ++col.cutoff_failures;
            }
        }
        col.fraction_within = static_cast<double>(within) / static_cast<double>(cfg.replicates);
        cols.push_back(std::move(col));
    }
    return cols;
}

void write_figure1(const ExperimentConfig& cfg, const std::vector<Figure1Column>& cols) {
    const std::string hash = config_hash(cfg.effective);
    json summary;
    summary["schema"] = "perfsmooth/figure1-summary/v" + std::to_string(kSchemaVersion);
    summary["config_hash"] = hash;
    summary["within"] = cfg.within;
    for (const auto& col : cols) {
        CsvWriter obs(cfg.out_dir / (col.label + "_observations.csv"), "figure1-observations", hash,
                      {"time", "value", "state"});
        for (std::size_t d = 0; d < col.data.observations.size(); ++d) {
            const std::string state = d < col.data.states.size()
                                          ? std::to_string(col.data.states[d])
                                          : std::string();
            obs.row(-static_cast<long long>(d), col.data.observations[d].value, state);
        }
        CsvWriter beta(cfg.out_dir / (col.label + "_beta.csv"), "figure1-beta", hash,
                       {"time", "beta"});
        for (std::size_t d = 0; d < col.beta.size(); ++d) {
            beta.row(-static_cast<long long>(d), col.beta[d]);
        }
        CsvWriter hist(cfg.out_dir / (col.label + "_histogram.csv"), "figure1-histogram", hash,
                       {"coalescence_time", "count"});
        for (std::size_t d = 1; d < col.depth_counts.size(); ++d) {
            if (col.depth_counts[d] > 0) hist.row(-static_cast<long long>(d), col.depth_counts[d]);
        }
        hist.row(std::string("beyond_cutoff"), col.cutoff_failures);

        summary["columns"].push_back({{"label", col.label},
                                      {"replicates", col.replicates},
                                      {"cutoff_failures", col.cutoff_failures},
                                      {"fraction_within", col.fraction_within},
                                      {"beta_below_1e-6_at_depth",
                                       col.beta_below_1e6 ? json(*col.beta_below_1e6) : json()}});
    }
    write_json(cfg.out_dir / "figure1_summary.json", summary);
}

// ---------------------------------------------------------------------------
// table1

Table1Result run_table1(const ExperimentConfig& cfg) {
    const ResolvedModel model = build_model(cfg.model);
    const HmmModel& hmm = require_hmm(model, "table1");
    const std::size_t max_n = cfg.table_n.empty()
                                  ? 0
                                  : *std::max_element(cfg.table_n.begin(), cfg.table_n.end());
    const Dataset data = load_dataset(require_data(cfg, "table1"), hmm, cfg.seed,
                                      max_n + std::max(cfg.smoother_depth, cfg.cutoff) + 1);
    const ObservationWindow& y = data.observations;

    Table1Result res;
    res.n = cfg.table_n;
    for (std::size_t n : cfg.table_n) {
        res.dependence.push_back(pairwise_dependence(hmm, y, {n}, cfg.smoother_depth));
    }

    // Timings run on one thread so phases do not compete for cores.
    const RngStream root(cfg.seed);
    for (std::size_t ni = 0; ni < cfg.table_n.size(); ++ni) {
        const std::size_t n = cfg.table_n[ni];
        for (std::size_t di = 0; di < cfg.table_draws.size(); ++di) {
            const std::size_t draws = cfg.table_draws[di];
            const RngStream cell = root.substream((ni << 32) | di);
            RngStream warm = cell.substream(~std::uint64_t{0});
            multi_sample(hmm, y, {n}, draws, warm, cfg.cutoff);

            double sum = 0.0, sumsq = 0.0;
            std::size_t runs = 0;
            for (std::size_t r = 0; r < cfg.replicates; ++r) {
                RngStream rng = cell.substream(r);
                const MultiSampleResult ms = multi_sample(hmm, y, {n}, draws, rng, cfg.cutoff);
                if (!coalesced(ms.step1)) continue;
                const double pct = 100.0 * ms.step1_seconds / (ms.step1_seconds + ms.step2_seconds);
                sum += pct;
                sumsq += pct * pct;
                ++runs;
            }
            Table1Timing t{n, draws, 0.0, 0.0, runs};
            if (runs > 0) {
                t.mean_pct = sum / static_cast<double>(runs);
                if (runs > 1) {
                    const double var = (sumsq - runs * t.mean_pct * t.mean_pct) /
                                       static_cast<double>(runs - 1);
                    t.sd_pct = std::sqrt(std::max(0.0, var));
                }
            }
            res.timing.push_back(t);
        }
    }
    return res;
}

void write_table1(const ExperimentConfig& cfg, const Table1Result& res) {
    const std::string hash = config_hash(cfg.effective);
    CsvWriter dep(cfg.out_dir / "table1_dependence.csv", "table1-dependence", hash,
                  {"n", "pairwise_dependence"});
    for (std::size_t i = 0; i < res.n.size(); ++i) {
        dep.row(-static_cast<long long>(res.n[i]), res.dependence[i]);
    }
    CsvWriter tim(cfg.out_dir / "table1_timings.csv", "table1-timings", hash,
                  {"n", "N", "step1_pct_mean", "step1_pct_sd", "runs"});
    for (const auto& t : res.timing) {
        tim.row(-static_cast<long long>(t.n), t.draws, t.mean_pct, t.sd_pct, t.runs);
    }
}

// ---------------------------------------------------------------------------
// diagnose

namespace {

json certificate_json(const MinorizationCertificate& c) {
    return {{"eps_minus", c.eps_minus},
            {"eps_plus", c.eps_plus},
            {"nu", c.nu.values()},
            {"span_steps", c.span_steps}};
}

}  // namespace

json run_diagnose(const ExperimentConfig& cfg) {
    const ResolvedModel model = build_model(cfg.model);
    const std::size_t probes = cfg.probe_depths;
    json rep;
    rep["schema"] = "perfsmooth/diagnose/v" + std::to_string(kSchemaVersion);
    rep["config_hash"] = config_hash(cfg.effective);
    rep["model"] = model.spec.name;
    rep["label_map"] = model.spec.label_map;

    const DepthRange window{0, probes - 1};
    rep["stenflo_coefficient"] = stenflo_coefficient(model.signal, window);

    std::vector<TimeIndex> checkpoints;
    for (std::size_t d = 0; d <= probes; d += cfg.checkpoint_spacing) checkpoints.push_back({d});
    const auto terms = weak_ergodicity_series(model.signal, checkpoints);
    std::vector<double> partial(terms.size());
    std::partial_sum(terms.begin(), terms.end(), partial.begin());
    rep["weak_ergodicity"] = {{"checkpoint_spacing", cfg.checkpoint_spacing},
                              {"terms", terms},
                              {"partial_sums", partial}};

    if (!model.hmm) return rep;
    const HmmModel& hmm = *model.hmm;

    ProbeSettings probe;
    probe.depths = window;
    std::optional<Dataset> data;
    if (!cfg.data.empty() && cfg.data.front().kind != DataKind::none) {
        data = load_dataset(cfg.data.front(), hmm, cfg.seed, 2 * probes + hmm.size() * hmm.size() + 1);
        probe.observations = data->observations;
    }
    const SufficientConditionsReport sc = sufficient_conditions_report(hmm, probe);
    json scj = {{"surely_successful", sc.surely_successful},
                {"as_successful_evidence", sc.as_successful_evidence},
                {"min_signal_entry", sc.min_signal_entry},
                {"emission_positive_somewhere", sc.emission_positive_somewhere},
                {"emission_positive_everywhere", sc.emission_positive_everywhere},
                {"notes", sc.notes}};
    scj["certificate"] = sc.certificate ? certificate_json(*sc.certificate) : json();
    rep["sufficient_conditions"] = scj;

    if (!data) return rep;
    const ObservationWindow& y = data->observations;
    const std::size_t nk = std::min(y.size(), 2 * probes);
    const auto kernels = conditional_kernels(hmm, y, nk);

    std::vector<double> beta_profile;
    StochasticMatrix prod = StochasticMatrix::identity(hmm.size());
    for (std::size_t d = 0; d < std::min(nk, probes); ++d) {
        prod = kernels[d] * prod;
        beta_profile.push_back(dobrushin(prod));
    }
    rep["conditional_beta_profile"] = beta_profile;

    if (sc.certificate) {
        const std::size_t m = sc.certificate->span_steps;
        json rows = json::array();
        for (std::size_t k = 0; k < probes && k + m <= nk; ++k) {
            StochasticMatrix block = StochasticMatrix::identity(hmm.size());
            for (std::size_t d = k + m; d > k; --d) block = block * kernels[d - 1];
            json row = {{"n", -static_cast<long long>(k + m)},
                        {"k", -static_cast<long long>(k)},
                        {"beta", dobrushin(block)}};
            try {
                row["bound"] = beta_bound(*sc.certificate, hmm, y, {k + m}, {k});
            } catch (const std::domain_error&) {
                row["bound"] = nullptr;
            }
            rows.push_back(row);
        }
        rep["beta_bounds"] = rows;
    }
    return rep;
}

void write_diagnose(const ExperimentConfig& cfg, const json& report) {
    write_json(cfg.out_dir / "diagnose.json", report);
}

}  // namespace perfsmooth::experiments
