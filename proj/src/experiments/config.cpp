#include "perfsmooth/experiments/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace perfsmooth::experiments {

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

DataSource parse_data(const json& j) {
    DataSource d;
    const std::string source = get_or<std::string>(j, "source", "simulated");
    if (source == "simulated") {
        d.kind = DataKind::simulated;
    } else if (source == "generator") {
        const std::string name = get_or<std::string>(j, "name", "");
        if (name == "random_walk") {
            d.kind = DataKind::random_walk;
        } else if (name == "drift") {
            d.kind = DataKind::drift;
        } else {
            throw ConfigError("unknown generator '" + name + "'");
        }
    } else if (source == "csv") {
        d.kind = DataKind::csv;
        d.csv_path = get_or<std::string>(j, "path", "");
        if (d.csv_path.empty()) throw ConfigError("csv data source needs a path");
    } else if (source == "none") {
        d.kind = DataKind::none;
    } else {
        throw ConfigError("unknown data source '" + source + "'");
    }
    d.label = get_or<std::string>(j, "label", source == "generator" ? get_or<std::string>(j, "name", "") : source);
    d.length = get_or<std::size_t>(j, "length", 0);
    d.sigma2 = get_or<double>(j, "sigma2", 0.25);
    d.slope = get_or<double>(j, "slope", 0.003);
    if (j.contains("seed")) d.seed = get_or<std::uint64_t>(j, "seed", 0);
    if (!(d.sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
    return d;
}

std::vector<std::size_t> magnitudes(const json& j, const char* key,
                                    std::vector<std::size_t> fallback) {
    if (!j.contains(key)) return fallback;
    std::vector<std::size_t> out;
    for (const auto& v : j.at(key)) {
        const long long n = v.get<long long>();
        out.push_back(static_cast<std::size_t>(n < 0 ? -n : n));
    }
    return out;
}

}  // namespace

void refresh_effective(ExperimentConfig& cfg) {
    json& e = cfg.effective;
    e["replicates"] = cfg.replicates;
    e["cutoff"] = cfg.cutoff;
    e["seed"] = cfg.seed;
    // Where results land does not change them.
    e.erase("out");
    if (cfg.replicates < 1) throw ConfigError("replicates must be at least 1");
    if (cfg.cutoff < 1) throw ConfigError("cutoff must be at least 1");
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig cfg;
    cfg.name = get_or<std::string>(j, "name", cfg.name);
    if (!j.contains("model")) throw ConfigError("config needs a 'model' entry");
    cfg.model = j.at("model");
    if (j.contains("data")) {
        const json& d = j.at("data");
        if (d.is_array()) {
            for (const auto& item : d) cfg.data.push_back(parse_data(item));
        } else {
            cfg.data.push_back(parse_data(d));
        }
    }
    cfg.replicates = get_or<std::size_t>(j, "replicates", cfg.replicates);
    cfg.cutoff = get_or<std::size_t>(j, "cutoff", cfg.cutoff);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    const long long target = get_or<long long>(j, "target", 0);
    if (target > 0) throw ConfigError("target time must be nonpositive");
    cfg.target_depth = static_cast<std::size_t>(-target);
    cfg.out_dir = get_or<std::string>(j, "out", cfg.out_dir.string());

    const json fig = j.value("figure1", json::object());
    cfg.beta_depth = get_or<std::size_t>(fig, "beta_depth", cfg.beta_depth);
    cfg.within = get_or<std::size_t>(fig, "within", cfg.within);

    const json tab = j.value("table1", json::object());
    cfg.table_n = magnitudes(tab, "n", cfg.table_n);
    cfg.table_draws = magnitudes(tab, "N", cfg.table_draws);
    cfg.smoother_depth = get_or<std::size_t>(tab, "smoother_depth", cfg.smoother_depth);

    const json diag = j.value("diagnose", json::object());
    cfg.probe_depths = get_or<std::size_t>(diag, "probe_depths", cfg.probe_depths);
    cfg.checkpoint_spacing = get_or<std::size_t>(diag, "checkpoint_spacing", cfg.checkpoint_spacing);
    if (cfg.checkpoint_spacing == 0 || cfg.probe_depths == 0) {
        throw ConfigError("diagnose probe sizes must be positive");
    }

    cfg.effective = j;
    refresh_effective(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    ExperimentConfig cfg = parse_config(j);
    // Relative CSV paths resolve against the config file.
    for (auto& d : cfg.data) {
        if (d.kind == DataKind::csv && d.csv_path.is_relative()) {
            d.csv_path = path.parent_path() / d.csv_path;
        }
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Models

StochasticMatrix matrix_from_json(const json& j) {
    try {
        return StochasticMatrix(j.get<std::vector<std::vector<double>>>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("matrix literal: ") + e.what());
    }
}

ProbVector vector_from_json(const json& j) {
    try {
        return ProbVector(j.get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("vector literal: ") + e.what());
    }
}

std::shared_ptr<const EmissionModel> emission_from_json(const json& j) {
    const std::string family = get_or<std::string>(j, "family", "");
    if (family == "gaussian") {
        const auto means = get_or<std::vector<double>>(j, "means", {});
        auto variances = get_or<std::vector<double>>(j, "variances", {});
        if (variances.empty()) variances.assign(means.size(), 1.0);
        return std::make_shared<GaussianEmission>(means, variances);
    }
    if (family == "indicator") {
        return std::make_shared<IndicatorEmission>(get_or<std::vector<int>>(j, "labels", {}));
    }
    if (family == "tabular") {
        return std::make_shared<TabularEmission>(
            get_or<std::vector<std::vector<double>>>(j, "table", {}));
    }
    throw ConfigError("unknown emission family '" + family + "'");
}

ResolvedModel build_model(const json& m) {
    auto from_named = [](NamedModel nm) {
        return ResolvedModel{nm.spec, nm.model.signal, nm.model, nm.model.invariant_dist};
    };
    if (m.contains("builder")) {
        const std::string builder = m.at("builder").get<std::string>();
        if (builder == "gaussian_three_state") {
            return from_named(gaussian_three_state(get_or<double>(m, "delta", 0.1)));
        }
        if (builder == "degenerate_rotation") return from_named(degenerate_rotation());
        if (builder == "reducible_block") {
            return from_named(reducible_block(
                m.contains("emission") ? emission_from_json(m.at("emission")) : nullptr));
        }
        if (builder == "flat_signal") {
            if (!m.contains("emission")) throw ConfigError("flat_signal needs an emission");
            return from_named(flat_signal(get_or<std::size_t>(m, "states", 2),
                                          emission_from_json(m.at("emission"))));
        }
        throw ConfigError("unknown model builder '" + builder + "'");
    }

    std::optional<KernelSequence> signal;
    if (m.contains("signal")) {
        signal = KernelSequence::homogeneous(matrix_from_json(m.at("signal")));
    } else if (m.contains("signal_sequence")) {
        std::vector<StochasticMatrix> ks;
        for (const auto& k : m.at("signal_sequence")) ks.push_back(matrix_from_json(k));
        signal = KernelSequence::window(std::move(ks));
    } else {
        throw ConfigError("model needs 'builder', 'signal' or 'signal_sequence'");
    }
    std::optional<ProbVector> invariant;
    if (m.contains("invariant")) invariant = vector_from_json(m.at("invariant"));

    ModelSpec spec{get_or<std::string>(m, "name", "custom"), {}, {}};
    for (std::size_t x = 0; x < signal->size(); ++x) spec.label_map.push_back(std::to_string(x));

    ResolvedModel out{spec, *signal, std::nullopt, invariant};
    if (m.contains("emission")) {
        out.hmm.emplace(*signal, emission_from_json(m.at("emission")), invariant);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Data

ObservationWindow read_observation_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open observation file " + path.string());
    std::map<std::size_t, double> by_depth;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string t, v;
        if (!std::getline(ss, t, ',') || !std::getline(ss, v, ',')) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected time,value");
        }
        if (t == "time") continue;  // header
        long long time = 0;
        double value = 0.0;
        try {
            time = std::stoll(t);
            value = std::stod(v);
        } catch (const std::exception&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": not numeric");
        }
        if (time > 0) throw ConfigError(path.string() + ": times must be nonpositive");
        if (!by_depth.emplace(static_cast<std::size_t>(-time), value).second) {
            throw ConfigError(path.string() + ": duplicate time " + std::to_string(time));
        }
    }
    ObservationWindow w;
    for (const auto& [depth, value] : by_depth) {
        if (depth != w.size()) {
            throw ConfigError(path.string() + ": observation times must be contiguous from 0");
        }
        w.push_back({value});
    }
    if (w.empty()) throw ConfigError(path.string() + ": no observations");
    return w;
}

Dataset load_dataset(const DataSource& src, const HmmModel& model, std::uint64_t seed,
                     std::size_t needed) {
    const std::size_t length = src.length > 0 ? src.length : needed;
    // Data draws come from a substream no replicate index can reach.
    RngStream rng = RngStream(src.seed.value_or(seed)).substream(~std::uint64_t{0});
    Dataset out;
    switch (src.kind) {
        case DataKind::simulated: {
            SimulatedPath path = simulate_hmm(model, length - 1, rng);
            out.observations = std::move(path.observations);
            out.states = std::move(path.states);
            break;
        }
        case DataKind::random_walk: {
            ObservationStream s = random_walk_obs(src.sigma2, rng);
            out.observations = materialize(s, length);
            break;
        }
        case DataKind::drift: {
            ObservationStream s = drift_obs(src.slope, src.sigma2, rng);
            out.observations = materialize(s, length);
            break;
        }
        case DataKind::csv:
            out.observations = read_observation_csv(src.csv_path);
            break;
        case DataKind::none:
            throw ConfigError("this command needs observation data");
    }
    return out;
}

}  // namespace perfsmooth::experiments
