// Pipeline configuration, report assembly, and the command implementations
// behind the CLI subcommands (detect / patch / filter / sweep / eval / report).
#pragma once

#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "synthkit/report.hpp"

namespace synthkit {

struct PipelineConfig {
    // paths
    std::string real_csv;
    std::string synthetic_csv;
    std::string schema_file;
    std::string output_dir = "out";
    std::string report_file;  // cmd_report input; defaults to <output_dir>/report.json

    // generator
    std::string generator_kind = "independent_marginals";  // or bootstrap_jitter
    double jitter_sigma = 0.05;
    std::string generator_fit_csv;  // defaults to the real training slice

    // filter
    std::vector<double> taus = {0.2};
    FilterVariant variant = FilterVariant::v0;
    Weighting custom_weighting = Weighting::unweighted;
    std::size_t custom_k = 2;
    std::size_t sample_size = 1000;
    std::size_t max_proposals = 0;  // 0 -> 100 * sample_size
    bool include_baseline = true;

    // mode patch
    std::size_t patch_batch = 1000;
    std::size_t patch_m = 10;
    std::size_t patch_max_rounds = 10;

    // metric toggles
    bool fidelity = true;
    bool utility = true;
    bool privacy = true;

    // columns (override schema roles when nonempty)
    std::vector<std::string> quasi_identifiers;
    std::vector<std::string> sensitives;

    // protocol
    double split_fraction = 0.8;
    std::uint64_t seed = 42;
    double q_low = 0.05;
    double q_high = 0.95;
    double rbo_p = 0.9;
    std::size_t pfi_permutations = 5;
    UtilityMetric pfi_metric = UtilityMetric::accuracy;
    std::size_t knn_k = 5;
    std::size_t density_k = 20;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string token;
    for (char ch : value) {
        if (ch == ',' || ch == ' ' || ch == '\t') {
            if (!token.empty()) out.push_back(std::move(token));
            token.clear();
        } else {
            token.push_back(ch);
        }
    }
    if (!token.empty()) out.push_back(std::move(token));
    return out;
}

inline double parse_double(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double parsed = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        fail(Errc::invalid_config, "cannot parse number for " + key + ": " + value);
    }
}

inline std::uint64_t parse_uint(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const unsigned long long parsed = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        fail(Errc::invalid_config, "cannot parse integer for " + key + ": " + value);
    }
}

inline bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    fail(Errc::invalid_config, "cannot parse boolean for " + key + ": " + value);
}

}  // namespace detail

// Applies one "section.key = value" setting. Shared by the config-file parser
// and the CLI flag overrides so flags win by being applied last.
inline void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_uint;
    if (key == "paths.real") cfg.real_csv = value;
    else if (key == "paths.synthetic") cfg.synthetic_csv = value;
    else if (key == "paths.schema") cfg.schema_file = value;
    else if (key == "paths.output") cfg.output_dir = value;
    else if (key == "paths.report") cfg.report_file = value;
    else if (key == "generator.kind") cfg.generator_kind = value;
    else if (key == "generator.sigma") cfg.jitter_sigma = parse_double(value, key);
    else if (key == "generator.fit") cfg.generator_fit_csv = value;
    else if (key == "filter.taus") {
        cfg.taus.clear();
        for (const auto& tok : detail::split_list(value)) cfg.taus.push_back(parse_double(tok, key));
    } else if (key == "filter.variant") {
        if (value == "v0") cfg.variant = FilterVariant::v0;
        else if (value == "v1") cfg.variant = FilterVariant::v1;
        else if (value == "v2") cfg.variant = FilterVariant::v2;
        else if (value == "custom") cfg.variant = FilterVariant::custom;
        else fail(Errc::invalid_config, "unknown filter variant: " + value);
    } else if (key == "filter.weighting") {
        if (value == "unweighted") cfg.custom_weighting = Weighting::unweighted;
        else if (value == "entropy") cfg.custom_weighting = Weighting::entropy;
        else fail(Errc::invalid_config, "unknown weighting: " + value);
    } else if (key == "filter.k") cfg.custom_k = parse_uint(value, key);
    else if (key == "filter.sample_size") cfg.sample_size = parse_uint(value, key);
    else if (key == "filter.max_proposals") cfg.max_proposals = parse_uint(value, key);
    else if (key == "filter.include_baseline") cfg.include_baseline = parse_bool(value, key);
    else if (key == "patch.batch") cfg.patch_batch = parse_uint(value, key);
    else if (key == "patch.m") cfg.patch_m = parse_uint(value, key);
    else if (key == "patch.max_rounds") cfg.patch_max_rounds = parse_uint(value, key);
    else if (key == "metrics.fidelity") cfg.fidelity = parse_bool(value, key);
    else if (key == "metrics.utility") cfg.utility = parse_bool(value, key);
    else if (key == "metrics.privacy") cfg.privacy = parse_bool(value, key);
    else if (key == "columns.quasi_identifiers") cfg.quasi_identifiers = detail::split_list(value);
    else if (key == "columns.sensitive") cfg.sensitives = detail::split_list(value);
    else if (key == "protocol.split_fraction") cfg.split_fraction = parse_double(value, key);
    else if (key == "protocol.seed") cfg.seed = parse_uint(value, key);
    else if (key == "protocol.q_low") cfg.q_low = parse_double(value, key);
    else if (key == "protocol.q_high") cfg.q_high = parse_double(value, key);
    else if (key == "protocol.rbo_p") cfg.rbo_p = parse_double(value, key);
    else if (key == "protocol.pfi_permutations") cfg.pfi_permutations = parse_uint(value, key);
    else if (key == "protocol.pfi_metric") {
        if (value == "accuracy") cfg.pfi_metric = UtilityMetric::accuracy;
        else if (value == "balanced_accuracy") cfg.pfi_metric = UtilityMetric::balanced_accuracy;
        else if (value == "weighted_f1") cfg.pfi_metric = UtilityMetric::weighted_f1;
        else if (value == "roc_auc") cfg.pfi_metric = UtilityMetric::roc_auc;
        else fail(Errc::invalid_config, "unknown pfi metric: " + value);
    } else if (key == "protocol.knn_k") cfg.knn_k = parse_uint(value, key);
    else if (key == "protocol.density_k") cfg.density_k = parse_uint(value, key);
    else fail(Errc::invalid_config, "unknown config key: " + key);
}

// INI-style config: [section] headers, key = value lines, '#' comments.
inline PipelineConfig load_config(std::istream& in, const std::string& origin = "<stream>") {
    PipelineConfig cfg;
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(Errc::invalid_config, origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty()) fail(Errc::invalid_config, origin + ": setting outside a [section]: " + key);
        apply_setting(cfg, section + "." + key, value);
    }
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open config " + path);
    return load_config(in, path);
}

// Validates and normalizes the tau grid: values in (0,1], strictly decreasing,
// duplicates dropped.
inline void normalize_taus(PipelineConfig& cfg) {
    if (cfg.taus.empty()) fail(Errc::invalid_config, "tau grid is empty");
    for (double tau : cfg.taus) {
        if (!(tau > 0.0 && tau <= 1.0)) fail(Errc::invalid_config, "tau values must be in (0,1]");
    }
    std::sort(cfg.taus.begin(), cfg.taus.end(), std::greater<double>());
    cfg.taus.erase(std::unique(cfg.taus.begin(), cfg.taus.end()), cfg.taus.end());
}

// Canonical listing of every semantic field; the hash changes iff one of them
// does, independent of config-file whitespace or ordering.
inline std::string canonical_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    auto put = [&](const std::string& key, const std::string& value) { out << key << '=' << value << '\n'; };
    auto num = [&](const std::string& key, double value) { put(key, detail::format_double(value)); };
    put("paths.real", cfg.real_csv);
    put("paths.synthetic", cfg.synthetic_csv);
    put("paths.schema", cfg.schema_file);
    put("generator.kind", cfg.generator_kind);
    num("generator.sigma", cfg.jitter_sigma);
    put("generator.fit", cfg.generator_fit_csv);
    {
        std::string taus;
        for (double tau : cfg.taus) {
            if (!taus.empty()) taus += ',';
            taus += detail::format_double(tau);
        }
        put("filter.taus", taus);
    }
    put("filter.variant", to_string(cfg.variant));
    put("filter.weighting", cfg.custom_weighting == Weighting::entropy ? "entropy" : "unweighted");
    put("filter.k", std::to_string(cfg.custom_k));
    put("filter.sample_size", std::to_string(cfg.sample_size));
    put("filter.max_proposals", std::to_string(cfg.max_proposals));
    put("filter.include_baseline", cfg.include_baseline ? "true" : "false");
    put("patch.batch", std::to_string(cfg.patch_batch));
    put("patch.m", std::to_string(cfg.patch_m));
    put("patch.max_rounds", std::to_string(cfg.patch_max_rounds));
    put("metrics.fidelity", cfg.fidelity ? "true" : "false");
    put("metrics.utility", cfg.utility ? "true" : "false");
    put("metrics.privacy", cfg.privacy ? "true" : "false");
    {
        std::string qids;
        for (const auto& q : cfg.quasi_identifiers) {
            if (!qids.empty()) qids += ',';
            qids += q;
        }
        put("columns.quasi_identifiers", qids);
        std::string sens;
        for (const auto& s : cfg.sensitives) {
            if (!sens.empty()) sens += ',';
            sens += s;
        }
        put("columns.sensitive", sens);
    }
    num("protocol.split_fraction", cfg.split_fraction);
    put("protocol.seed", std::to_string(cfg.seed));
    num("protocol.q_low", cfg.q_low);
    num("protocol.q_high", cfg.q_high);
    num("protocol.rbo_p", cfg.rbo_p);
    put("protocol.pfi_permutations", std::to_string(cfg.pfi_permutations));
    put("protocol.pfi_metric", to_string(cfg.pfi_metric));
    put("protocol.knn_k", std::to_string(cfg.knn_k));
    put("protocol.density_k", std::to_string(cfg.density_k));
    return out.str();
}

inline std::uint64_t config_hash(const PipelineConfig& cfg) { return fnv1a(canonical_config(cfg)); }

// ---- command support ---------------------------------------------------------

namespace detail {

inline std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot open " + path + " for writing");
    out << contents;
}

}  // namespace detail

// Mutable metadata (timestamps, host) is kept apart from the deterministic
// results block so byte-comparison of "results" is meaningful across re-runs.
inline json make_report(const PipelineConfig& cfg, json results) {
    results["config_hash"] = config_hash(cfg);
    results["seed"] = cfg.seed;
    char host[256] = {};
    gethostname(host, sizeof(host) - 1);
    json report;
    report["metadata"] = {
        {"generated_at", detail::timestamp_utc()},
        {"host", std::string(host)},
        {"tool", "synthkit"},
        {"version", "0.1.0"},
    };
    report["results"] = std::move(results);
    return report;
}

inline void write_report(const PipelineConfig& cfg, const json& report, const std::string& filename) {
    std::filesystem::create_directories(cfg.output_dir);
    detail::write_file(cfg.output_dir + "/" + filename, report.dump(2) + "\n");
}

struct PipelineData {
    TableSchema schema;
    Table real_full;
    Table real_train;
    Table real_test;
    std::optional<Table> synthetic;
};

inline PipelineData load_pipeline_data(const PipelineConfig& cfg, bool need_synthetic) {
    if (cfg.schema_file.empty()) fail(Errc::invalid_config, "paths.schema is required");
    if (cfg.real_csv.empty()) fail(Errc::invalid_config, "paths.real is required");
    PipelineData data;
    data.schema = load_schema(cfg.schema_file);
    for (const auto& name : cfg.quasi_identifiers) data.schema.require(name);
    for (const auto& name : cfg.sensitives) data.schema.require(name);
    data.real_full = load_csv(cfg.real_csv, data.schema);
    auto [train, test] = split(data.real_full, SplitSpec{cfg.split_fraction, cfg.seed});
    data.real_train = std::move(train);
    data.real_test = std::move(test);
    if (!cfg.synthetic_csv.empty()) {
        data.synthetic = load_csv(cfg.synthetic_csv, data.schema);
    } else if (need_synthetic) {
        fail(Errc::invalid_config, "paths.synthetic is required for this command");
    }
    return data;
}

inline std::vector<std::string> resolved_quasi_ids(const PipelineConfig& cfg, const TableSchema& schema) {
    auto out = cfg.quasi_identifiers.empty() ? schema.names_with_role(ColumnRole::quasi_identifier)
                                             : cfg.quasi_identifiers;
    for (const auto& name : out) schema.require(name);
    return out;
}

inline std::vector<std::string> resolved_sensitives(const PipelineConfig& cfg, const TableSchema& schema) {
    auto out = cfg.sensitives.empty() ? schema.names_with_role(ColumnRole::sensitive) : cfg.sensitives;
    for (const auto& name : out) schema.require(name);
    return out;
}

inline std::unique_ptr<GeneratorHandle> build_generator(const PipelineConfig& cfg, const Table& default_fit) {
    const Table fit = cfg.generator_fit_csv.empty()
                          ? default_fit
                          : load_csv(cfg.generator_fit_csv, default_fit.schema());
    if (cfg.generator_kind == "independent_marginals") return make_independent_marginals(fit);
    if (cfg.generator_kind == "bootstrap_jitter") return make_bootstrap_jitter(fit, cfg.jitter_sigma);
    fail(Errc::invalid_config, "unknown generator kind: " + cfg.generator_kind);
}

inline std::unique_ptr<PatchableGenerator> build_patchable_generator(const PipelineConfig& cfg,
                                                                     const Table& default_fit) {
    if (cfg.generator_kind != "independent_marginals") {
        fail(Errc::invalid_config, "mode patching needs a patchable generator (independent_marginals)");
    }
    const Table fit = cfg.generator_fit_csv.empty()
                          ? default_fit
                          : load_csv(cfg.generator_fit_csv, default_fit.schema());
    return make_independent_marginals(fit);
}

inline FilterConfig filter_config_from(const PipelineConfig& cfg, double tau) {
    FilterConfig out;
    out.tau_any = tau;
    out.sample_size = cfg.sample_size;
    out.variant = cfg.variant;
    out.weighting = WeightingSpec{cfg.custom_weighting, 1e-6};
    out.k = cfg.custom_k;
    out.max_proposals = cfg.max_proposals;
    out.seed = cfg.seed;
    return out;
}

// ---- metric cell ---------------------------------------------------------------

namespace detail {

inline json fidelity_block(const PipelineConfig& cfg, const Table& real, const Table& synth) {
    json out;
    json per_categorical = json::object();
    double total_js = 0.0;
    double distance_sum = 0.0;
    const auto categorical = real.categorical_names();
    for (const auto& name : categorical) {
        const auto cmp = js_categorical(real, synth, name);
        per_categorical[name] = to_json(cmp);
        total_js += cmp.js_divergence_bits;
        distance_sum += cmp.js_distance;
    }
    out["categorical"] = std::move(per_categorical);
    out["total_js_bits"] = total_js;
    out["mean_js_distance"] =
        categorical.empty() ? json(nullptr) : json(distance_sum / static_cast<double>(categorical.size()));

    json per_numeric = json::object();
    std::vector<double> abs_med, abs_low, abs_high, abs_p_low, abs_p_high, ds;
    for (const auto& name : real.numeric_names()) {
        json entry;
        try {
            const double d = cohens_d(real, synth, name);
            entry["cohens_d"] = d;
            ds.push_back(d);
        } catch (const Error&) {
            entry["cohens_d"] = nullptr;  // degenerate pair, flagged as null
        }
        const auto q = quantile_heuristics(real, synth, name, cfg.q_low, cfg.q_high);
        entry["quantiles"] = to_json(q);
        if (q.delta_med) abs_med.push_back(std::abs(*q.delta_med));
        if (q.delta_low) abs_low.push_back(std::abs(*q.delta_low));
        if (q.delta_high) abs_high.push_back(std::abs(*q.delta_high));
        abs_p_low.push_back(std::abs(q.delta_p_low_pp));
        abs_p_high.push_back(std::abs(q.delta_p_high_pp));
        per_numeric[name] = std::move(entry);
    }
    out["numeric"] = std::move(per_numeric);
    json summary;
    auto median_or_null = [](std::vector<double>& values) -> json {
        if (values.empty()) return nullptr;
        std::sort(values.begin(), values.end());
        return quantile_sorted(values, 0.5);
    };
    auto mean_or_null = [](const std::vector<double>& values) -> json {
        if (values.empty()) return nullptr;
        return mean_of(values);
    };
    summary["median_abs_delta_med"] = median_or_null(abs_med);
    summary["median_abs_delta_low"] = median_or_null(abs_low);
    summary["median_abs_delta_high"] = median_or_null(abs_high);
    summary["mean_abs_delta_p_low_pp"] = mean_or_null(abs_p_low);
    summary["mean_abs_delta_p_high_pp"] = mean_or_null(abs_p_high);
    summary["mean_cohens_d"] = mean_or_null(ds);
    out["numeric_summary"] = std::move(summary);

    out["dependence"] = to_json(dependence_matrices(real, synth));
    out["missing_modes"] = to_json(get_mode_collapse(real, synth));
    return out;
}

inline json utility_block(const PipelineConfig& cfg, const Table& real_train, const Table& real_test,
                          const Table& synth_train, std::uint64_t seed) {
    const auto learners = default_learners(cfg.knn_k);
    const auto scores = tstr_trtr(real_train, real_test, synth_train, learners, seed);
    json out = to_json(scores);

    const std::string target = find_target_column(real_train.schema());
    const ClassSpace space = build_class_space({&real_train, &synth_train, &real_test}, target);
    const auto y_real = encode_labels(real_train, target, space);
    const auto y_synth = encode_labels(synth_train, target, space);
    const Table real_features = real_train.drop_column(target);
    const HeomEncoder encoder = HeomEncoder::fit(real_features);
    const EncodedMatrix x_real = encoder.encode(real_features);
    const EncodedMatrix x_synth = encoder.encode(synth_train.drop_column(target));

    json pfi = json::object();
    for (std::size_t i = 0; i < learners.size(); ++i) {
        json entry;
        try {
            auto model_trtr = learners[i].make();
            model_trtr->fit(x_real, y_real, space.classes.size(), derive_seed(seed, 2 * i));
            auto model_tstr = learners[i].make();
            model_tstr->fit(x_synth, y_synth, space.classes.size(), derive_seed(seed, 2 * i));
            const auto rank_trtr =
                permutation_importance(*model_trtr, encoder, real_test, target, space, cfg.pfi_metric,
                                       cfg.pfi_permutations, derive_seed(seed, 100 + i));
            const auto rank_tstr =
                permutation_importance(*model_tstr, encoder, real_test, target, space, cfg.pfi_metric,
                                       cfg.pfi_permutations, derive_seed(seed, 100 + i));
            entry["trtr"] = to_json(rank_trtr);
            entry["tstr"] = to_json(rank_tstr);
            entry["rbo"] = to_json(rbo(rank_trtr.ranked_features, rank_tstr.ranked_features, cfg.rbo_p));
        } catch (const Error& e) {
            entry["error"] = e.what();
        }
        pfi[learners[i].name] = std::move(entry);
    }
    out["pfi"] = std::move(pfi);
    out["pfi_metric"] = to_string(cfg.pfi_metric);
    out["rbo_p"] = cfg.rbo_p;
    json learner_specs = json::object();
    for (const auto& spec : learners) {
        json params = json::object();
        for (const auto& [key, value] : spec.hyperparameters) params[key] = value;
        learner_specs[spec.name] = {{"kind", spec.kind}, {"hyperparameters", std::move(params)}};
    }
    out["learners"] = std::move(learner_specs);
    return out;
}

inline json privacy_block(const PipelineConfig& cfg, const Table& real_full, const Table& real_train,
                          const Table& real_test, const Table& synth, std::uint64_t seed) {
    json out;
    const HeomEncoder encoder = HeomEncoder::fit(real_train);
    out["encoder_fingerprint"] = encoder.fingerprint();
    out["dcr"] = to_json(dcr_rpr(encoder, real_train, real_test, synth));

    const EncodedMatrix x_train = encoder.encode(real_train);
    const EncodedMatrix x_synth = encoder.encode(synth);
    const RadiusIndex index = RadiusIndex::build(x_train, 2);
    out["identifiability"] = identifiability(index, x_synth);
    out["eps_any_vs_train"] = eps_any(index, x_synth);

    const auto quasi_ids = resolved_quasi_ids(cfg, real_full.schema());
    const auto sensitives = resolved_sensitives(cfg, real_full.schema());
    out["quasi_identifiers"] = quasi_ids;
    out["sensitive"] = sensitives;
    std::vector<std::string> categorical_qids;
    for (const auto& q : quasi_ids) {
        if (real_full.kind(q) == ColumnKind::categorical) categorical_qids.push_back(q);
    }
    std::vector<std::string> categorical_sensitives;
    for (const auto& s : sensitives) {
        if (real_full.kind(s) == ColumnKind::categorical) categorical_sensitives.push_back(s);
    }

    if (!categorical_qids.empty() && !categorical_sensitives.empty()) {
        out["cap"] = to_json(cap_report(real_test, synth, categorical_qids, categorical_sensitives));
        json ldiv = json::object();
        for (const auto& s : categorical_sensitives) {
            ldiv[s] = {
                {"real", to_json(l_diversity(real_full, categorical_qids, s))},
                {"synthetic", to_json(l_diversity(synth, categorical_qids, s))},
            };
        }
        out["l_diversity"] = std::move(ldiv);
    } else {
        out["cap"] = nullptr;
        out["l_diversity"] = nullptr;
    }

    if (!quasi_ids.empty() && !sensitives.empty()) {
        json aia = json::array();
        for (const auto& s : sensitives) {
            try {
                if (real_full.kind(s) == ColumnKind::categorical) {
                    aia.push_back(to_json(aia_classification(synth, real_test, quasi_ids, s, nullptr,
                                                             derive_seed(seed, fnv1a(s)))));
                } else {
                    aia.push_back(to_json(aia_regression(synth, real_test, quasi_ids, s)));
                }
            } catch (const Error& e) {
                aia.push_back(json{{"target", s}, {"error", e.what()}});
            }
        }
        out["aia"] = std::move(aia);
    } else {
        out["aia"] = nullptr;
    }
    return out;
}

inline json geometry_block(const PipelineConfig& cfg, const Table& real_train, const Table& synth) {
    const auto numeric_names = real_train.numeric_names();
    if (numeric_names.empty() || real_train.rows() <= cfg.density_k) return nullptr;

    // Standardization is fit on the real training slice.
    std::vector<double> means, stds;
    for (const auto& name : numeric_names) {
        const auto& values = real_train.numeric(name);
        means.push_back(mean_of(values));
        stds.push_back(values.size() >= 2 ? std::sqrt(sample_variance(values)) : 0.0);
    }
    auto standardize = [&](const Table& t) {
        EncodedMatrix m;
        m.rows = t.rows();
        m.cols = numeric_names.size();
        m.data.assign(m.rows * m.cols, 0.0);
        for (std::size_t c = 0; c < numeric_names.size(); ++c) {
            const auto& values = t.numeric(numeric_names[c]);
            const double denom = stds[c] > 0.0 ? stds[c] : 1.0;
            for (std::size_t r = 0; r < m.rows; ++r) m.data[r * m.cols + c] = (values[r] - means[c]) / denom;
        }
        return m;
    };

    const EncodedMatrix x_real = standardize(real_train);
    const EncodedMatrix x_synth = standardize(synth);
    json out;
    try {
        const auto real_stats = local_density_stats(x_real, x_real, cfg.density_k, true);
        out["real"] = {{"mean", real_stats.mean}, {"variance", real_stats.variance}};
        const auto synth_stats = local_density_stats(x_real, x_synth, cfg.density_k, false);
        out["synthetic"] = {{"mean", synth_stats.mean}, {"variance", synth_stats.variance}};
        out["k"] = cfg.density_k;
    } catch (const Error& e) {
        out = json{{"error", e.what()}};
    }
    return out;
}

}  // namespace detail

// One (real, synthetic) evaluation cell: fidelity vs the full real table,
// utility on the train/test protocol, privacy proxies against train/holdout.
inline json metrics_cell(const PipelineConfig& cfg, const Table& real_full, const Table& real_train,
                         const Table& real_test, const Table& synth, std::uint64_t seed) {
    json cell = json::object();
    if (cfg.fidelity) cell["fidelity"] = detail::fidelity_block(cfg, real_full, synth);
    if (cfg.utility) {
        Table synth_train = synth;
        if (synth.rows() >= 2) {
            synth_train = split(synth, SplitSpec{cfg.split_fraction, cfg.seed}).first;
        }
        cell["utility"] = detail::utility_block(cfg, real_train, real_test, synth_train, derive_seed(seed, 1));
    }
    if (cfg.privacy) {
        cell["privacy"] = detail::privacy_block(cfg, real_full, real_train, real_test, synth, derive_seed(seed, 2));
    }
    cell["geometry"] = detail::geometry_block(cfg, real_train, synth);
    cell["synthetic_rows"] = synth.rows();
    return cell;
}

// ---- CSV summaries -------------------------------------------------------------

namespace detail {

// All numbers in the CSV summaries are printed through json::dump so they match
// the report values byte for byte.
inline std::string number_or(const json& j, const char* fallback = "") {
    if (j.is_number()) return json(j).dump();
    return fallback;
}

inline json pointer_or_null(const json& cell, const std::string& pointer) {
    const auto ptr = json::json_pointer(pointer);
    if (cell.contains(ptr)) return cell.at(ptr);
    return nullptr;
}

inline std::vector<std::pair<std::string, std::string>> summary_metrics(const json& cell) {
    std::vector<std::pair<std::string, std::string>> rows;
    auto add = [&](const std::string& metric, const std::string& pointer) {
        const json value = pointer_or_null(cell, pointer);
        if (value.is_number()) rows.emplace_back(metric, json(value).dump());
    };
    add("total_js_bits", "/fidelity/total_js_bits");
    add("total_js_delta_vs_baseline", "/fidelity/total_js_delta_vs_baseline");
    add("total_js_pct_delta_vs_baseline", "/fidelity/total_js_pct_delta_vs_baseline");
    add("mean_js_distance", "/fidelity/mean_js_distance");
    add("mean_cohens_d", "/fidelity/numeric_summary/mean_cohens_d");
    add("median_abs_delta_med", "/fidelity/numeric_summary/median_abs_delta_med");
    add("median_abs_delta_low", "/fidelity/numeric_summary/median_abs_delta_low");
    add("median_abs_delta_high", "/fidelity/numeric_summary/median_abs_delta_high");
    add("mean_abs_delta_p_low_pp", "/fidelity/numeric_summary/mean_abs_delta_p_low_pp");
    add("mean_abs_delta_p_high_pp", "/fidelity/numeric_summary/mean_abs_delta_p_high_pp");
    add("frobenius_pearson", "/fidelity/dependence/pearson/frobenius_diff");
    add("frobenius_cramers_v", "/fidelity/dependence/cramers_v/frobenius_diff");
    add("frobenius_eta2", "/fidelity/dependence/eta2/frobenius_diff");
    add("spearman_pearson", "/fidelity/dependence/pearson/spearman");
    add("spearman_cramers_v", "/fidelity/dependence/cramers_v/spearman");
    add("spearman_eta2", "/fidelity/dependence/eta2/spearman");
    add("gap_accuracy", "/utility/gap/accuracy");
    add("gap_balanced_accuracy", "/utility/gap/balanced_accuracy");
    add("gap_weighted_f1", "/utility/gap/weighted_f1");
    add("gap_roc_auc", "/utility/gap/roc_auc");
    add("gap_log_loss", "/utility/gap/log_loss");
    add("rpr", "/privacy/dcr/rpr");
    add("delta_rpr", "/privacy/dcr/delta_rpr");
    add("identifiability", "/privacy/identifiability");
    add("eps_any_vs_train", "/privacy/eps_any_vs_train");
    add("cap_median_protection", "/privacy/cap/median_protection");
    add("filter_final_eps", "/filter/final_eps");
    add("filter_replacements", "/filter/replacements");
    add("filter_proposals", "/filter/proposals");
    return rows;
}

inline std::string cell_tau_label(const json& cell) {
    const auto& tau = cell.at("tau");
    return tau.is_null() ? "baseline" : json(tau).dump();
}

inline std::string summary_csv(const json& results) {
    std::string out = "variant,tau,metric,value\n";
    const std::string variant = results.value("variant", "v0");
    for (const auto& cell : results.at("cells")) {
        if (cell.contains("error")) continue;
        const std::string tau = cell_tau_label(cell);
        for (const auto& [metric, value] : summary_metrics(cell)) {
            out += variant + "," + tau + "," + metric + "," + value + "\n";
        }
    }
    return out;
}

inline std::string total_js_csv(const json& results) {
    std::string out = "variant,tau,total_js_bits,delta_vs_baseline,pct_delta_vs_baseline\n";
    const std::string variant = results.value("variant", "v0");
    for (const auto& cell : results.at("cells")) {
        if (cell.contains("error")) continue;
        const json js = pointer_or_null(cell, "/fidelity/total_js_bits");
        if (!js.is_number()) continue;
        out += variant + "," + cell_tau_label(cell) + "," + json(js).dump() + "," +
               number_or(pointer_or_null(cell, "/fidelity/total_js_delta_vs_baseline")) + "," +
               number_or(pointer_or_null(cell, "/fidelity/total_js_pct_delta_vs_baseline")) + "\n";
    }
    return out;
}

inline std::string best_by_family_csv(const json& results) {
    std::string out =
        "family,baseline_frobenius,best_frobenius,best_frobenius_tau,frobenius_pct_delta,"
        "baseline_spearman,best_spearman,best_spearman_tau,spearman_delta\n";
    if (!results.contains("best_by_family")) return out;
    for (const auto& [family, entry] : results.at("best_by_family").items()) {
        out += family + "," + number_or(pointer_or_null(entry, "/baseline_frobenius")) + "," +
               number_or(pointer_or_null(entry, "/best_frobenius")) + "," +
               number_or(pointer_or_null(entry, "/best_frobenius_tau"), "baseline") + "," +
               number_or(pointer_or_null(entry, "/frobenius_pct_delta")) + "," +
               number_or(pointer_or_null(entry, "/baseline_spearman")) + "," +
               number_or(pointer_or_null(entry, "/best_spearman")) + "," +
               number_or(pointer_or_null(entry, "/best_spearman_tau"), "baseline") + "," +
               number_or(pointer_or_null(entry, "/spearman_delta")) + "\n";
    }
    return out;
}

inline void write_summaries(const PipelineConfig& cfg, const json& results) {
    std::filesystem::create_directories(cfg.output_dir);
    write_file(cfg.output_dir + "/summary.csv", summary_csv(results));
    write_file(cfg.output_dir + "/total_js_vs_tau.csv", total_js_csv(results));
    write_file(cfg.output_dir + "/best_by_family.csv", best_by_family_csv(results));
}

// Fills per-cell deltas vs the baseline cell and the best-by-family table.
inline void annotate_sweep_results(json& results) {
    json* baseline = nullptr;
    for (auto& cell : results.at("cells")) {
        if (!cell.contains("error") && cell.at("tau").is_null()) {
            baseline = &cell;
            break;
        }
    }
    if (baseline) {
        const json base_js = pointer_or_null(*baseline, "/fidelity/total_js_bits");
        const json base_rpr = pointer_or_null(*baseline, "/privacy/dcr/rpr");
        for (auto& cell : results.at("cells")) {
            if (cell.contains("error") || cell.at("tau").is_null()) continue;
            if (base_js.is_number() && pointer_or_null(cell, "/fidelity/total_js_bits").is_number()) {
                const double delta = cell["fidelity"]["total_js_bits"].get<double>() - base_js.get<double>();
                cell["fidelity"]["total_js_delta_vs_baseline"] = delta;
                if (base_js.get<double>() != 0.0) {
                    cell["fidelity"]["total_js_pct_delta_vs_baseline"] = 100.0 * delta / base_js.get<double>();
                }
            }
            if (base_rpr.is_number() && pointer_or_null(cell, "/privacy/dcr/rpr").is_number()) {
                cell["privacy"]["dcr"]["delta_rpr"] =
                    cell["privacy"]["dcr"]["rpr"].get<double>() - base_rpr.get<double>();
            }
        }
    }

    json best = json::object();
    for (const char* family : {"pearson", "cramers_v", "eta2"}) {
        json entry = json::object();
        json base_frob = nullptr, base_spear = nullptr;
        if (baseline) {
            base_frob = pointer_or_null(*baseline, std::string("/fidelity/dependence/") + family + "/frobenius_diff");
            base_spear = pointer_or_null(*baseline, std::string("/fidelity/dependence/") + family + "/spearman");
        }
        if (base_frob.is_number()) entry["baseline_frobenius"] = base_frob;
        if (base_spear.is_number()) entry["baseline_spearman"] = base_spear;
        json best_frob = nullptr, best_frob_tau = nullptr;
        json best_spear = nullptr, best_spear_tau = nullptr;
        for (const auto& cell : results.at("cells")) {
            if (cell.contains("error") || cell.at("tau").is_null()) continue;
            const json frob = pointer_or_null(cell, std::string("/fidelity/dependence/") + family + "/frobenius_diff");
            if (frob.is_number() && (!best_frob.is_number() || frob.get<double>() < best_frob.get<double>())) {
                best_frob = frob;
                best_frob_tau = cell.at("tau");
            }
            const json spear = pointer_or_null(cell, std::string("/fidelity/dependence/") + family + "/spearman");
            if (spear.is_number() && (!best_spear.is_number() || spear.get<double>() > best_spear.get<double>())) {
                best_spear = spear;
                best_spear_tau = cell.at("tau");
            }
        }
        if (best_frob.is_number()) {
            entry["best_frobenius"] = best_frob;
            entry["best_frobenius_tau"] = best_frob_tau;
            if (base_frob.is_number() && base_frob.get<double>() != 0.0) {
                entry["frobenius_pct_delta"] =
                    100.0 * (best_frob.get<double>() - base_frob.get<double>()) / base_frob.get<double>();
            }
        }
        if (best_spear.is_number()) {
            entry["best_spearman"] = best_spear;
            entry["best_spearman_tau"] = best_spear_tau;
            if (base_spear.is_number()) {
                entry["spearman_delta"] = best_spear.get<double>() - base_spear.get<double>();
            }
        }
        if (!entry.empty()) best[family] = std::move(entry);
    }
    if (!best.empty()) results["best_by_family"] = std::move(best);
}

}  // namespace detail

// ---- commands ------------------------------------------------------------------

inline int cmd_detect(const PipelineConfig& cfg, std::ostream& log) {
    const auto data = load_pipeline_data(cfg, true);
    const auto missing = get_mode_collapse(data.real_full, *data.synthetic);
    json results;
    results["missing_modes"] = to_json(missing);
    std::size_t total = 0;
    for (const auto& [column, levels] : missing) total += levels.size();
    results["missing_level_count"] = total;
    write_report(cfg, make_report(cfg, std::move(results)), "detect.json");
    log << (total == 0 ? "no missing modes" : std::to_string(total) + " missing level(s)") << "\n";
    return total == 0 ? 0 : 1;
}

inline int cmd_patch(const PipelineConfig& cfg, std::ostream& log) {
    const auto data = load_pipeline_data(cfg, false);
    const auto gen = build_patchable_generator(cfg, data.real_train);
    const auto result = patch_loop(*gen, data.real_full, cfg.patch_batch, cfg.patch_m,
                                   cfg.patch_max_rounds, cfg.seed);
    std::filesystem::create_directories(cfg.output_dir);
    emit_csv(result.synthetic, cfg.output_dir + "/patched.csv");
    json results;
    results["mode_repair"] = to_json(result.metrics);
    results["converged"] = result.converged;
    results["rounds"] = result.rounds;
    write_report(cfg, make_report(cfg, std::move(results)), "patch_report.json");
    log << "patched " << result.metrics.patched_levels << " level(s) in " << result.rounds << " round(s)\n";
    return result.converged ? 0 : 3;
}

inline int cmd_filter(const PipelineConfig& cfg, std::ostream& log) {
    PipelineConfig local = cfg;
    normalize_taus(local);
    const auto data = load_pipeline_data(local, false);
    const auto gen = build_generator(local, data.real_train);
    const auto report = run_filter(data.real_train, *gen, filter_config_from(local, local.taus.front()));
    std::filesystem::create_directories(local.output_dir);
    emit_csv(report.synthetic, local.output_dir + "/filtered.csv");
    json results;
    results["filter"] = to_json(report);
    write_report(local, make_report(local, std::move(results)), "filter_report.json");
    log << "final eps " << report.final_eps << " (" << to_string(report.feasibility) << ")\n";
    return report.feasibility == Feasibility::met_threshold ? 0 : 3;
}

inline int cmd_eval(const PipelineConfig& cfg, std::ostream& log) {
    const auto data = load_pipeline_data(cfg, true);
    json results;
    results["variant"] = to_string(cfg.variant);
    json cell = metrics_cell(cfg, data.real_full, data.real_train, data.real_test, *data.synthetic,
                             derive_seed(cfg.seed, 0x6576616cULL));
    cell["tau"] = nullptr;
    results["cells"] = json::array({std::move(cell)});
    const json report = make_report(cfg, std::move(results));
    write_report(cfg, report, "report.json");
    detail::write_summaries(cfg, report.at("results"));
    log << "evaluation written to " << cfg.output_dir << "/report.json\n";
    return 0;
}

inline int cmd_sweep(const PipelineConfig& cfg, std::ostream& log) {
    PipelineConfig local = cfg;
    normalize_taus(local);
    const auto data = load_pipeline_data(local, false);
    const auto gen = build_generator(local, data.real_train);

    const FilterConfig base = filter_config_from(local, local.taus.front());
    const auto runs = sweep(data.real_train, *gen, local.taus, base);

    struct CellSlot {
        json cell;
    };
    const std::size_t baseline_cells = local.include_baseline ? 1 : 0;
    std::vector<CellSlot> slots(runs.size() + baseline_cells);

    parallel_for(slots.size(), [&](std::size_t slot) {
        json cell;
        try {
            if (local.include_baseline && slot == 0) {
                const Table baseline_sample =
                    gen->sample(local.sample_size, derive_seed(local.seed, 0x62617365ULL));
                cell = metrics_cell(local, data.real_full, data.real_train, data.real_test, baseline_sample,
                                    derive_seed(local.seed, 0x62617365ULL));
                cell["tau"] = nullptr;
            } else {
                const auto& [tau, report] = runs[slot - baseline_cells];
                cell = metrics_cell(local, data.real_full, data.real_train, data.real_test, report.synthetic,
                                    derive_seed(local.seed, 1000 + slot));
                cell["tau"] = tau;
                cell["filter"] = to_json(report);
            }
        } catch (const Error& e) {
            cell = json::object();
            cell["tau"] = (local.include_baseline && slot == 0)
                              ? json(nullptr)
                              : json(runs[slot - baseline_cells].first);
            cell["error"] = e.what();
        }
        slots[slot].cell = std::move(cell);
    });

    std::filesystem::create_directories(local.output_dir);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        emit_csv(runs[i].second.synthetic,
                 local.output_dir + "/filtered_tau" + json(runs[i].first).dump() + ".csv");
    }

    json results;
    results["variant"] = to_string(local.variant);
    results["taus"] = local.taus;
    json cells = json::array();
    std::size_t failed = 0;
    for (auto& slot : slots) {
        if (slot.cell.contains("error")) ++failed;
        cells.push_back(std::move(slot.cell));
    }
    results["cells"] = std::move(cells);
    detail::annotate_sweep_results(results);
    const json report = make_report(local, std::move(results));
    write_report(local, report, "report.json");
    detail::write_summaries(local, report.at("results"));
    log << "sweep over " << runs.size() << " tau value(s)"
        << (failed ? (", " + std::to_string(failed) + " cell(s) failed") : "") << "\n";
    return failed == 0 ? 0 : 3;
}

inline int cmd_report(const PipelineConfig& cfg, std::ostream& log) {
    const std::string path = cfg.report_file.empty() ? cfg.output_dir + "/report.json" : cfg.report_file;
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open report " + path);
    json report = json::parse(in, nullptr, true);
    if (!report.contains("results")) fail(Errc::io_error, "not a synthkit report: " + path);
    detail::write_summaries(cfg, report.at("results"));
    log << "summaries rewritten from " << path << "\n";
    return 0;
}

inline int exit_code_for(const Error& error) {
    switch (error.code()) {
        case Errc::non_convergence:
            return 3;
        case Errc::generator_failure:
            return 4;
        case Errc::zero_distance:
            return 4;
        default:
            return 2;  // input / configuration problem
    }
}

}  // namespace synthkit
