#include "lpanet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lpanet/csv.hpp"
#include "lpanet/errors.hpp"
#include "lpanet/rng.hpp"

namespace lpanet {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
    if (input_path.empty()) throw ConfigError("input_path is required");
    if (output_dir.empty()) throw ConfigError("output_dir is required");
    if (classification_vars.empty()) throw ConfigError("classification_vars must be non-empty");
    if (k_range.lo < 1 || k_range.hi < k_range.lo)
        throw ConfigError("k_range must satisfy 1 <= lo <= hi");
    if (models.empty()) throw ConfigError("models must be non-empty");
    for (int m : models)
        if (m < 1 || m > 6) throw ConfigError("models entries must be 1..6");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
    if (gamma < 0.0) throw ConfigError("gamma must be non-negative");
    if (!(spurious_r2_floor >= 0.0)) throw ConfigError("spurious_r2_floor must be >= 0");
    if (!responses_are_posteriors && custom_responses.empty())
        throw ConfigError("importance_responses lists no columns");
    std::set<std::string> seen;
    for (const PredictorGroup& g : predictor_groups) {
        if (g.name.empty() || g.columns.empty())
            throw ConfigError("predictor_groups entries need a name and columns");
        for (const std::string& c : g.columns)
            if (!seen.insert(c).second)
                throw ConfigError("column '" + c + "' appears in two predictor groups");
    }
}

namespace {

std::vector<std::string> string_list(const json& j, const std::string& key) {
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) throw ConfigError(key + " must be a list of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

} // namespace

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    static const std::set<std::string> known = {
        "input_path",        "classification_vars", "illustrative_quant",
        "illustrative_qual", "importance_responses", "predictor_groups",
        "k_range",           "models",              "gamma",
        "bootstrap_B",       "seed",                "output_dir",
        "alpha",             "delimiter",           "standardize_classification",
        "spurious_r2_floor", "exclude_spurious",    "network_vars",
        "selection",         "em_starts",           "em_max_iter",
        "em_tol",            "grid_size",           "dot_threshold",
        "threads"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

    PipelineConfig cfg;
    try {
        cfg.input_path = j.value("input_path", std::string());
        cfg.output_dir = j.value("output_dir", std::string());
        if (j.contains("classification_vars"))
            cfg.classification_vars = string_list(j["classification_vars"], "classification_vars");
        if (j.contains("illustrative_quant"))
            cfg.illustrative_quant = string_list(j["illustrative_quant"], "illustrative_quant");
        if (j.contains("illustrative_qual"))
            cfg.illustrative_qual = string_list(j["illustrative_qual"], "illustrative_qual");
        if (j.contains("importance_responses")) {
            const json& r = j["importance_responses"];
            if (r.is_string()) {
                if (r.get<std::string>() != "posteriors")
                    throw ConfigError("importance_responses must be \"posteriors\" or a list");
                cfg.responses_are_posteriors = true;
            } else {
                cfg.responses_are_posteriors = false;
                cfg.custom_responses = string_list(r, "importance_responses");
            }
        }
        if (j.contains("predictor_groups")) {
            for (const auto& entry : j["predictor_groups"]) {
                if (entry.is_string()) {
                    cfg.predictor_groups.push_back(
                        {entry.get<std::string>(), {entry.get<std::string>()}});
                } else if (entry.is_object()) {
                    PredictorGroup g;
                    g.name = entry.at("name").get<std::string>();
                    g.columns = string_list(entry.at("columns"), "predictor_groups.columns");
                    cfg.predictor_groups.push_back(std::move(g));
                } else {
                    throw ConfigError("predictor_groups entries must be strings or objects");
                }
            }
        }
        if (j.contains("k_range")) {
            const json& r = j["k_range"];
            if (!r.is_array() || r.size() != 2) throw ConfigError("k_range must be [lo, hi]");
            cfg.k_range.lo = r[0].get<std::size_t>();
            cfg.k_range.hi = r[1].get<std::size_t>();
        }
        if (j.contains("models")) {
            cfg.models.clear();
            for (const auto& m : j["models"]) cfg.models.push_back(m.get<int>());
        }
        cfg.gamma = j.value("gamma", cfg.gamma);
        cfg.bootstrap_B = j.value("bootstrap_B", cfg.bootstrap_B);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.alpha = j.value("alpha", cfg.alpha);
        if (j.contains("delimiter")) {
            const std::string d = j["delimiter"].get<std::string>();
            if (d.size() != 1) throw ConfigError("delimiter must be a single character");
            cfg.delimiter = d[0];
        }
        cfg.standardize_classification =
            j.value("standardize_classification", cfg.standardize_classification);
        cfg.spurious_r2_floor = j.value("spurious_r2_floor", cfg.spurious_r2_floor);
        cfg.exclude_spurious = j.value("exclude_spurious", cfg.exclude_spurious);
        if (j.contains("network_vars"))
            cfg.network_vars = string_list(j["network_vars"], "network_vars");
        if (j.contains("selection")) {
            const std::string s = j["selection"].get<std::string>();
            if (s == "rank_aggregate")
                cfg.selection = SelectionStrategy::RankAggregate;
            else if (s == "best_bic")
                cfg.selection = SelectionStrategy::BestBIC;
            else
                throw ConfigError("selection must be rank_aggregate or best_bic");
        }
        cfg.em.n_starts = j.value("em_starts", cfg.em.n_starts);
        cfg.em.max_iter = j.value("em_max_iter", cfg.em.max_iter);
        cfg.em.tol = j.value("em_tol", cfg.em.tol);
        cfg.grid_size = j.value("grid_size", cfg.grid_size);
        cfg.dot_threshold = j.value("dot_threshold", cfg.dot_threshold);
        cfg.threads = j.value("threads", cfg.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string export_dot(const Network& net, double threshold) {
    std::ostringstream out;
    out << "graph network {\n";
    out << "  node [shape=ellipse];\n";
    for (const std::string& name : net.node_names) out << "  \"" << name << "\";\n";

    struct DotEdge {
        std::string a, b;
        double w;
    };
    std::vector<DotEdge> edges;
    for (std::size_t i = 0; i < net.n_nodes(); ++i) {
        for (std::size_t j = i + 1; j < net.n_nodes(); ++j) {
            const double w = net.weights.at(i, j);
            if (w == 0.0 || std::abs(w) < threshold) continue;
            auto names = std::minmax(net.node_names[i], net.node_names[j]);
            edges.push_back({names.first, names.second, w});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const DotEdge& x, const DotEdge& y) {
        return std::tie(x.a, x.b) < std::tie(y.a, y.b);
    });
    for (const DotEdge& e : edges) {
        out << "  \"" << e.a << "\" -- \"" << e.b << "\" [color=\""
            << (e.w > 0.0 ? "blue" : "red") << "\", penwidth="
            << format_double(1.0 + 8.0 * std::abs(e.w)) << "];\n";
    }
    out << "}\n";
    return out.str();
}

namespace {

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
}

void ensure_output_dir(const PipelineConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw UnreadableFile("cannot create output dir '" + cfg.output_dir + "'");
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UnreadableFile("cannot write '" + path + "'");
    out << text;
}

void track(std::vector<std::string>& files, const std::string& name) {
    if (std::find(files.begin(), files.end(), name) == files.end()) files.push_back(name);
}

LoadResult load_input(const PipelineConfig& cfg) {
    return load_table(cfg.input_path, std::nullopt, cfg.delimiter);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> network_variables(const PipelineConfig& cfg) {
    if (!cfg.network_vars.empty()) return cfg.network_vars;
    std::vector<std::string> vars = cfg.classification_vars;
    for (const std::string& v : cfg.illustrative_quant)
        if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
    return vars;
}

std::vector<std::string> continuous_variables(const PipelineConfig& cfg) {
    // Pearson targets for the membership-correlation table
    return network_variables(cfg);
}

Matrix read_posteriors_csv(const PipelineConfig& cfg) {
    const LoadResult lr = load_table(out_path(cfg, "posteriors.csv"));
    const Dataset& ds = lr.dataset;
    std::size_t K = 0;
    while (ds.has_column("prob_profile_" + std::to_string(K + 1))) ++K;
    if (K == 0) throw ParseError("posteriors.csv has no prob_profile_* columns");
    Matrix tau(ds.n_rows(), K);
    for (std::size_t k = 0; k < K; ++k) {
        const Column& col = ds.column("prob_profile_" + std::to_string(k + 1));
        for (std::size_t i = 0; i < ds.n_rows(); ++i) tau.at(i, k) = col.nums[i];
    }
    return tau;
}

std::vector<int> read_labels_csv(const PipelineConfig& cfg) {
    const LoadResult lr = load_table(out_path(cfg, "classes.csv"));
    const Column& col = lr.dataset.column("label");
    std::vector<int> labels(lr.dataset.n_rows());
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = static_cast<int>(std::lround(col.nums[i]));
    return labels;
}

json profile_status_json(const std::vector<ProfileStatus>& profiles, double floor) {
    json j;
    j["r2_floor"] = floor;
    j["profiles"] = json::array();
    for (const ProfileStatus& p : profiles) {
        json e;
        e["label"] = p.label;
        e["r_squared"] = p.r_squared;
        e["spurious"] = p.spurious;
        e["retained"] = p.retained;
        j["profiles"].push_back(e);
    }
    return j;
}

std::vector<ProfileStatus> read_profiles_json(const PipelineConfig& cfg) {
    std::ifstream in(out_path(cfg, "profiles.json"));
    if (!in) throw UnreadableFile("profiles.json not found; run the importance stage first");
    json j;
    in >> j;
    std::vector<ProfileStatus> out;
    for (const auto& e : j.at("profiles")) {
        ProfileStatus p;
        p.label = e.at("label").get<int>();
        p.r_squared = e.at("r_squared").get<double>();
        p.spurious = e.at("spurious").get<bool>();
        p.retained = e.at("retained").get<bool>();
        out.push_back(p);
    }
    return out;
}

std::vector<ResponseColumn> build_responses(const PipelineConfig& cfg, const Dataset& ds,
                                            const Matrix& posteriors) {
    std::vector<ResponseColumn> responses;
    if (cfg.responses_are_posteriors) {
        for (std::size_t k = 0; k < posteriors.cols; ++k) {
            ResponseColumn r;
            r.name = "prob_profile_" + std::to_string(k + 1);
            r.values.resize(posteriors.rows);
            for (std::size_t i = 0; i < posteriors.rows; ++i) r.values[i] = posteriors.at(i, k);
            responses.push_back(std::move(r));
        }
    } else {
        for (const std::string& name : cfg.custom_responses) {
            const Column& col = ds.column(name);
            if (col.spec.kind != ColumnKind::Numeric)
                throw ParseError("response column '" + name + "' is not numeric");
            responses.push_back({name, col.nums});
        }
    }
    return responses;
}

// Expands categorical predictor-group columns into indicator blocks and
// returns the dataset plus effective groups aligned with cfg.predictor_groups.
struct PreparedPredictors {
    Dataset dataset;
    std::vector<PredictorGroup> groups;
};

PreparedPredictors prepare_predictors(const PipelineConfig& cfg, const Dataset& ds) {
    std::vector<std::string> categorical;
    for (const PredictorGroup& g : cfg.predictor_groups) {
        for (const std::string& col : g.columns) {
            if (ds.column(col).spec.kind == ColumnKind::Categorical)
                categorical.push_back(col);
        }
    }
    PreparedPredictors out;
    std::vector<PredictorGroup> encoded_groups;
    if (categorical.empty()) {
        out.dataset = ds;
    } else {
        EncodeResult enc = encode_categoricals(ds, categorical);
        out.dataset = std::move(enc.dataset);
        encoded_groups = std::move(enc.groups);
    }
    for (const PredictorGroup& g : cfg.predictor_groups) {
        PredictorGroup eff;
        eff.name = g.name;
        for (const std::string& col : g.columns) {
            const auto it = std::find_if(encoded_groups.begin(), encoded_groups.end(),
                                         [&](const PredictorGroup& e) { return e.name == col; });
            if (it != encoded_groups.end())
                eff.columns.insert(eff.columns.end(), it->columns.begin(), it->columns.end());
            else
                eff.columns.push_back(col);
        }
        out.groups.push_back(std::move(eff));
    }
    return out;
}

} // namespace

LpaStage stage_fit_lpa(const PipelineConfig& config, std::vector<std::string>& files) {
    ensure_output_dir(config);
    LpaStage stage;
    const LoadResult lr = load_input(config);
    stage.dropped_rows = lr.dropped_rows;

    Dataset working = lr.dataset;
    if (config.standardize_classification)
        working = standardize(working, config.classification_vars).dataset;
    const Matrix X = working.numeric_matrix(config.classification_vars);

    std::vector<Parameterization> params;
    params.reserve(config.models.size());
    for (int m : config.models) params.push_back(Parameterization::from_model_number(m));

    EmSettings em = config.em;
    em.threads = config.threads;
    em.seed = Rng::derive_seed(config.seed, Rng::fnv1a("lpa-sweep"));
    stage.sweep = sweep_models(X, config.k_range, params, em);
    stage.selected = select_model(stage.sweep, config.selection);
    const FittedMixture& best = *stage.sweep.entries[stage.selected.entry_index].fit;
    stage.classes = classify(best);
    stage.posteriors = best.posteriors;

    {
        std::ostringstream out;
        write_sweep_csv(stage.sweep, out);
        write_text_file(out_path(config, "sweep.csv"), out.str());
        track(files, "sweep.csv");
    }
    {
        std::ostringstream out;
        out << "row_id,label,max_posterior\n";
        for (std::size_t i = 0; i < stage.classes.labels.size(); ++i) {
            const int label = stage.classes.labels[i];
            out << (i + 1) << ',' << label << ','
                << fmt17(stage.posteriors.at(i, static_cast<std::size_t>(label) - 1)) << '\n';
        }
        write_text_file(out_path(config, "classes.csv"), out.str());
        track(files, "classes.csv");
    }
    {
        std::ostringstream out;
        out << "row_id";
        for (std::size_t k = 0; k < stage.posteriors.cols; ++k) out << ",prob_profile_" << (k + 1);
        out << '\n';
        for (std::size_t i = 0; i < stage.posteriors.rows; ++i) {
            out << (i + 1);
            for (std::size_t k = 0; k < stage.posteriors.cols; ++k)
                out << ',' << fmt17(stage.posteriors.at(i, k));
            out << '\n';
        }
        write_text_file(out_path(config, "posteriors.csv"), out.str());
        track(files, "posteriors.csv");
    }
    return stage;
}

DescribeStage stage_describe(const PipelineConfig& config, std::vector<std::string>& files) {
    ensure_output_dir(config);
    DescribeStage stage;
    const LoadResult lr = load_input(config);
    stage.dropped_rows = lr.dropped_rows;
    const std::vector<int> labels = read_labels_csv(config);
    const Matrix posteriors = read_posteriors_csv(config);

    std::vector<std::string> illustrative = config.illustrative_quant;
    illustrative.insert(illustrative.end(), config.illustrative_qual.begin(),
                        config.illustrative_qual.end());
    stage.description = describe_profiles(lr.dataset, labels, illustrative, config.alpha);
    stage.correlations =
        membership_correlations(posteriors, lr.dataset, continuous_variables(config));

    {
        std::ostringstream out;
        write_description_csv(stage.description, out);
        write_text_file(out_path(config, "description.csv"), out.str());
        track(files, "description.csv");
    }
    {
        std::ostringstream out;
        write_correlations_csv(stage.correlations, out);
        write_text_file(out_path(config, "correlations.csv"), out.str());
        track(files, "correlations.csv");
    }
    return stage;
}

ImportanceStage stage_importance(const PipelineConfig& config, std::vector<std::string>& files) {
    ensure_output_dir(config);
    ImportanceStage stage;
    const LoadResult lr = load_input(config);
    stage.dropped_rows = lr.dropped_rows;
    const Matrix posteriors = read_posteriors_csv(config);
    if (config.predictor_groups.empty())
        throw ConfigError("predictor_groups must be set for the importance stage");

    const PreparedPredictors prepared = prepare_predictors(config, lr.dataset);
    const std::vector<ResponseColumn> responses =
        build_responses(config, prepared.dataset, posteriors);
    stage.importance = importance_matrix(responses, prepared.groups, prepared.dataset);

    if (config.responses_are_posteriors) {
        for (std::size_t k = 0; k < stage.importance.per_response.size(); ++k) {
            ProfileStatus p;
            p.label = static_cast<int>(k) + 1;
            p.r_squared = stage.importance.per_response[k].full_r_squared;
            p.spurious = p.r_squared < config.spurious_r2_floor;
            p.retained = !p.spurious || !config.exclude_spurious;
            stage.profiles.push_back(p);
        }
    } else {
        for (std::size_t k = 0; k < posteriors.cols; ++k)
            stage.profiles.push_back({static_cast<int>(k) + 1, 0.0, false, true});
    }

    {
        std::ostringstream out;
        write_importance_csv(stage.importance, out);
        write_text_file(out_path(config, "importance.csv"), out.str());
        track(files, "importance.csv");
    }
    write_text_file(out_path(config, "profiles.json"),
                    profile_status_json(stage.profiles, config.spurious_r2_floor).dump(2) + "\n");
    track(files, "profiles.json");
    return stage;
}

NetworkStage stage_network(const PipelineConfig& config, std::vector<std::string>& files) {
    ensure_output_dir(config);
    NetworkStage stage;
    const LoadResult lr = load_input(config);
    stage.dropped_rows = lr.dropped_rows;
    const std::vector<int> labels = read_labels_csv(config);
    const std::vector<ProfileStatus> profiles = read_profiles_json(config);

    const std::vector<std::string> vars = network_variables(config);
    NetworkSettings settings;
    settings.gamma = config.gamma;
    settings.grid_size = config.grid_size;

    const std::vector<GroupSlice> slices = split_by_group(lr.dataset, labels);
    for (const GroupSlice& slice : slices) {
        const auto status = std::find_if(profiles.begin(), profiles.end(),
                                         [&](const ProfileStatus& p) { return p.label == slice.label; });
        if (status != profiles.end() && !status->retained) continue;

        ProfileNetwork pn;
        pn.label = slice.label;
        const Matrix X = slice.dataset.numeric_matrix(vars);
        pn.network = estimate_network(X, vars, settings);
        pn.strengths = strength(pn.network);
        pn.betweenness_scores = betweenness(pn.network);
        if (config.bootstrap_B > 0) {
            const std::uint64_t seed = Rng::derive_seed(
                config.seed, Rng::fnv1a("bootstrap-" + std::to_string(slice.label)));
            pn.bootstrap = bootstrap_network(X, vars, config.bootstrap_B, settings, seed,
                                             config.threads);
        }
        stage.networks.push_back(std::move(pn));
    }

    for (const ProfileNetwork& pn : stage.networks) {
        const std::string base = "network_" + std::to_string(pn.label);
        {
            std::ostringstream out;
            write_network_csv(pn.network, out);
            write_text_file(out_path(config, base + ".csv"), out.str());
            track(files, base + ".csv");
        }
        write_text_file(out_path(config, base + ".dot"),
                        export_dot(pn.network, config.dot_threshold));
        track(files, base + ".dot");
    }
    {
        std::ostringstream out;
        out << "profile,node,strength,betweenness,strength_z,betweenness_z\n";
        for (const ProfileNetwork& pn : stage.networks) {
            auto zscores = [](const std::vector<double>& v) {
                const double n = static_cast<double>(v.size());
                KahanSum s;
                for (double x : v) s.add(x);
                const double mean = s.value() / n;
                KahanSum sq;
                for (double x : v) sq.add((x - mean) * (x - mean));
                const double sd = std::sqrt(sq.value() / (n > 1.0 ? n - 1.0 : 1.0));
                std::vector<double> z(v.size(), 0.0);
                if (sd > 0.0)
                    for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - mean) / sd;
                return z;
            };
            const std::vector<double> sz = zscores(pn.strengths);
            const std::vector<double> bz = zscores(pn.betweenness_scores);
            for (std::size_t i = 0; i < pn.network.n_nodes(); ++i) {
                out << pn.label << ',' << csv_quote(pn.network.node_names[i]) << ','
                    << format_double(pn.strengths[i]) << ','
                    << format_double(pn.betweenness_scores[i]) << ',' << format_double(sz[i])
                    << ',' << format_double(bz[i]) << '\n';
            }
        }
        write_text_file(out_path(config, "centrality.csv"), out.str());
        track(files, "centrality.csv");
    }
    if (config.bootstrap_B > 0) {
        std::ostringstream out;
        out << "profile,node_a,node_b,estimate,ci_low,ci_high\n";
        std::ostringstream diffs;
        diffs << "profile,edge1_a,edge1_b,edge2_a,edge2_b,significant\n";
        for (const ProfileNetwork& pn : stage.networks) {
            if (!pn.bootstrap) continue;
            const BootstrapReport& b = *pn.bootstrap;
            for (const EdgeInterval& e : b.edges) {
                out << pn.label << ',' << csv_quote(b.node_names[e.a]) << ','
                    << csv_quote(b.node_names[e.b]) << ',' << format_double(e.estimate) << ','
                    << format_double(e.lo) << ',' << format_double(e.hi) << '\n';
            }
            for (const EdgePairTest& t : b.pair_tests) {
                const EdgeInterval& e1 = b.edges[t.edge1];
                const EdgeInterval& e2 = b.edges[t.edge2];
                diffs << pn.label << ',' << csv_quote(b.node_names[e1.a]) << ','
                      << csv_quote(b.node_names[e1.b]) << ',' << csv_quote(b.node_names[e2.a])
                      << ',' << csv_quote(b.node_names[e2.b]) << ','
                      << (t.significant ? "true" : "false") << '\n';
            }
        }
        write_text_file(out_path(config, "bootstrap.csv"), out.str());
        track(files, "bootstrap.csv");
        write_text_file(out_path(config, "bootstrap_diffs.csv"), diffs.str());
        track(files, "bootstrap_diffs.csv");
    }
    return stage;
}

void write_manifest(const PipelineConfig& config, const std::vector<std::string>& files,
                    std::size_t dropped_rows, const std::string& status,
                    const std::string& failed_stage, const std::string& error) {
    json m;
    m["tool"] = "lpanet";
    m["version"] = kToolVersion;
    {
        // the only timestamped output; everything else is byte-reproducible
        std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m["created_utc"] = buf;
    }
    m["seed"] = config.seed;
    m["input_path"] = config.input_path;
    m["dropped_rows"] = dropped_rows;
    m["status"] = status;
    if (!failed_stage.empty()) {
        m["failed_stage"] = failed_stage;
        m["error"] = error;
    }
    m["files"] = files;
    write_text_file(out_path(config, "manifest.json"), m.dump(2) + "\n");
}

namespace {

json report_json(const PipelineConfig& config, const PipelineReport& report) {
    json j;
    j["seed"] = config.seed;
    j["version"] = kToolVersion;
    j["dropped_rows"] = report.dropped_rows;

    json sweep = json::array();
    for (const SweepEntry& e : report.sweep.entries) {
        json row;
        row["model"] = e.param.model_number();
        row["classes"] = e.K;
        row["converged"] = e.fit && e.fit->converged;
        if (e.report) {
            row["loglik"] = e.report->loglik;
            row["aic"] = e.report->aic;
            row["bic"] = e.report->bic;
            row["kic"] = e.report->kic;
            row["sabic"] = e.report->sabic;
            row["icl"] = e.report->icl;
            row["entropy"] = e.report->entropy;
        }
        if (!e.error.empty()) row["error"] = e.error;
        sweep.push_back(row);
    }
    j["sweep"] = sweep;
    j["selected"] = {{"model", report.selected.param.model_number()},
                     {"classes", report.selected.K}};
    j["class_sizes"] = report.class_sizes;

    json desc = json::array();
    for (const DescRow& row : report.description.rows) {
        desc.push_back({{"profile", row.profile},
                        {"variable", row.variable},
                        {"modality", row.modality},
                        {"v", row.v},
                        {"p", row.p},
                        {"in_profile", row.in_profile},
                        {"overall", row.overall},
                        {"flag", std::string(1, row.flag)}});
    }
    j["description"] = desc;

    json corr = json::array();
    for (const MembershipCorrelation& c : report.correlations)
        corr.push_back({{"profile", c.profile},
                        {"variable", c.variable},
                        {"r", c.r},
                        {"stars", c.stars}});
    j["correlations"] = corr;

    json imp;
    imp["groups"] = report.importance.group_names;
    imp["responses"] = json::array();
    for (const ImportanceReport& r : report.importance.per_response) {
        imp["responses"].push_back({{"response", r.response},
                                    {"r_squared", r.full_r_squared},
                                    {"shares", r.shares},
                                    {"pct_of_r2", r.pct_of_r2}});
    }
    imp["mean_influence"] = report.importance.mean_influence;
    j["importance"] = imp;

    json profs = json::array();
    for (const ProfileStatus& p : report.profiles)
        profs.push_back({{"label", p.label},
                         {"r_squared", p.r_squared},
                         {"spurious", p.spurious},
                         {"retained", p.retained}});
    j["profiles"] = profs;

    json nets = json::array();
    for (const ProfileNetwork& pn : report.networks) {
        json net;
        net["profile"] = pn.label;
        net["lambda"] = pn.network.lambda;
        net["nodes"] = pn.network.node_names;
        json edges = json::array();
        for (std::size_t a = 0; a < pn.network.n_nodes(); ++a)
            for (std::size_t b = a + 1; b < pn.network.n_nodes(); ++b)
                if (pn.network.weights.at(a, b) != 0.0)
                    edges.push_back({{"a", pn.network.node_names[a]},
                                     {"b", pn.network.node_names[b]},
                                     {"weight", pn.network.weights.at(a, b)}});
        net["edges"] = edges;
        net["strength"] = pn.strengths;
        net["betweenness"] = pn.betweenness_scores;
        if (pn.bootstrap) {
            net["bootstrap_B"] = pn.bootstrap->B;
            net["bootstrap_failed"] = pn.bootstrap->n_failed;
        }
        nets.push_back(net);
    }
    j["networks"] = nets;
    j["warnings"] = report.warnings;
    return j;
}

} // namespace

void write_demo_dataset(const std::string& path, std::size_t n, std::uint64_t seed) {
    MixtureSpec spec;
    spec.weights = {0.25, 0.15, 0.20, 0.25, 0.15};
    spec.means = {{0.0, 0.0, 0.0},
                  {8.0, 0.0, 0.0},
                  {0.0, 8.0, 0.0},
                  {0.0, 0.0, 8.0},
                  {8.0, 8.0, 8.0}};
    // chain-structured within-class covariance so the per-profile networks
    // have real x1-x2 and x2-x3 edges to estimate
    SymMatrix chain = SymMatrix::identity(3);
    chain.set(0, 1, 0.45);
    chain.set(1, 2, 0.45);
    spec.covariances.assign(5, chain);
    SampleResult sample = generate_mixture_sample(spec, n, seed);

    Rng rng = Rng(seed).child("illustrative");
    Column z;
    z.spec = {"z_num", ColumnKind::Numeric};
    z.nums.resize(n);
    Column grp;
    grp.spec = {"grp", ColumnKind::Categorical};
    grp.cats.resize(n);
    static const char* levels[3] = {"A", "B", "C"};
    const Column& x1 = sample.dataset.column("x1");
    for (std::size_t i = 0; i < n; ++i) {
        const int k = sample.labels[i];
        // between classes z tracks the class index; within a class it loads
        // on x1, giving the networks a z_num-x1 edge
        const double dev = x1.nums[i] - spec.means[static_cast<std::size_t>(k) - 1][0];
        z.nums[i] = 0.8 * static_cast<double>(k) + 0.6 * dev + 0.8 * rng.normal();
        // class-dependent level frequencies give the qualitative v-tests signal
        const double u = rng.uniform01();
        const double p_a = 0.1 + 0.1 * static_cast<double>(k); // 0.2 .. 0.6
        grp.cats[i] = u < p_a ? levels[0] : (u < p_a + 0.25 ? levels[1] : levels[2]);
    }
    std::vector<Column> cols = sample.dataset.columns();
    cols.push_back(std::move(z));
    cols.push_back(std::move(grp));
    write_table(Dataset(std::move(cols), n), path);
}

PipelineReport run_pipeline(const PipelineConfig& config) {
    config.validate();
    ensure_output_dir(config);

    PipelineReport report;
    std::string current_stage = "fit-lpa";
    try {
        LpaStage lpa = stage_fit_lpa(config, report.files);
        report.dropped_rows = lpa.dropped_rows;
        report.sweep = std::move(lpa.sweep);
        report.selected = lpa.selected;
        report.class_sizes = lpa.classes.sizes;

        current_stage = "describe";
        DescribeStage desc = stage_describe(config, report.files);
        report.description = std::move(desc.description);
        report.correlations = std::move(desc.correlations);
        for (const std::string& w : report.description.warnings) report.warnings.push_back(w);

        current_stage = "importance";
        ImportanceStage imp = stage_importance(config, report.files);
        report.importance = std::move(imp.importance);
        report.profiles = std::move(imp.profiles);
        for (const ProfileStatus& p : report.profiles)
            if (p.spurious)
                report.warnings.push_back("profile " + std::to_string(p.label) +
                                          " flagged possibly spurious (R2 = " +
                                          format_double(p.r_squared) + " < floor " +
                                          format_double(config.spurious_r2_floor) +
                                          "); excluded from network estimation");

        current_stage = "network";
        NetworkStage net = stage_network(config, report.files);
        report.networks = std::move(net.networks);

        current_stage = "report";
        write_text_file(out_path(config, "report.json"),
                        report_json(config, report).dump(2) + "\n");
        track(report.files, "report.json");

        write_manifest(config, report.files, report.dropped_rows, "ok", "", "");
        track(report.files, "manifest.json");
    } catch (const Error& e) {
        write_manifest(config, report.files, report.dropped_rows, "FAILED", current_stage,
                       e.what());
        throw Error(e.kind(), "[stage " + current_stage + "] " + e.what());
    }
    return report;
}

} // namespace lpanet
