#ifndef LPANET_PIPELINE_HPP
#define LPANET_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lpanet/dataset.hpp"
#include "lpanet/ggm.hpp"
#include "lpanet/lpa.hpp"
#include "lpanet/profile_desc.hpp"
#include "lpanet/relimp.hpp"

namespace lpanet {

inline constexpr const char* kToolVersion = "0.1.0";

/// One structured config file drives a run; keys match the field names.
struct PipelineConfig {
    std::string input_path;
    std::vector<std::string> classification_vars;
    std::vector<std::string> illustrative_quant;
    std::vector<std::string> illustrative_qual;
    bool responses_are_posteriors = true;
    std::vector<std::string> custom_responses; // when responses_are_posteriors is false
    std::vector<PredictorGroup> predictor_groups; // single-column entries allowed
    KRange k_range{3, 6};
    std::vector<int> models{1, 2, 3, 4, 5, 6};
    double gamma = 0.5;
    std::size_t bootstrap_B = 0;
    std::uint64_t seed = 0;
    std::string output_dir;
    double alpha = 0.05;

    // documented extras
    char delimiter = ',';
    bool standardize_classification = true;
    double spurious_r2_floor = 0.05;
    bool exclude_spurious = true; // drop flagged profiles from network estimation
    std::vector<std::string> network_vars; // default: classification + illustrative_quant
    SelectionStrategy selection = SelectionStrategy::RankAggregate;
    EmSettings em;
    std::size_t grid_size = 100;
    double dot_threshold = 0.0;
    unsigned threads = 1;

    void validate() const;
};

/// Parses the JSON config file; unknown keys are rejected.
PipelineConfig load_config(const std::string& path);

struct ProfileStatus {
    int label = 0;
    double r_squared = 0.0; // full model R^2 of the profile's posterior column
    bool spurious = false;  // r_squared below the configured floor
    bool retained = true;   // kept for network estimation
};

struct ProfileNetwork {
    int label = 0;
    Network network;
    std::vector<double> strengths;
    std::vector<double> betweenness_scores;
    std::optional<BootstrapReport> bootstrap;
};

struct PipelineReport {
    std::size_t dropped_rows = 0;
    SweepResult sweep;
    Selection selected;
    std::vector<std::size_t> class_sizes;
    ProfileDescription description;
    std::vector<MembershipCorrelation> correlations;
    ImportanceMatrix importance;
    std::vector<ProfileStatus> profiles;
    std::vector<ProfileNetwork> networks;
    std::vector<std::string> files; // everything emitted, as recorded in the manifest
    std::vector<std::string> warnings;
};

/// DOT text for a network: undirected edges, penwidth 1 + 8|w|, blue for
/// positive and red for negative weights, edges under the threshold omitted.
std::string export_dot(const Network& net, double threshold = 0.0);

/// Stage slices; each one reads the intermediate files produced by earlier
/// stages, so the subcommands reproduce run_pipeline piecewise.
struct LpaStage {
    std::size_t dropped_rows = 0;
    SweepResult sweep;
    Selection selected;
    Classification classes;
    Matrix posteriors;
};

struct DescribeStage {
    std::size_t dropped_rows = 0;
    ProfileDescription description;
    std::vector<MembershipCorrelation> correlations;
};

struct ImportanceStage {
    std::size_t dropped_rows = 0;
    ImportanceMatrix importance;
    std::vector<ProfileStatus> profiles;
};

struct NetworkStage {
    std::size_t dropped_rows = 0;
    std::vector<ProfileNetwork> networks;
};

LpaStage stage_fit_lpa(const PipelineConfig& config, std::vector<std::string>& files);
DescribeStage stage_describe(const PipelineConfig& config, std::vector<std::string>& files);
ImportanceStage stage_importance(const PipelineConfig& config, std::vector<std::string>& files);
NetworkStage stage_network(const PipelineConfig& config, std::vector<std::string>& files);

/// Full workflow: LPA sweep and selection, profile description, relative
/// importance, per-profile networks with optional bootstrap, plus manifest
/// and machine-readable report. Stage failures keep partial outputs and mark
/// the manifest FAILED before the error propagates.
PipelineReport run_pipeline(const PipelineConfig& config);

/// Writes manifest.json for a (possibly partial) run.
void write_manifest(const PipelineConfig& config, const std::vector<std::string>& files,
                    std::size_t dropped_rows, const std::string& status,
                    const std::string& failed_stage, const std::string& error);

/// Bundled demo generator: a well separated 5-class mixture on three numeric
/// indicators plus one numeric and one categorical illustrative column.
void write_demo_dataset(const std::string& path, std::size_t n, std::uint64_t seed);

} // namespace lpanet

#endif
