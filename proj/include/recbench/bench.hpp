#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recbench/earlyfusion.hpp"
#include "recbench/interactions.hpp"
#include "recbench/metrics.hpp"
#include "recbench/models.hpp"

namespace recbench::bench {

struct DatasetConfig {
    std::string name = "dataset";
    std::string format = "tsv";  // tsv | movielens_dat
    std::string path;
    std::string metadata_path;    // optional
    std::string metadata_format;  // defaults to dataset format
};

struct SplitConfig {
    std::string strategy = "random";
    double test_ratio = 0.2;
    int k_core = 0;  // 0 = off
    std::string k_core_order = "before_alignment";  // or after_alignment
    bool simulate_cold_start = false;
    double cold_fraction = 0.0;
};

struct ModalityConfig {
    std::vector<std::string> enabled;  // subset of {audio, visual, text}
    std::string text_variant = "st";
    bool augmentation = false;
    std::string audio_variant = "blf";   // blf | i_vec
    std::string visual_variant = "cnn";  // cnn | avf
    std::map<std::string, std::string> paths;  // modality -> embedding TSV
    bool normalize = true;
};

struct FusionConfig {
    bool present = false;
    std::string op = "concat";  // concat | pca | cca
    std::optional<double> rho;
    std::optional<int> k;
    std::string stage = "early";  // early | mid | late
    // half: literal column halves; modality: boundary before the last block
    std::string cca_split = "half";
};

struct GridSpec {
    // axes in declaration order; enumeration is their cartesian product with
    // the first axis outermost
    std::vector<std::pair<std::string, std::vector<double>>> axes;
    bool empty() const { return axes.empty(); }
    std::size_t size() const;
};

struct ModelConfig {
    std::string family = "mf";  // mf | vaecf | vbpr | vmf | amr
    models::HyperParams hp;
    bool epochs_explicit = false;  // model-specific epochs override runtime.epochs
    GridSpec grid;
    std::string objective = "ndcg";  // grid-search objective: ndcg | recall
};

struct RuntimeConfig {
    std::uint64_t seed = 42;
    std::optional<int> epochs;  // global default, overridden by model hyperparams
    int top_k = 10;
    int list_length = 100;
    bool fast_prototype = false;
    bool parallel_hpo = false;
    int workers = 1;
    std::string coldrate = "item";  // slot fraction, or "user" for the user-level variant
};

struct ExperimentConfig {
    std::string root_path = ".";
    DatasetConfig dataset;
    SplitConfig split;
    ModalityConfig modality;
    FusionConfig fusion;
    ModelConfig model;
    RuntimeConfig runtime;
    std::string output_dir = "outputs";
    std::vector<std::string> load_warnings;  // ignored keys etc.

    // epochs after applying precedence and fast_prototype
    int effective_epochs() const;
};

// Strict mode rejects unknown keys; lax mode records warnings instead.
ExperimentConfig load_config(const std::string& path, bool strict = true);
ExperimentConfig parse_config(const std::string& yaml_text, bool strict,
                              const std::string& source_name);

// Canonical serialization: fixed key order, defaults filled. The config
// hash is FNV-1a over this string, so comments and key order can't move it.
std::string serialize_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct TrialResult {
    int trial_id = 0;
    models::HyperParams hp;
    double recall10 = 0.0;
    double ndcg10 = 0.0;
    bool diverged = false;
};

struct BestHyper {
    models::HyperParams hp;
    double recall10 = 0.0;
    double ndcg10 = 0.0;
    int best_trial = -1;
    std::vector<TrialResult> table;
};

// Trains one model per grid point on train-minus-validation and evaluates on
// a validation fold carved from the train side (same strategy, 10%). Results
// are independent of worker count: every trial derives its own seed from the
// master seed and the trial's parameter string.
BestHyper grid_search(const ExperimentConfig& cfg, const GridSpec& grid,
                      const corpus::InteractionLog& log, const corpus::SplitPlan& plan,
                      const models::ContentFeatures* features, int workers);

struct RunArtifacts {
    metrics::MetricReport report;
    std::string results_csv;
    std::string lists_path;
    std::string manifest_path;
    std::string fusion_path;  // empty when no projection was fitted
    std::vector<std::string> warnings;
};

// Full pipeline: ingest -> text/embeddings -> align + fuse -> train ->
// recommend -> metrics -> CSV/lists/manifest. Deterministic given
// (config, seed), timing fields aside.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

// The results CSV header, in order.
extern const char* kResultsCsvHeader;
std::string metric_report_csv_row(const metrics::MetricReport& r);

}  // namespace recbench::bench
