#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "feddiv/arch/arch.hpp"
#include "feddiv/data/synthetic.hpp"
#include "feddiv/data/transforms.hpp"
#include "feddiv/fed/federation.hpp"
#include "feddiv/lab/lab.hpp"

namespace feddiv::harness {

enum class RunKind { fed_run, centralized_run, divergence_scan, theorem_check, rf_calc, sweep };

const char* run_kind_name(RunKind kind);
RunKind parse_run_kind(const std::string& name);

enum class SweepAxis { depth, width, resolution, augmentation, stem, maxpool, schedule, residual };

const char* sweep_axis_name(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);

enum class DataSource { idx, synthetic };

struct DatasetConfig {
  DataSource source = DataSource::synthetic;
  // idx source. Relative paths are resolved against the config file's directory.
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  // synthetic source
  data::SyntheticSpec synthetic;
  std::size_t test_samples_per_class = 20;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
  data::AugmentationSpec augmentation;
};

enum class ModelPreset { cnn, probe_shallow, probe_deep, custom };

const char* model_preset_name(ModelPreset p);
ModelPreset parse_model_preset(const std::string& name);

struct ModelConfig {
  ModelPreset preset = ModelPreset::cnn;
  // cnn preset. input_shape and num_classes also apply here; images whose
  // height and width differ from input_shape are resized bilinearly.
  arch::CnnBuildConfig cnn;
  // custom preset
  std::optional<nn::ModelSpec> spec;
};

struct CentralizedBlock {
  // Defaults to federation.rounds * federation.local_epochs.
  std::optional<int> epochs;
  std::optional<double> lr;                 // defaults to federation.lr
  std::optional<std::size_t> batch_size;    // defaults to federation.batch_size
};

struct SweepConfig {
  SweepAxis axis = SweepAxis::width;
  nlohmann::json values = nlohmann::json::array();
  // Kinds run for every value: fed_run and/or centralized_run.
  std::vector<RunKind> runs{RunKind::fed_run};
};

// Set on the runs a sweep creates.
struct VariantTag {
  SweepAxis axis = SweepAxis::width;
  nlohmann::json value;
};

struct OutputConfig {
  std::filesystem::path directory = "runs";
  std::vector<std::string> formats{"csv", "json"};
};

struct ExperimentConfig {
  std::string experiment_id;
  RunKind kind = RunKind::fed_run;
  DatasetConfig dataset;
  ModelConfig model;
  fed::FederationConfig federation;
  CentralizedBlock centralized;
  lab::AccumulationSettings probe;
  lab::Theorem1Config theorem;
  std::optional<SweepConfig> sweep;
  std::optional<VariantTag> variant;
  double accuracy_threshold = 0.4;
  OutputConfig output;
};

// Defaults:
//   dataset: synthetic, 10 classes of 1x28x28, 100 train and 20 test samples
//     per class, noise 0.1, train seed 1, test seed 2, no augmentation
//   model: cnn preset, 2 blocks, width 1, 3x3 stem, no stem pool, normal
//     schedule, no residual links, 10 classes, input 1x28x28
//   federation: 5 clients, 4 local epochs, 30 rounds, lr 0.02, batch 32,
//     seed 0, evaluation every round, 1 worker, kaiming_uniform, f64
//   centralized: rounds * local_epochs epochs at the federation lr and batch
//   probe: sigma 0.1, 1000 samples, seeds 1 2 3, 2 pretraining epochs at lr
//     0.02 and batch 32, class 0
//   theorem: widths 32/32/32, 10000 samples, noise 0.1/0.1, seed 0,
//     orthogonal weights, linear activation
//   accuracy_threshold 0.4, output directory "runs"
// Unknown keys and invalid values raise ConfigError with the JSON path.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& config);

// The model a config describes. Throws ConfigError when it cannot be built.
// rf_calc configs only need a structurally valid model.
nn::ModelSpec resolve_model(const ExperimentConfig& config);

// Train and test sets, resized to the model's input height and width.
std::pair<data::Dataset, data::Dataset> load_datasets(const ExperimentConfig& config, const Shape& input_shape);

// Output root: FEDDIV_OUTPUT_ROOT when set, else output.directory.
std::filesystem::path output_root(const ExperimentConfig& config);

// Runs the experiment into output_root / experiment_id. The directory gets
// config.json (materialized), metrics.csv, summary.json and finally DONE.
// A stale DONE is removed before anything else is written.
std::filesystem::path run(const ExperimentConfig& config);

// One config per (sweep value, run kind), with the variant tag set. The
// experiment_id is "<axis>_<value>", plus "_cl" for centralized runs; a sweep
// writes each variant into its own subdirectory.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& config);

// Fed-run metrics: experiment_id, round, layer_index, layer_name, divergence,
// mean_divergence, test_accuracy, train_loss, test_loss. One row per
// (round, layer) and a layer_index -1 row per round. Reals use 17
// significant digits; unevaluated rounds leave the test columns empty.
void write_fed_metrics(const std::filesystem::path& path, const std::string& experiment_id,
                       const nn::ModelSpec& spec, const std::vector<fed::RoundRecord>& records);

struct FedMetrics {
  std::string experiment_id;
  std::vector<fed::RoundRecord> records;
};

FedMetrics read_fed_metrics(const std::filesystem::path& path);

void write_centralized_metrics(const std::filesystem::path& path, const std::string& experiment_id,
                               const std::vector<fed::EpochRecord>& records);
std::vector<fed::EpochRecord> read_centralized_metrics(const std::filesystem::path& path);

// First round whose accuracy is >= threshold.
std::optional<int> rounds_to_threshold(const std::vector<fed::RoundRecord>& records, double threshold);
double best_accuracy(const std::vector<fed::RoundRecord>& records);
// Mean over rounds of the per-round mean divergence.
double mean_divergence(const std::vector<fed::RoundRecord>& records);

struct ComparisonRow {
  std::string variant;
  nlohmann::json value;
  double best_accuracy = 0.0;
  double mean_divergence = 0.0;
  std::optional<int> rounds_to_threshold;
  double delta_accuracy = 0.0;  // against the first row
  double delta_divergence = 0.0;
  std::optional<double> cl_best_accuracy;
  // (CL - FL) / CL best accuracy, when a centralized run of the variant exists.
  std::optional<double> relative_degradation;
};

struct TrendVerdict {
  std::string metric;
  double spearman = 0.0;
  std::string verdict;
};

struct Comparison {
  SweepAxis axis = SweepAxis::width;
  double threshold = 0.4;
  std::vector<ComparisonRow> rows;  // in axis order
  std::vector<TrendVerdict> verdicts;
};

// Rank-correlation cut-off for a trend verdict.
inline constexpr double kTrendCutoff = 0.5;

// Reads completed run directories of one sweep axis. Throws ValidationError
// listing every directory without a DONE marker.
Comparison compare_sweep(const std::vector<std::filesystem::path>& run_dirs,
                         std::optional<double> threshold = std::nullopt);

// "unreached" stands in for a threshold that was never met.
void write_comparison_csv(const std::filesystem::path& path, const Comparison& comparison);
std::string comparison_csv(const Comparison& comparison);
nlohmann::json comparison_to_json(const Comparison& comparison);

}  // namespace feddiv::harness
