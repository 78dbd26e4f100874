#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "xespred/encoding.hpp"
#include "xespred/frozen.hpp"
#include "xespred/model.hpp"
#include "xespred/xes.hpp"

namespace xespred {

struct DataConfig {
  std::string xes;  // training log path
  SchemaConfig schema;
  /// Classifier names used as predictors; appended to the predictor list
  /// when not already named there.
  std::vector<std::string> classifiers;

  bool operator==(const DataConfig&) const = default;
};

struct TrainRunConfig {
  DataConfig data;
  ModelConfig model;
  std::size_t k_folds = 0;  // 0 = single run, otherwise >= 2
  std::string output_dir = "out";
  std::size_t checkpoint_interval = 1;  // epochs between checkpoints; 0 = final only
  std::size_t metrics_flush = 1;        // metrics rows between flushes

  bool operator==(const TrainRunConfig&) const = default;
};

/// Throws a config error when fields are out of range.
void validate(const TrainRunConfig& run);

/// Schema configuration with the classifier names merged into the predictors.
SchemaConfig effective_schema_config(const DataConfig& data);

struct MetricsRecord {
  std::size_t fold = 0;   // 0 outside k-fold runs
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // 1-based global optimizer step
  std::string target;
  double accuracy = 0.0;  // NaN for numeric targets
  double loss = 0.0;
  double learning_rate = 0.0;
  double events_per_sec = 0.0;
  std::string timestamp;  // RFC 3339, wall clock

  bool operator==(const MetricsRecord&) const = default;
};

inline constexpr std::string_view kMetricsHeader =
    "fold,epoch,step,target,accuracy,loss,lr,events_per_sec,timestamp";

std::string format_metrics_row(const MetricsRecord& record);

/// Observation points inside the training loop.
struct TrainingHooks {
  /// After the epoch's state reset, before its first batch.
  std::function<void(std::size_t epoch, const ModelParams& params)> epoch_start;
  std::function<void(std::size_t epoch, std::size_t batch, const RecurrentState& state)>
      before_batch;
};

struct FitOptions {
  std::size_t fold = 0;
  std::function<void(const MetricsRecord&)> on_record;
  TrainingHooks hooks;
  /// Resume point: parameters, schema and optimizer state from a checkpoint.
  const FrozenModel* resume_model = nullptr;
  const CheckpointState* resume_state = nullptr;
  /// Where checkpoints are written; empty disables checkpointing.
  std::string checkpoint_path;
};

struct FitResult {
  FrozenModel model;
  std::vector<double> epoch_losses;  // mean combined loss per epoch, all epochs so far
  std::size_t batches_per_epoch = 0;
};

/// Trains on `log` in memory.
FitResult fit(const EventLog& log, const TrainRunConfig& run, const FitOptions& options = {});

/// Declared or first-observed attribute types of a log.
std::map<std::string, AttributeType> event_attribute_types(const EventLog& log);
std::map<std::string, AttributeType> trace_attribute_types(const EventLog& log);

/// Writes `<key>_vectors.tsv` and `<key>_labels.tsv` per categorical predictor.
void export_embeddings(const ModelParams& params, const EncodingSchema& schema,
                       const std::string& dir);

struct FoldSplit {
  EventLog train;
  EventLog eval;
};

/// Seeded shuffle into k near-equal folds; pair j holds fold j as eval set.
std::vector<FoldSplit> kfold_split(const EventLog& log, std::size_t k, std::uint64_t seed);

struct TrainSummary {
  std::vector<std::vector<double>> epoch_losses;  // per fold (one entry without k-fold)
  std::vector<std::string> model_paths;
};

/// Full run with artifacts under `run.output_dir`: config.toml, metrics.csv,
/// model.xtfp, checkpoint.xtfp and embeddings/ (per fold<j>/ with k-fold).
TrainSummary train(const TrainRunConfig& run, bool resume = false,
                   std::ostream* log_stream = nullptr);

}  // namespace xespred
