#include "xespred/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "xespred/config.hpp"
#include "xespred/error.hpp"
#include "xespred/rng.hpp"

namespace xespred {

namespace fs = std::filesystem;

void validate(const TrainRunConfig& run) {
  const auto& m = run.model;
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
  if (run.k_folds == 1) fail("k_folds must be 0 or at least 2");
  if (m.batch_size == 0) fail("batch_size must be at least 1");
  if (m.steps == 0) fail("steps must be at least 1");
  if (m.layers == 0) fail("layers must be at least 1");
  if (m.hidden == 0) fail("hidden must be at least 1");
  if (m.epochs == 0) fail("epochs must be at least 1");
  if (!(m.optimizer.learning_rate > 0) || !std::isfinite(m.optimizer.learning_rate)) {
    fail("lr must be a positive number");
  }
  if (!(m.clip_norm > 0)) fail("clip_norm must be positive");
  if (!(m.lr_decay > 0) || !std::isfinite(m.lr_decay)) fail("lr_decay must be positive");
  if (m.seed > static_cast<std::uint64_t>(INT64_MAX)) fail("seed must fit in 63 bits");
  if (run.metrics_flush == 0) fail("metrics_flush must be at least 1");
  if (run.data.schema.targets.empty()) fail("at least one target is required");
  for (const auto& [key, w] : m.weights) {
    if (!std::isfinite(w) || w < 0) fail("weight for " + key + " must be a finite number >= 0");
  }
}

SchemaConfig effective_schema_config(const DataConfig& data) {
  SchemaConfig cfg = data.schema;
  if (cfg.predictors.empty()) cfg.predictors = cfg.targets;
  for (const auto& name : data.classifiers) {
    if (std::find(cfg.predictors.begin(), cfg.predictors.end(), name) == cfg.predictors.end()) {
      cfg.predictors.push_back(name);
    }
  }
  return cfg;
}

namespace {

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string now_rfc3339() {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  return format_timestamp(Timestamp{ms});
}

std::vector<Matrix*> gradient_pointers(ModelParams& grads) {
  std::vector<Matrix*> out;
  for (auto& ref : grads.tensors()) out.push_back(ref.value);
  return out;
}

FrozenModel make_frozen(const EventLog& log, const EncodingSchema& schema,
                        const TrainRunConfig& run, const ModelParams& params, std::size_t epochs,
                        const std::map<std::string, double>& final_losses) {
  FrozenModel model;
  model.schema = schema;
  model.config = architecture_fields(run.model);
  model.params = params;
  model.metadata.source_log = fs::path(log.source_name).filename().string();
  model.metadata.epochs = epochs;
  model.metadata.final_losses = final_losses;
  model.event_attribute_types = event_attribute_types(log);
  model.trace_attribute_types = trace_attribute_types(log);
  return model;
}

}  // namespace

std::string format_metrics_row(const MetricsRecord& r) {
  std::string row;
  row += std::to_string(r.fold) + ',' + std::to_string(r.epoch) + ',' + std::to_string(r.step) +
         ',' + csv_field(r.target) + ',';
  if (!std::isnan(r.accuracy)) row += format_real(r.accuracy);
  row += ',' + format_real(r.loss) + ',' + format_real(r.learning_rate) + ',' +
         format_real(r.events_per_sec) + ',' + r.timestamp;
  return row;
}

std::map<std::string, AttributeType> event_attribute_types(const EventLog& log) {
  std::map<std::string, AttributeType> out;
  for (const auto& [k, v] : log.global_event_attrs) out.emplace(k, type_of(v));
  for (const auto& trace : log.traces) {
    for (const auto& event : trace.events) {
      for (const auto& [k, v] : event.attributes) out.emplace(k, type_of(v));
    }
  }
  return out;
}

std::map<std::string, AttributeType> trace_attribute_types(const EventLog& log) {
  std::map<std::string, AttributeType> out;
  for (const auto& [k, v] : log.global_trace_attrs) out.emplace(k, type_of(v));
  for (const auto& trace : log.traces) {
    for (const auto& [k, v] : trace.attributes) out.emplace(k, type_of(v));
  }
  return out;
}

FitResult fit(const EventLog& log, const TrainRunConfig& run, const FitOptions& options) {
  validate(run);
  const ModelConfig& cfg = run.model;
  const bool resuming = options.resume_model != nullptr;
  if (resuming && options.resume_state == nullptr) {
    throw Error(ErrorKind::state, "resume requires optimizer state");
  }
  if (resuming && !(architecture_fields(cfg) == options.resume_model->config)) {
    throw Error(ErrorKind::config, "checkpoint architecture differs from the configuration");
  }

  const EncodingSchema schema = resuming ? options.resume_model->schema
                                         : build_schema(log, effective_schema_config(run.data));
  ModelParams params = resuming ? options.resume_model->params : build_model(schema, cfg);
  const EncodedStream stream = encode_stream(log, schema);
  const std::vector<Batch> batches = make_batches(stream, cfg.batch_size, cfg.steps);
  const auto& arch = params.arch;

  Optimizer optimizer(cfg.optimizer);
  FitResult result;
  result.batches_per_epoch = batches.size();
  std::size_t first_epoch = 1;
  std::map<std::string, double> final_losses;
  if (resuming) {
    const auto& ck = *options.resume_state;
    optimizer.restore(ck.optimizer_steps, ck.first_slots, ck.second_slots);
    result.epoch_losses = ck.epoch_losses;
    first_epoch = ck.epochs_completed + 1;
    final_losses = options.resume_model->metadata.final_losses;
  }

  auto write_checkpoint = [&](std::size_t epoch) {
    if (options.checkpoint_path.empty()) return;
    CheckpointState ck;
    ck.epochs_completed = epoch;
    ck.optimizer_steps = optimizer.steps_taken();
    ck.learning_rate = optimizer.config().learning_rate;
    ck.epoch_losses = result.epoch_losses;
    ck.first_slots = optimizer.first_slots();
    ck.second_slots = optimizer.second_slots();
    save_frozen(make_frozen(log, schema, run, params, epoch, final_losses), options.checkpoint_path,
                &ck);
  };

  const std::size_t n_targets = arch.targets.size();
  for (std::size_t epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.optimizer.learning_rate *
                      std::pow(cfg.lr_decay, static_cast<double>(epoch - 1));
    optimizer.set_learning_rate(lr);
    RecurrentState state = zero_state(params, cfg.batch_size);
    if (options.hooks.epoch_start) options.hooks.epoch_start(epoch, params);

    double combined_sum = 0.0;
    std::vector<double> target_sums(n_targets, 0.0);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      if (options.hooks.before_batch) options.hooks.before_batch(epoch, b, state);
      const auto started = std::chrono::steady_clock::now();
      WindowCache cache;
      WindowResult res;
      try {
        res = forward_window(params, batches[b], state, &cache);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        throw Error(ErrorKind::numeric, "epoch " + std::to_string(epoch) + ", batch " +
                                            std::to_string(b + 1) + ": " + e.what() +
                                            "; training aborted, last checkpoint retained");
      }
      if (!std::isfinite(res.combined_loss)) {
        throw Error(ErrorKind::numeric, "non-finite loss at epoch " + std::to_string(epoch) +
                                            ", batch " + std::to_string(b + 1) +
                                            "; training aborted, last checkpoint retained");
      }
      ModelParams grads = backward_window(params, cache);
      auto grad_ptrs = gradient_pointers(grads);
      clip_by_global_norm(grad_ptrs, cfg.clip_norm);
      const auto refs = params.tensors();
      optimizer.step(refs, grad_ptrs);

      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      const double events = static_cast<double>(batches[b].lanes * batches[b].steps);
      combined_sum += res.combined_loss;
      for (std::size_t t = 0; t < n_targets; ++t) {
        target_sums[t] += res.losses[t];
        if (options.on_record) {
          MetricsRecord rec;
          rec.fold = options.fold;
          rec.epoch = epoch;
          rec.step = (epoch - 1) * batches.size() + b + 1;
          rec.target = arch.targets[t].key;
          rec.accuracy = res.accuracy[t];
          rec.loss = res.losses[t];
          rec.learning_rate = lr;
          rec.events_per_sec = elapsed > 0 ? events / elapsed : 0.0;
          rec.timestamp = now_rfc3339();
          options.on_record(rec);
        }
      }
    }
    const double n = static_cast<double>(batches.size());
    result.epoch_losses.push_back(combined_sum / n);
    final_losses.clear();
    for (std::size_t t = 0; t < n_targets; ++t) final_losses[arch.targets[t].key] = target_sums[t] / n;
    if (run.checkpoint_interval > 0 && epoch % run.checkpoint_interval == 0) write_checkpoint(epoch);
  }
  if (first_epoch <= cfg.epochs &&
      (run.checkpoint_interval == 0 || cfg.epochs % run.checkpoint_interval != 0)) {
    write_checkpoint(cfg.epochs);
  }
  const std::size_t epochs_done = std::max<std::size_t>(cfg.epochs, first_epoch - 1);
  result.model = make_frozen(log, schema, run, params, epochs_done, final_losses);
  return result;
}

void export_embeddings(const ModelParams& params, const EncodingSchema& schema,
                       const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t p = 0; p < params.arch.predictors.size(); ++p) {
    if (!params.arch.predictors[p].categorical) continue;
    const auto& spec = schema.predictor(p);
    const Matrix& table = params.embeddings[p];
    const fs::path base = fs::path(dir) / spec.key;
    std::ofstream vectors(base.string() + "_vectors.tsv", std::ios::binary | std::ios::trunc);
    std::ofstream labels(base.string() + "_labels.tsv", std::ios::binary | std::ios::trunc);
    if (!vectors || !labels) throw Error(ErrorKind::io, "cannot write embeddings for " + spec.key);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      for (std::size_t c = 0; c < table.cols(); ++c) {
        if (c > 0) vectors << '\t';
        vectors << format_real(table(r, c));
      }
      vectors << '\n';
      labels << spec.vocab.value(static_cast<std::int32_t>(r)) << '\n';
    }
    if (!vectors || !labels) throw Error(ErrorKind::io, "write failure on embeddings for " + spec.key);
  }
}

std::vector<FoldSplit> kfold_split(const EventLog& log, std::size_t k, std::uint64_t seed) {
  const std::size_t n = log.traces.size();
  if (k < 2) throw Error(ErrorKind::config, "k must be at least 2");
  if (k > n) {
    throw Error(ErrorKind::insufficient_data, "cannot split " + std::to_string(n) +
                                                  " traces into " + std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Xoshiro256 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> fold_of(n);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold_of[order[pos++]] = f;
  }

  EventLog header = log;
  header.traces.clear();
  std::vector<FoldSplit> out(k, FoldSplit{header, header});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? out[f].eval : out[f].train).traces.push_back(log.traces[i]);
    }
  }
  return out;
}

namespace {

class MetricsFile {
 public:
  MetricsFile(const std::string& path, bool append, std::size_t flush_every)
      : flush_every_(flush_every) {
    const bool exists = append && fs::exists(path) && fs::file_size(path) > 0;
    out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out_) throw Error(ErrorKind::io, "cannot open " + path);
    if (!exists) out_ << kMetricsHeader << '\n';
  }

  void write(const MetricsRecord& record) {
    out_ << format_metrics_row(record) << '\n';
    if (++pending_ >= flush_every_) flush();
  }

  void flush() {
    out_.flush();
    pending_ = 0;
    if (!out_) throw Error(ErrorKind::io, "metrics write failure");
  }

 private:
  std::ofstream out_;
  std::size_t flush_every_;
  std::size_t pending_ = 0;
};

void report_filtering(const FilterReport& report, std::ostream* log_stream) {
  if (log_stream == nullptr) return;
  for (const auto& o : report.omitted) {
    *log_stream << "omitted trace " << o.trace_id << ": " << o.reason << '\n';
  }
  for (const auto& w : report.warnings) *log_stream << "warning: " << w << '\n';
}

}  // namespace

TrainSummary train(const TrainRunConfig& run, bool resume, std::ostream* log_stream) {
  validate(run);
  if (resume && run.k_folds != 0) {
    throw Error(ErrorKind::config, "resume is only supported without k-fold splitting");
  }
  const fs::path out_dir(run.output_dir);
  fs::create_directories(out_dir);
  save_config(run, (out_dir / "config.toml").string());

  auto parsed = parse_xes_file(run.data.xes);
  report_filtering(parsed.report, log_stream);
  const EventLog& log = parsed.log;

  MetricsFile metrics((out_dir / "metrics.csv").string(), resume, run.metrics_flush);
  TrainSummary summary;

  if (run.k_folds == 0) {
    const auto checkpoint_path = (out_dir / "checkpoint.xtfp").string();
    FitOptions options;
    options.on_record = [&](const MetricsRecord& r) { metrics.write(r); };
    options.checkpoint_path = checkpoint_path;
    FrozenModel resume_model;
    CheckpointState resume_state;
    if (resume) {
      resume_model = load_frozen(checkpoint_path, &resume_state);
      options.resume_model = &resume_model;
      options.resume_state = &resume_state;
    }
    FitResult result = fit(log, run, options);
    metrics.flush();
    const auto model_path = (out_dir / "model.xtfp").string();
    save_frozen(result.model, model_path);
    export_embeddings(result.model.params, result.model.schema, (out_dir / "embeddings").string());
    summary.epoch_losses.push_back(std::move(result.epoch_losses));
    summary.model_paths.push_back(model_path);
    return summary;
  }

  const auto splits = kfold_split(log, run.k_folds, run.model.seed);
  for (std::size_t j = 0; j < splits.size(); ++j) {
    const fs::path fold_dir = out_dir / ("fold" + std::to_string(j + 1));
    fs::create_directories(fold_dir);
    FitOptions options;
    options.fold = j + 1;
    options.on_record = [&](const MetricsRecord& r) { metrics.write(r); };
    options.checkpoint_path = (fold_dir / "checkpoint.xtfp").string();
    FitResult result = fit(splits[j].train, run, options);
    metrics.flush();
    const auto model_path = (fold_dir / "model.xtfp").string();
    save_frozen(result.model, model_path);
    write_xes_file(splits[j].eval, (fold_dir / "eval.xes").string());
    export_embeddings(result.model.params, result.model.schema, (fold_dir / "embeddings").string());
    if (log_stream != nullptr) {
      *log_stream << "fold " << (j + 1) << ": final loss " << result.epoch_losses.back() << '\n';
    }
    summary.epoch_losses.push_back(std::move(result.epoch_losses));
    summary.model_paths.push_back(model_path);
  }
  return summary;
}

}  // namespace xespred
