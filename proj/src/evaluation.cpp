#include "xespred/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "xespred/error.hpp"
#include "xespred/model.hpp"
#include "xespred/nn.hpp"
#include "xespred/prediction.hpp"

namespace xespred {

namespace fs = std::filesystem;

std::vector<TargetMetric> next_event_accuracy(const FrozenModel& model, const EventLog& log,
                                              std::vector<ArgmaxRecord>* dump) {
  const auto& schema = model.schema;
  const auto& arch = model.params.arch;
  const EncodedStream stream = encode_stream(log, schema);
  if (stream.length == 0) {
    throw Error(ErrorKind::insufficient_data, "evaluation log has no next-event positions");
  }
  const std::size_t n_targets = schema.targets.size();
  std::vector<std::size_t> correct(n_targets, 0);
  std::vector<double> ce_sum(n_targets, 0.0);
  std::vector<Matrix> outputs(n_targets);
  std::vector<Matrix> truths(n_targets);
  std::vector<Matrix> masks(n_targets);
  for (std::size_t t = 0; t < n_targets; ++t) {
    if (!arch.targets[t].categorical) {
      outputs[t] = Matrix(stream.length, 1);
      truths[t] = Matrix(stream.length, 1);
      masks[t] = Matrix(stream.length, 1);
    }
  }

  RecurrentState state = zero_state(model.params, 1);
  std::vector<std::vector<FeatureValue>> features(1, std::vector<FeatureValue>(schema.predictors.size()));
  for (std::size_t pos = 0; pos < stream.length; ++pos) {
    for (std::size_t p = 0; p < schema.predictors.size(); ++p) {
      const auto& col = stream.inputs[p];
      if (col.categorical) {
        features[0][p].id = col.ids[pos];
      } else {
        features[0][p].value = col.values[pos];
      }
    }
    const StepOutputs outs = forward_step(model.params, features, state);
    for (std::size_t t = 0; t < n_targets; ++t) {
      const auto& col = stream.targets[t];
      if (col.categorical) {
        const std::int32_t truth = col.ids[pos];
        const std::int32_t predicted = argmax(outs[t].row(0));
        if (predicted == truth) ++correct[t];
        const Matrix probs = softmax_rows(outs[t]);
        ce_sum[t] += cross_entropy(probs, std::span<const std::int32_t>(&truth, 1));
        if (dump != nullptr) dump->push_back({pos, t, predicted, truth});
      } else {
        outputs[t](pos, 0) = outs[t](0, 0);
        truths[t](pos, 0) = col.values[pos];
        masks[t](pos, 0) = stream.masks[t][pos];
      }
    }
  }

  std::vector<TargetMetric> out;
  const double n = static_cast<double>(stream.length);
  for (std::size_t t = 0; t < n_targets; ++t) {
    TargetMetric m;
    m.key = arch.targets[t].key;
    m.categorical = arch.targets[t].categorical;
    if (m.categorical) {
      m.accuracy = static_cast<double>(correct[t]) / n;
      m.loss = ce_sum[t] / n;
    } else {
      m.accuracy = std::numeric_limits<double>::quiet_NaN();
      const bool any = std::any_of(masks[t].values().begin(), masks[t].values().end(),
                                   [](double v) { return v != 0.0; });
      m.loss = any ? regression_loss(arch.targets[t].loss, outputs[t], truths[t], masks[t])
                   : std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(m);
  }
  return out;
}

std::size_t evaluation_prefix_length(std::size_t trace_length) {
  return std::max<std::size_t>(1, trace_length / 2);
}

EvalReport evaluate_report(const FrozenModel& model, const EventLog& log,
                           const EvalOptions& options) {
  const auto& schema = model.schema;
  const auto primary = primary_target(schema);
  if (!primary) {
    throw Error(ErrorKind::unsupported, "suffix evaluation requires a categorical target");
  }
  const FeatureSpec& primary_spec = schema.target(*primary);

  EvalReport report;
  report.fold = options.fold;
  report.primary_key = primary_spec.key;
  report.targets = next_event_accuracy(model, log);

  std::vector<Trace> prefixes;
  std::vector<std::uint64_t> ids;
  std::vector<std::size_t> max_steps;
  for (std::size_t i = 0; i < log.traces.size(); ++i) {
    const Trace& trace = log.traces[i];
    if (trace.events.size() < 2) {
      ++report.skipped;
      continue;
    }
    const std::string name = trace_id(trace, i);
    TraceEval eval;
    eval.trace_id = name;
    eval.prefix_length = evaluation_prefix_length(trace.events.size());
    for (std::size_t e = eval.prefix_length; e < trace.events.size(); ++e) {
      eval.truth.push_back(encode_feature(primary_spec, trace, e, name).id);
    }
    Trace prefix = trace;
    prefix.events.resize(eval.prefix_length);
    prefixes.push_back(std::move(prefix));
    ids.push_back(i);
    max_steps.push_back(options.max_steps > 0 ? options.max_steps : 2 * trace.events.size() + 1);
    report.traces.push_back(std::move(eval));
  }

  // Traces sharing a step budget run together so grouping stays in order.
  PredictionOptions popts;
  popts.stop_on_eoc = true;
  popts.mode = DecodeMode::argmax;
  std::size_t start = 0;
  while (start < prefixes.size()) {
    std::size_t end = start;
    while (end < prefixes.size() && max_steps[end] == max_steps[start]) ++end;
    popts.max_steps = max_steps[start];
    const auto suffixes =
        predict_traces(model, std::span<const Trace>(prefixes).subspan(start, end - start),
                       std::span<const std::uint64_t>(ids).subspan(start, end - start), popts);
    for (std::size_t k = 0; k < suffixes.size(); ++k) {
      TraceEval& eval = report.traces[start + k];
      for (const auto& g : suffixes[k].events) {
        if (!g.is_eoc) eval.predicted.push_back(g.raw[*primary].id);
      }
      eval.edit_distance = levenshtein<std::int32_t>(eval.predicted, eval.truth);
      eval.similarity = suffix_similarity<std::int32_t>(eval.predicted, eval.truth);
    }
    start = end;
  }

  if (!report.traces.empty()) {
    std::vector<double> sims;
    double dist = 0.0;
    for (const auto& t : report.traces) {
      sims.push_back(t.similarity);
      dist += static_cast<double>(t.edit_distance);
    }
    const double n = static_cast<double>(sims.size());
    report.mean_edit_distance = dist / n;
    report.mean_similarity = std::accumulate(sims.begin(), sims.end(), 0.0) / n;
    std::sort(sims.begin(), sims.end());
    const std::size_t mid = sims.size() / 2;
    report.median_similarity =
        sims.size() % 2 == 1 ? sims[mid] : 0.5 * (sims[mid - 1] + sims[mid]);
  }
  return report;
}

std::vector<EvalReport> evaluate_folds(const std::string& dir) {
  std::vector<EvalReport> reports;
  for (std::size_t j = 1;; ++j) {
    const fs::path fold_dir = fs::path(dir) / ("fold" + std::to_string(j));
    if (!fs::exists(fold_dir / "model.xtfp")) break;
    const FrozenModel model = load_frozen((fold_dir / "model.xtfp").string());
    const auto parsed = parse_xes_file((fold_dir / "eval.xes").string());
    EvalOptions options;
    options.fold = j;
    reports.push_back(evaluate_report(model, parsed.log, options));
  }
  if (reports.empty()) {
    throw Error(ErrorKind::io, "no fold directories with model.xtfp under " + dir);
  }
  return reports;
}

namespace {

std::string real(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_report_csv(std::span<const EvalReport> reports) {
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& r : reports) {
    const std::string fold = std::to_string(r.fold);
    for (const auto& t : r.traces) {
      out += fold + ',' + field(t.trace_id) + ',' + field(r.primary_key) + ",,," +
             std::to_string(t.edit_distance) + ',' + real(t.similarity) + ",0\n";
    }
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double loss = std::numeric_limits<double>::quiet_NaN();
    for (const auto& m : r.targets) {
      if (m.key == r.primary_key) {
        accuracy = m.accuracy;
        loss = m.loss;
      }
    }
    out += fold + ",*," + field(r.primary_key) + ',' + real(accuracy) + ',' + real(loss) + ',' +
           real(r.mean_edit_distance) + ',' + real(r.mean_similarity) + ',' +
           std::to_string(r.skipped) + '\n';
  }
  return out;
}

void write_report_csv(std::span<const EvalReport> reports, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write report " + path);
  out << format_report_csv(reports);
  if (!out) throw Error(ErrorKind::io, "write failure on " + path);
}

}  // namespace xespred
