#include "xespred/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>

#include "CLI11.hpp"
#include "xespred/config.hpp"
#include "xespred/error.hpp"
#include "xespred/evaluation.hpp"
#include "xespred/frozen.hpp"
#include "xespred/prediction.hpp"
#include "xespred/service.hpp"
#include "xespred/synthetic.hpp"
#include "xespred/training.hpp"

namespace xespred {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string config;
  std::string output;
  bool resume = false;
};

struct PredictArgs {
  std::string model;
  std::string input;
  std::string output;
  std::size_t max_steps = 100;
  bool stop_on_eoc = false;
  std::string mode = "argmax";
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool skip_unknown = false;
};

struct EvaluateArgs {
  std::string model;
  std::string input;
  std::string report;
  std::string folds_dir;
};

struct InspectArgs {
  std::string log;
  std::string model;
};

struct ServeArgs {
  std::string model;
  std::string listen;
};

struct GenerateArgs {
  std::size_t variants = 2;
  std::size_t traces = 50;
  std::uint64_t seed = 1;
  double noise = 0.0;
  std::string output;
  std::string config_out;
};

void print_filter_report(const FilterReport& report, std::ostream& err) {
  for (const auto& o : report.omitted) err << "omitted trace " << o.trace_id << ": " << o.reason << '\n';
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  TrainRunConfig run = load_config(args.config);
  if (!args.output.empty()) run.output_dir = fs::absolute(args.output).lexically_normal().string();
  const auto summary = train(run, args.resume, &err);
  for (std::size_t f = 0; f < summary.model_paths.size(); ++f) {
    out << "model: " << summary.model_paths[f];
    if (!summary.epoch_losses[f].empty()) out << " (final loss " << summary.epoch_losses[f].back() << ")";
    out << '\n';
  }
  return kExitOk;
}

int cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err) {
  const FrozenModel model = load_frozen(args.model);
  const auto parsed = parse_xes_file(args.input);
  print_filter_report(parsed.report, err);
  PredictionOptions options;
  options.max_steps = args.max_steps;
  options.stop_on_eoc = args.stop_on_eoc;
  options.mode = parse_decode_mode(args.mode);
  options.temperature = args.temperature;
  options.seed = args.seed;
  options.skip_unknown = args.skip_unknown;
  const auto result = predict_suffixes(model, parsed.log, options);
  for (const auto& s : result.skipped.omitted) err << "skipped trace " << s.trace_id << ": " << s.reason << '\n';
  write_xes_file(result.log, args.output);
  out << "predicted " << result.suffixes.size() << " traces -> " << args.output << '\n';
  return kExitOk;
}

void print_report_summary(const EvalReport& r, std::ostream& out) {
  out << "fold " << r.fold << ":";
  for (const auto& t : r.targets) {
    out << ' ' << t.key << (t.categorical ? " accuracy " : " loss ")
        << (t.categorical ? t.accuracy : t.loss);
  }
  out << "; suffix similarity mean " << r.mean_similarity << " median " << r.median_similarity
      << "; evaluated " << r.traces.size() << ", skipped " << r.skipped << '\n';
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<EvalReport> reports;
  if (!args.folds_dir.empty()) {
    reports = evaluate_folds(args.folds_dir);
  } else {
    if (args.model.empty() || args.input.empty()) {
      throw Error(ErrorKind::config, "--model and --input are required without --k-folds-from-dir");
    }
    const FrozenModel model = load_frozen(args.model);
    const auto parsed = parse_xes_file(args.input);
    print_filter_report(parsed.report, err);
    reports.push_back(evaluate_report(model, parsed.log));
  }
  write_report_csv(reports, args.report);
  for (const auto& r : reports) print_report_summary(r, out);
  return kExitOk;
}

void inspect_log(const std::string& path, std::ostream& out) {
  const auto parsed = parse_xes_file(path);
  const EventLog& log = parsed.log;
  out << "log: " << path << '\n';
  out << "traces: " << log.traces.size() << '\n';
  out << "events: " << log.event_count() << '\n';
  out << "omitted traces: " << parsed.report.omitted.size() << '\n';
  for (const auto& o : parsed.report.omitted) out << "  " << o.trace_id << ": " << o.reason << '\n';
  for (const auto& w : parsed.report.warnings) out << "warning: " << w << '\n';
  out << "extensions:\n";
  for (const auto& e : log.extensions) out << "  " << e.prefix << " (" << e.name << ") " << e.uri << '\n';
  auto print_globals = [&](const char* title, const AttributeMap& attrs) {
    out << title << ":\n";
    for (const auto& [k, v] : attrs) {
      out << "  " << k << ": " << to_string(type_of(v)) << " = " << display(v) << '\n';
    }
  };
  print_globals("global trace attributes", log.global_trace_attrs);
  print_globals("global event attributes", log.global_event_attrs);
  out << "classifiers:\n";
  for (const auto& c : log.classifiers) {
    out << "  " << c.name << ":";
    for (const auto& k : c.keys) out << ' ' << k;
    out << '\n';
  }
  std::map<std::string, std::set<std::string>> event_values;
  std::map<std::string, std::set<std::string>> trace_values;
  for (const auto& trace : log.traces) {
    for (const auto& [k, v] : trace.attributes) trace_values[k].insert(display(v));
    for (const auto& event : trace.events) {
      for (const auto& [k, v] : event.attributes) event_values[k].insert(display(v));
    }
  }
  out << "trace attribute cardinalities:\n";
  for (const auto& [k, s] : trace_values) out << "  " << k << ": " << s.size() << '\n';
  out << "event attribute cardinalities:\n";
  for (const auto& [k, s] : event_values) out << "  " << k << ": " << s.size() << '\n';
}

void inspect_model(const std::string& path, std::ostream& out) {
  const FrozenModel model = load_frozen(path);
  const auto& c = model.config;
  out << "model: " << path << '\n';
  out << "format version: " << model.version << '\n';
  out << "source log: " << model.metadata.source_log << '\n';
  out << "epochs: " << model.metadata.epochs << '\n';
  for (const auto& [k, v] : model.metadata.final_losses) out << "final loss " << k << ": " << v << '\n';
  out << "architecture: layers " << c.layers << ", hidden " << c.hidden << ", batch " << c.batch_size
      << ", steps " << c.steps << ", " << (c.shared_rnn ? "shared" : "separate") << " rnn"
      << (c.use_input_projection ? ", input projection" : "") << '\n';
  out << "features:\n";
  for (const auto& f : model.schema.features) {
    out << "  " << f.key << ": " << to_string(f.kind) << " (" << to_string(f.source) << ")";
    if (f.predictor) out << " predictor";
    if (f.target) out << " target";
    if (f.kind == FeatureKind::categorical) {
      out << ", " << f.vocab.size() << " values + EOC";
      if (f.predictor) out << ", embedding " << f.embedding_dim;
    } else if (f.kind == FeatureKind::numeric) {
      out << ", mean " << f.norm.mean << " sd " << f.norm.sd;
    } else {
      out << ", scale " << to_string(f.time.kind);
    }
    out << '\n';
  }
  out << "tensors:\n";
  for (const auto& [name, m] : model.params.tensors()) {
    out << "  " << name << ": " << m->rows() << "x" << m->cols() << '\n';
  }
}

int cmd_inspect(const InspectArgs& args, std::ostream& out) {
  if (!args.log.empty()) inspect_log(args.log, out);
  if (!args.model.empty()) inspect_model(args.model, out);
  return kExitOk;
}

int cmd_serve(const ServeArgs& args, std::ostream& out) {
  auto model = std::make_shared<const FrozenModel>(load_frozen(args.model));
  const auto [host, port] = parse_listen_address(args.listen);
  PredictionServer server(model, host, port);
  out << "listening on " << host << ":" << server.port() << std::endl;
  server.run();
  return kExitOk;
}

std::string demo_config(const std::string& xes_path) {
  return "# Demo run on the bundled synthetic log.\n"
         "[data]\n"
         "xes = \"" + xes_path + "\"\n"
         "predictors = [\"concept:name\", \"org:resource\"]\n"
         "targets = [\"concept:name\", \"org:resource\"]\n"
         "time_scale = \"hours\"\n"
         "\n"
         "[model]\n"
         "layers = 1\n"
         "hidden = 16\n"
         "steps = 5\n"
         "batch_size = 20\n"
         "\n"
         "[train]\n"
         "epochs = 60\n"
         "optimizer = \"adam\"\n"
         "lr = 0.01\n"
         "seed = 7\n"
         "output_dir = \"out\"\n";
}

int cmd_generate(const GenerateArgs& args, std::ostream& out) {
  SyntheticSpec spec;
  spec.variants = args.variants;
  spec.traces_per_variant = args.traces;
  spec.seed = args.seed;
  spec.noise = args.noise;
  const EventLog log = generate_synthetic_log(spec);
  write_xes_file(log, args.output);
  out << "wrote " << log.traces.size() << " traces -> " << args.output << '\n';
  if (!args.config_out.empty()) {
    const auto config_dir = fs::absolute(args.config_out).parent_path();
    const auto xes = fs::absolute(args.output).lexically_relative(config_dir).generic_string();
    std::ofstream cfg(args.config_out, std::ios::binary | std::ios::trunc);
    if (!cfg) throw Error(ErrorKind::io, "cannot write " + args.config_out);
    cfg << demo_config(xes);
    out << "wrote config -> " << args.config_out << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train LSTM models on XES event logs and predict trace suffixes.", "xespred"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a TOML run configuration");
  train_cmd->add_option("--config", train_args.config, "Run configuration (TOML)")->required();
  train_cmd->add_option("--output", train_args.output, "Override the output directory");
  train_cmd->add_flag("--resume", train_args.resume, "Continue from the output directory's checkpoint");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Predict suffixes for the traces of an XES log");
  predict_cmd->add_option("--model", predict_args.model, "Frozen model file")->required();
  predict_cmd->add_option("--input", predict_args.input, "XES log of trace prefixes")->required();
  predict_cmd->add_option("--output", predict_args.output, "XES output path")->required();
  predict_cmd->add_option("--max-steps", predict_args.max_steps, "Events generated per trace")
      ->capture_default_str();
  predict_cmd->add_flag("--stop-on-eoc", predict_args.stop_on_eoc, "Stop at a predicted end of case");
  predict_cmd->add_option("--mode", predict_args.mode, "argmax or sample")
      ->check(CLI::IsMember({"argmax", "sample"}))
      ->capture_default_str();
  predict_cmd->add_option("--temperature", predict_args.temperature, "Sampling temperature")
      ->capture_default_str();
  predict_cmd->add_option("--seed", predict_args.seed, "Sampling seed")->capture_default_str();
  predict_cmd->add_flag("--skip-unknown", predict_args.skip_unknown,
                        "Drop traces with values unseen in training");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model on a log and write report.csv");
  eval_cmd->add_option("--model", eval_args.model, "Frozen model file");
  eval_cmd->add_option("--input", eval_args.input, "Evaluation log");
  eval_cmd->add_option("--report", eval_args.report, "CSV report path")->required();
  eval_cmd->add_option("--k-folds-from-dir", eval_args.folds_dir,
                       "Evaluate every fold<j>/ of a k-fold training run");

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect", "Describe an XES log or a frozen model");
  auto* log_opt = inspect_cmd->add_option("--log", inspect_args.log, "XES log");
  auto* model_opt = inspect_cmd->add_option("--model", inspect_args.model, "Frozen model file");
  inspect_cmd->require_option(1);
  log_opt->excludes(model_opt);

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Serve predictions as JSON lines over TCP");
  serve_cmd->add_option("--model", serve_args.model, "Frozen model file")->required();
  serve_cmd->add_option("--listen", serve_args.listen, "HOST:PORT")->required();

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Write the synthetic demo log");
  gen_cmd->add_option("--variants", gen_args.variants, "Process variants (1-720)")->capture_default_str();
  gen_cmd->add_option("--traces", gen_args.traces, "Traces per variant")->capture_default_str();
  gen_cmd->add_option("--seed", gen_args.seed, "Seed")->capture_default_str();
  gen_cmd->add_option("--noise", gen_args.noise, "Activity substitution probability")
      ->capture_default_str();
  gen_cmd->add_option("--output", gen_args.output, "XES output path")->required();
  gen_cmd->add_option("--config-out", gen_args.config_out, "Also write a demo run configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out, err);
    if (*predict_cmd) return cmd_predict(predict_args, out, err);
    if (*eval_cmd) return cmd_evaluate(eval_args, out, err);
    if (*inspect_cmd) return cmd_inspect(inspect_args, out);
    if (*serve_cmd) return cmd_serve(serve_args, out);
    if (*gen_cmd) return cmd_generate(gen_args, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: io: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace xespred
