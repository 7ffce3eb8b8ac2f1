#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>

#include "fairreg/audit.hpp"
#include "fairreg/data.hpp"
#include "fairreg/error.hpp"
#include "fairreg/io_util.hpp"
#include "fairreg/model.hpp"
#include "fairreg/sweep.hpp"

namespace fs = std::filesystem;

namespace fairreg::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string text) {
  for (char& ch : text) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

std::string version_text() {
  std::string v = std::string("fairreg ") + kVersion + "\n";
  v += "model format " + std::to_string(kModelFormatVersion) + "\n";
  v += "dataset format " + std::to_string(kDatasetFormatVersion) + "\n";
  v += "prediction format " + std::to_string(kPredictionFormatVersion) + "\n";
  v += "audit report format " + std::to_string(kAuditReportFormatVersion);
  return v;
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("FAIRREG_DATA_DIR"); env && *env) return env;
  return "data";
}

fs::path dataset_file(const fs::path& dir) {
  const fs::path file = dir / "dataset.csv";
  if (!fs::is_regular_file(file)) throw UsageError("no dataset.csv in " + dir.string());
  return file;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<long long> partition_ids(const Dataset& data, Partition which) {
  std::vector<long long> ids;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.partition[i] == which) ids.push_back(static_cast<long long>(i));
  }
  return ids;
}

LossKind loss_from(const std::string& text) {
  auto kind = parse_loss_kind(text);
  if (!kind) throw UsageError("unknown loss: " + text);
  return *kind;
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

struct TrainFlags {
  double lambda = 0.0;
  std::string loss;
  int epochs = 20;
  std::size_t batch_size = 64;
  double lr = 0.01;
  std::uint64_t seed = 1;
  std::optional<double> beta;
  int hidden = 0;

  void add_to(CLI::App* app, bool with_fairness) {
    if (with_fairness) {
      app->add_option("--lambda", lambda, "Fairness weight")->check(CLI::NonNegativeNumber);
      app->add_option("--loss", loss, "l_iou | l2_eo | mi_eo | l2_dp | mi_dp");
    }
    app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "SGD learning rate")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Shuffle and initialization seed");
    app->add_option("--beta", beta, "Class-weighting beta in [0, 1)");
    app->add_option("--hidden", hidden, "Hidden units (0 = linear)")->check(CLI::NonNegativeNumber);
  }

  TrainConfig config() const {
    TrainConfig tc;
    tc.lambda = lambda;
    if (!loss.empty()) tc.loss_kind = loss_from(loss);
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.learning_rate = lr;
    tc.seed = seed;
    tc.class_weight_beta = beta;
    return tc;
  }
};

struct Options {
  int verbose = 0;

  SyntheticSpec spec;
  std::string gen_out;

  std::string data_dir;
  std::string train_out;
  std::string init_model;
  TrainFlags train;

  std::string dump;
  std::string mode = "soft";
  std::string json_out;
  std::string text_out;
  int groups = 0;

  std::string sweep_data;
  std::string sweep_out;
  std::string baseline;
  std::string strategy = "ladder";
  int trials = 20;
  std::string sweep_loss = "l_iou";
  double lambda_low = 0.1;
  double lambda_high = 1000.0;
  std::optional<double> floor;
  double ratio = std::sqrt(10.0);
  std::uint64_t sweep_seed = 1;
  TrainFlags fine;
};

int do_generate(const Options& o, std::ostream& out) {
  const fs::path dir = o.gen_out.empty() ? default_data_dir() : fs::path(o.gen_out);
  try {
    o.spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const Dataset data = generate(o.spec);
  ensure_dir(dir);
  write_dataset(data, dir / "dataset.csv");
  out << "wrote " << (dir / "dataset.csv").string() << " (" << data.size() << " rows)\n";
  return 0;
}

int do_train(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path dir = o.data_dir.empty() ? default_data_dir() : fs::path(o.data_dir);
  const fs::path file = dataset_file(dir);
  if (!o.init_model.empty()) require_file(o.init_model, "initial model");
  const fs::path out_dir = o.train_out.empty() ? dir : fs::path(o.train_out);
  TrainConfig tc = o.train.config();
  try {
    tc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const Dataset data = read_dataset(file);
  const LabeledSet train_set = data.subset(Partition::train);
  const LabeledSet val_set = data.subset(Partition::val);
  const LabeledSet test_set = data.subset(Partition::test);

  ModelParams init;
  if (!o.init_model.empty()) {
    init = load_model(o.init_model);
  } else {
    init = init_params({static_cast<int>(data.features.cols()), o.train.hidden, data.num_classes},
                       tc.seed);
  }
  const TrainResult result = train(train_set, val_set, tc, init);
  if (o.verbose > 0) {
    for (const auto& rec : result.history) {
      err << "epoch " << rec.epoch << " objective " << format_double(rec.train_objective)
          << " val_acc " << format_double(rec.heldout_accuracy) << "\n";
    }
  }

  const ProbBatch test_pred = predict(result.params, test_set);
  const AuditReport report = audit(test_pred, AuditMode::soft);

  ensure_dir(out_dir);
  save_model(result.params, out_dir / "model.txt");
  write_file_atomic(out_dir / "history.csv", history_csv(result.history));
  write_prediction_dump(test_pred, out_dir / "predictions.csv",
                        partition_ids(data, Partition::test));
  write_file_atomic(out_dir / "report.json", report_json(report));
  print_warnings(err, report.warnings);
  out << report_text(report);
  return 0;
}

int do_audit(const Options& o, std::ostream& out, std::ostream& err) {
  require_file(o.dump, "prediction dump");
  const auto mode = parse_audit_mode(o.mode);
  if (!mode) throw UsageError("unknown audit mode: " + o.mode);
  const AuditReport report = audit_dump(o.dump, *mode, o.groups);
  if (!o.json_out.empty()) write_file_atomic(o.json_out, report_json(report));
  if (!o.text_out.empty()) write_file_atomic(o.text_out, report_text(report));
  if (o.json_out.empty() && o.text_out.empty()) out << report_text(report);
  print_warnings(err, report.warnings);
  return 0;
}

int do_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path dir = o.sweep_data.empty() ? default_data_dir() : fs::path(o.sweep_data);
  const fs::path file = dataset_file(dir);
  const fs::path baseline_path = o.baseline.empty() ? dir / "model.txt" : fs::path(o.baseline);
  require_file(baseline_path, "baseline model");
  const fs::path out_dir = o.sweep_out.empty() ? dir / "sweep" : fs::path(o.sweep_out);

  SweepConfig sc;
  sc.lambda_low = o.lambda_low;
  sc.lambda_high = o.lambda_high;
  sc.n_trials = o.trials;
  const auto strategy = parse_sweep_strategy(o.strategy);
  if (!strategy) throw UsageError("unknown strategy: " + o.strategy);
  sc.strategy = *strategy;
  sc.loss_kind = loss_from(o.sweep_loss);
  sc.accuracy_floor = o.floor;
  sc.ladder_ratio = o.ratio;
  sc.seed = o.sweep_seed;
  sc.base = o.fine.config();
  try {
    sc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const Dataset data = read_dataset(file);
  const ModelParams baseline = load_model(baseline_path);
  const LabeledSet train_set = data.subset(Partition::train);
  const LabeledSet val_set = data.subset(Partition::val);
  const LabeledSet test_set = data.subset(Partition::test);
  const SweepResult result = run_sweep(sc, {train_set, val_set, test_set, baseline});

  std::vector<double> lambdas;
  std::vector<double> sigmas;
  std::vector<double> accs;
  for (const auto& t : result.trials) {
    accs.push_back(t.val_accuracy);
    if (!t.val_sigma_iou) continue;
    lambdas.push_back(t.lambda);
    sigmas.push_back(*t.val_sigma_iou);
  }
  std::vector<double> all_lambdas;
  for (const auto& t : result.trials) all_lambdas.push_back(t.lambda);

  ensure_dir(out_dir);
  write_file_atomic(out_dir / "trials.jsonl", trials_jsonl(result));
  write_file_atomic(out_dir / "sweep.json", summary_json(result).dump(2) + "\n");
  write_file_atomic(out_dir / "lambda_sigma_iou.dat", plot_data("lambda", "sigma_iou", lambdas, sigmas));
  write_file_atomic(out_dir / "lambda_accuracy.dat", plot_data("lambda", "accuracy", all_lambdas, accs));
  save_model(result.selected_params, out_dir / "model.txt");
  write_file_atomic(out_dir / "report.json", report_json(result.selected_test_report));
  print_warnings(err, result.warnings);

  out << "trials " << result.trials.size() << ", stop " << result.stop_reason << "\n";
  out << "selected lambda " << format_double(result.selected_lambda);
  if (result.selected_trial) out << " (trial " << *result.selected_trial << ")";
  out << "\n" << report_text(result.selected_test_report);
  return 0;
}

// Fills options of `app` that were not given on the command line from a
// key = value file.
void apply_spec_file(CLI::App* app, const std::string& path) {
  require_file(path, "spec file");
  std::vector<CLI::ConfigItem> items;
  try {
    items = app->get_config_formatter()->from_file(path);
  } catch (const CLI::ParseError& e) {
    throw UsageError(path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (!item.parents.empty()) throw UsageError(path + ": unexpected section " + item.parents.front());
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = app->get_option_no_throw("--" + name);
    if (!opt || name == "spec") throw UsageError(path + ": unknown key " + item.name);
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageError(path + ": " + item.name + ": " + e.what());
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fairness-regularized classifier training and auditing"};
  app.name("fairreg");
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", version_text());
  app.set_config("--config", "", "Configuration file; command-line flags take precedence");

  Options o;
  app.add_flag("-v,--verbose", o.verbose, "Print progress to stderr");

  auto* gen = app.add_subcommand("generate", "Generate a biased synthetic dataset");
  std::string spec_file;
  gen->add_option("--spec", spec_file, "Dataset specification file (key = value)");
  gen->add_option("--out", o.gen_out, "Output directory (default $FAIRREG_DATA_DIR or ./data)");
  gen->add_option("--samples", o.spec.n_samples, "Number of samples");
  gen->add_option("--classes", o.spec.num_classes, "Target classes");
  gen->add_option("--groups", o.spec.num_groups, "Sensitive groups");
  gen->add_option("--dim", o.spec.feature_dim, "Feature dimension");
  gen->add_option("--bias", o.spec.bias_strength, "Bias strength rho in [0, 1]");
  gen->add_option("--imbalance", o.spec.group_imbalance, "Group proportions");
  gen->add_option("--noise", o.spec.noise_scale, "Feature noise scale");
  gen->add_option("--separation", o.spec.class_separation, "Class centroid distance");
  gen->add_option("--coupling", o.spec.label_coupling, "Target-group label coupling");
  gen->add_option("--group-signal", o.spec.group_signal, "Group offset in feature space");
  gen->add_option("--group-axes", o.spec.group_axes, "Share of class signal on group-owned axes");
  gen->add_option("--seed", o.spec.seed, "Generator seed");

  auto* tr = app.add_subcommand("train", "Train or fine-tune a classifier");
  tr->add_option("--data", o.data_dir, "Dataset directory (default $FAIRREG_DATA_DIR or ./data)");
  tr->add_option("--out", o.train_out, "Output directory (default: the dataset directory)");
  tr->add_option("--init", o.init_model, "Start from this model file");
  o.train.add_to(tr, true);

  auto* au = app.add_subcommand("audit", "Audit a prediction dump");
  au->add_option("--dump", o.dump, "Prediction dump CSV")->required();
  au->add_option("--mode", o.mode, "soft | hard");
  au->add_option("--json", o.json_out, "Write the JSON report here");
  au->add_option("--text", o.text_out, "Write the text table here");
  au->add_option("--groups", o.groups, "Number of sensitive groups (default: inferred)");

  auto* sw = app.add_subcommand("sweep", "Select the fairness weight");
  sw->add_option("--data", o.sweep_data, "Dataset directory (default $FAIRREG_DATA_DIR or ./data)");
  sw->add_option("--out", o.sweep_out, "Output directory (default <data>/sweep)");
  sw->add_option("--baseline", o.baseline, "Baseline model (default <data>/model.txt)");
  sw->add_option("--strategy", o.strategy, "ladder | random");
  sw->add_option("--trials", o.trials, "Number of trials")->check(CLI::PositiveNumber);
  sw->add_option("--loss", o.sweep_loss, "Fairness loss to fine-tune with");
  sw->add_option("--lambda-low", o.lambda_low, "Lower end of the lambda range");
  sw->add_option("--lambda-high", o.lambda_high, "Upper end of the lambda range (exclusive)");
  sw->add_option("--floor", o.floor, "Validation accuracy floor (default baseline - 0.02)");
  sw->add_option("--ratio", o.ratio, "Ladder ratio");
  sw->add_option("--sweep-seed", o.sweep_seed, "Seed for trial seeds and lambda sampling");
  o.fine.add_to(sw, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version_text() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (*gen && !spec_file.empty()) apply_spec_file(gen, spec_file);
    if (*gen) return do_generate(o, out);
    if (*tr) return do_train(o, out, err);
    if (*au) return do_audit(o, out, err);
    return do_sweep(o, out, err);
  } catch (const UsageError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << to_string(e.category()) << ": " << one_line(e.what()) << "\n";
    return e.category() == ErrorCategory::config ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: runtime: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace fairreg::cli
