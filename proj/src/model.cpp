#include "fairreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fairreg/audit.hpp"
#include "fairreg/error.hpp"
#include "fairreg/io_util.hpp"
#include "fairreg/kernels.hpp"
#include "fairreg/stats.hpp"

namespace fairreg {

namespace kp = kernels::parallel;

namespace {

std::vector<std::pair<int, int>> layer_shapes(const Architecture& arch) {
  if (arch.input_dim < 1 || arch.classes < 2 || arch.hidden < 0) {
    input_error("invalid architecture " + std::to_string(arch.input_dim) + "/" +
                std::to_string(arch.hidden) + "/" + std::to_string(arch.classes));
  }
  if (arch.hidden == 0) return {{arch.input_dim, arch.classes}};
  return {{arch.input_dim, arch.hidden}, {arch.hidden, arch.classes}};
}

struct Activations {
  Matrix hidden;  // tanh outputs, empty for a linear model
  Matrix probs;
};

Activations run_forward(const ModelParams& params, const Matrix& features) {
  if (features.cols() != static_cast<std::size_t>(params.arch.input_dim)) {
    input_error("feature dimension " + std::to_string(features.cols()) +
                " does not match model input dimension " +
                std::to_string(params.arch.input_dim));
  }
  Activations act;
  const Matrix* input = &features;
  if (params.arch.hidden > 0) {
    const auto& layer = params.layers[0];
    act.hidden = Matrix(features.rows(), layer.weights.cols());
    kp::affine(features, layer.weights, layer.bias, act.hidden);
    for (double& v : act.hidden.values()) v = std::tanh(v);
    input = &act.hidden;
  }
  const auto& out_layer = params.layers.back();
  act.probs = Matrix(features.rows(), out_layer.weights.cols());
  kp::affine(*input, out_layer.weights, out_layer.bias, act.probs);
  kp::softmax_rows(act.probs);
  return act;
}

ModelParams backward(const ModelParams& params, const Matrix& features, const Activations& act,
                     const Matrix& dlogits) {
  ModelParams grad = zero_params(params.arch);
  if (params.arch.hidden == 0) {
    kp::accumulate_affine_grad(features, dlogits, grad.layers[0].weights, grad.layers[0].bias);
    return grad;
  }
  kp::accumulate_affine_grad(act.hidden, dlogits, grad.layers[1].weights, grad.layers[1].bias);
  Matrix dhidden(features.rows(), static_cast<std::size_t>(params.arch.hidden));
  kp::backprop_input(dlogits, params.layers[1].weights, dhidden);
  auto dh = dhidden.values();
  const auto h = act.hidden.values();
  for (std::size_t j = 0; j < dh.size(); ++j) dh[j] *= 1.0 - h[j] * h[j];
  kp::accumulate_affine_grad(features, dhidden, grad.layers[0].weights, grad.layers[0].bias);
  return grad;
}

std::vector<long long> class_counts(const LabeledSet& rows) {
  std::vector<long long> counts(rows.num_classes, 0);
  for (int t : rows.target) ++counts[t];
  return counts;
}

void check_rows(const LabeledSet& rows, const char* what) {
  if (rows.target.size() != rows.features.rows() || rows.sensitive.size() != rows.features.rows()) {
    input_error(std::string(what) + ": features and labels differ in length");
  }
}

LabeledSet gather(const LabeledSet& rows, std::span<const std::size_t> index) {
  LabeledSet out;
  out.num_classes = rows.num_classes;
  out.num_groups = rows.num_groups;
  out.features = Matrix(index.size(), rows.features.cols());
  out.target.resize(index.size());
  out.sensitive.resize(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    const auto src = rows.features.row(index[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.target[r] = rows.target[index[r]];
    out.sensitive[r] = rows.sensitive[index[r]];
  }
  return out;
}

}  // namespace

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weights.values().size() + layer.bias.size();
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_parameters());
  for (const auto& layer : layers) {
    const auto w = layer.weights.values();
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void ModelParams::assign_flat(std::span<const double> flat) {
  if (flat.size() != num_parameters()) input_error("flat parameter vector has wrong length");
  std::size_t k = 0;
  for (auto& layer : layers) {
    for (double& v : layer.weights.values()) v = flat[k++];
    for (double& v : layer.bias) v = flat[k++];
  }
}

ModelParams zero_params(const Architecture& arch) {
  ModelParams params;
  params.arch = arch;
  for (const auto& [fan_in, fan_out] : layer_shapes(arch)) {
    params.layers.push_back({Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)});
  }
  return params;
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams params = zero_params(arch);
  std::mt19937_64 rng(seed);
  for (auto& layer : params.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : layer.weights.values()) v = dist(rng);
  }
  return params;
}

Matrix forward(const ModelParams& params, const Matrix& features) {
  return run_forward(params, features).probs;
}

ClassWeights class_weights(std::span<const long long> class_counts, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) input_error("class weight beta must lie in [0, 1)");
  if (class_counts.empty()) input_error("class weights need at least one class");
  ClassWeights out;
  for (std::size_t i = 0; i < class_counts.size(); ++i) {
    if (class_counts[i] < 1) {
      input_error("class " + std::to_string(i) + " is absent from the training data");
    }
    const double effective = 1.0 - std::pow(beta, static_cast<double>(class_counts[i]));
    out.values.push_back((1.0 - beta) / effective);
  }
  const double mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) /
                      static_cast<double>(out.values.size());
  for (double& w : out.values) w /= mean;
  return out;
}

ClassWeights unit_weights(int num_classes) {
  return ClassWeights{std::vector<double>(num_classes, 1.0)};
}

PerSampleLoss weighted_cross_entropy(const ProbBatch& batch, const ClassWeights& weights) {
  if (weights.values.size() != static_cast<std::size_t>(batch.num_classes())) {
    input_error("class weight count does not match the number of classes");
  }
  PerSampleLoss out;
  out.values.resize(batch.size());
  out.grad = Matrix(batch.size(), static_cast<std::size_t>(batch.num_classes()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int y = batch.target()[i];
    const double w = weights.values[y];
    const double p = batch.probs()(i, y);
    out.values[i] = -w * std::log(std::max(p, kLogFloor));
    out.grad(i, y) = p >= kLogFloor ? -w / p : 0.0;
  }
  return out;
}

ObjectiveResult objective(const ModelParams& params, const LabeledSet& rows,
                          const ClassWeights& weights, std::optional<LossKind> kind,
                          double lambda) {
  check_rows(rows, "objective");
  if (!(lambda >= 0.0)) input_error("fairness weight lambda must be nonnegative");
  const Activations act = run_forward(params, rows.features);
  const std::size_t n = rows.size();
  const auto k = static_cast<std::size_t>(params.arch.classes);

  ObjectiveResult out;
  Matrix dlogits(n, k);
  // Cross-entropy through the softmax: w (p - onehot) while p[y] is above the log floor.
  for (std::size_t i = 0; i < n; ++i) {
    const int y = rows.target[i];
    const double w = weights.values[y];
    const double p = act.probs(i, y);
    out.cross_entropy -= w * std::log(std::max(p, kLogFloor));
    if (p < kLogFloor) continue;
    for (std::size_t a = 0; a < k; ++a) dlogits(i, a) = w * act.probs(i, a);
    dlogits(i, y) -= w;
  }
  out.value = out.cross_entropy;

  if (kind && lambda > 0.0) {
    const ProbBatch batch(act.probs, rows.target, rows.sensitive, rows.num_groups,
                          Validation::shape);
    LossResult fair = fairness_loss(*kind, batch);
    out.fairness_evaluated = true;
    out.fairness = fair.value;
    out.value += lambda * fair.value;
    out.warnings = std::move(fair.warnings);
    // Softmax Jacobian: dz_a = p_a (g_a - sum_j g_j p_j).
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = act.probs.row(i);
      const auto g = fair.grad.row(i);
      double dot = 0.0;
      for (std::size_t a = 0; a < k; ++a) dot += g[a] * p[a];
      for (std::size_t a = 0; a < k; ++a) dlogits(i, a) += lambda * p[a] * (g[a] - dot);
    }
  }
  out.grad = backward(params, rows.features, act, dlogits);
  return out;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) input_error("lambda must be nonnegative");
  if (batch_size < 2) input_error("batch_size must be at least 2");
  if (!(learning_rate > 0.0)) input_error("learning_rate must be positive");
  if (epochs < 1) input_error("epochs must be at least 1");
  if (class_weight_beta && !(*class_weight_beta >= 0.0 && *class_weight_beta < 1.0)) {
    input_error("class_weight_beta must lie in [0, 1)");
  }
}

ProbBatch predict(const ModelParams& params, const LabeledSet& rows) {
  check_rows(rows, "predict");
  return ProbBatch(forward(params, rows.features), rows.target, rows.sensitive, rows.num_groups);
}

TrainResult train(const LabeledSet& train_set, const LabeledSet& held_out,
                  const TrainConfig& config, const ModelParams& init) {
  config.validate();
  check_rows(train_set, "training set");
  check_rows(held_out, "held-out set");
  const std::size_t n = train_set.size();
  if (config.batch_size > n) {
    input_error("batch_size " + std::to_string(config.batch_size) + " exceeds the " +
                std::to_string(n) + " training samples");
  }
  if (held_out.size() == 0) input_error("held-out set is empty");
  if (init.arch.classes != train_set.num_classes) {
    input_error("model output dimension does not match the number of classes");
  }

  const ClassWeights weights = config.class_weight_beta
                                   ? class_weights(class_counts(train_set), *config.class_weight_beta)
                                   : unit_weights(train_set.num_classes);
  const std::optional<LossKind> kind = config.lambda > 0.0 ? config.loss_kind : std::nullopt;

  TrainResult result;
  result.params = init;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord record;
    record.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      if (len < config.batch_size && len < static_cast<std::size_t>(train_set.num_groups)) break;
      const LabeledSet rows = gather(train_set, std::span(order).subspan(start, len));
      ObjectiveResult obj = objective(result.params, rows, weights, kind, config.lambda);
      if (obj.fairness_evaluated) ++result.fairness_evaluations;
      if (!obj.warnings.empty()) ++record.degenerate_batches;
      if (!std::isfinite(obj.value)) {
        throw Error(ErrorCategory::runtime,
                    "non-finite training objective at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(batches) + " (cross-entropy " +
                        format_double(obj.cross_entropy) + ", fairness " +
                        format_double(obj.fairness) + ")");
      }
      record.train_objective += obj.value;
      ++batches;
      const auto g = obj.grad.flatten();
      auto p = result.params.flatten();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= config.learning_rate * g[j];
      result.params.assign_flat(p);
    }
    if (batches > 0) record.train_objective /= static_cast<double>(batches);
    record.train_accuracy = accuracy(predict(result.params, train_set));

    const AuditReport report = audit(predict(result.params, held_out), AuditMode::soft);
    record.heldout_accuracy = report.accuracy;
    record.heldout_fairness = report.fairness;
    record.heldout_sigma_iou = report.sigma_iou;
    result.history.push_back(record);
  }
  return result;
}

std::string serialize_model(const ModelParams& params) {
  std::ostringstream out;
  out << "fairreg-model " << kModelFormatVersion << "\n";
  out << "architecture " << params.arch.input_dim << " " << params.arch.hidden << " "
      << params.arch.classes << "\n";
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    out << "weights " << l << " " << layer.weights.rows() << " " << layer.weights.cols() << "\n";
    for (std::size_t r = 0; r < layer.weights.rows(); ++r) {
      const auto row = layer.weights.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << format_double(row[c]);
      out << "\n";
    }
    out << "bias " << l << " " << layer.bias.size() << "\n";
    for (std::size_t c = 0; c < layer.bias.size(); ++c) {
      out << (c ? " " : "") << format_double(layer.bias[c]);
    }
    out << "\n";
  }
  return out.str();
}

ModelParams deserialize_model(std::string_view text, const std::string& source) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
  }
  std::size_t at = 0;
  auto next = [&](const char* what) -> std::vector<std::string_view> {
    if (at >= lines.size() || lines[at].empty()) {
      throw ParseError(source, at + 1, std::string("expected ") + what);
    }
    return split(lines[at++], ' ');
  };
  auto number = [&](std::string_view field) {
    double v = 0.0;
    if (!parse_double(field, v) || !std::isfinite(v)) {
      throw ParseError(source, at, "invalid number '" + std::string(field) + "'");
    }
    return v;
  };
  auto integer = [&](std::string_view field) {
    long long v = 0;
    if (!parse_int(field, v) || v < 0) {
      throw ParseError(source, at, "invalid integer '" + std::string(field) + "'");
    }
    return static_cast<int>(v);
  };

  auto magic = next("format line");
  if (magic.size() != 2 || magic[0] != "fairreg-model") {
    throw ParseError(source, 1, "not a fairreg model file");
  }
  if (integer(magic[1]) != kModelFormatVersion) {
    throw ParseError(source, 1, "unsupported model format version");
  }
  auto arch_line = next("architecture line");
  if (arch_line.size() != 4 || arch_line[0] != "architecture") {
    throw ParseError(source, at, "malformed architecture line");
  }
  Architecture arch{integer(arch_line[1]), integer(arch_line[2]), integer(arch_line[3])};
  ModelParams params = zero_params(arch);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    auto head = next("weights header");
    if (head.size() != 4 || head[0] != "weights" ||
        static_cast<std::size_t>(integer(head[2])) != layer.weights.rows() ||
        static_cast<std::size_t>(integer(head[3])) != layer.weights.cols()) {
      throw ParseError(source, at, "weights header does not match the architecture");
    }
    for (std::size_t r = 0; r < layer.weights.rows(); ++r) {
      auto fields = next("weight row");
      if (fields.size() != layer.weights.cols()) throw ParseError(source, at, "wrong weight row width");
      for (std::size_t c = 0; c < fields.size(); ++c) layer.weights(r, c) = number(fields[c]);
    }
    auto bias_head = next("bias header");
    if (bias_head.size() != 3 || bias_head[0] != "bias" ||
        static_cast<std::size_t>(integer(bias_head[2])) != layer.bias.size()) {
      throw ParseError(source, at, "bias header does not match the architecture");
    }
    auto fields = next("bias row");
    if (fields.size() != layer.bias.size()) throw ParseError(source, at, "wrong bias width");
    for (std::size_t c = 0; c < fields.size(); ++c) layer.bias[c] = number(fields[c]);
  }
  return params;
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(params));
}

ModelParams load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path), path.string());
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_objective,train_accuracy,heldout_accuracy";
  for (LossKind kind : kAllLossKinds) out += ",heldout_" + std::string(to_string(kind));
  out += ",heldout_sigma_iou,degenerate_batches\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_objective) + "," +
           format_double(r.train_accuracy) + "," + format_double(r.heldout_accuracy);
    for (double v : r.heldout_fairness) out += "," + format_double(v);
    out += "," + (r.heldout_sigma_iou ? format_double(*r.heldout_sigma_iou) : std::string("nan"));
    out += "," + std::to_string(r.degenerate_batches) + "\n";
  }
  return out;
}

}  // namespace fairreg
