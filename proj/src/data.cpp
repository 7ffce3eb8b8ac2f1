#include "fairreg/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fairreg/error.hpp"
#include "fairreg/io_util.hpp"

namespace fairreg {

namespace {

constexpr std::uint64_t kPartitionStream = 0x9e3779b97f4a7c15ULL;

struct Line {
  std::size_t number;
  std::string_view text;
};

std::vector<Line> table_lines(std::string_view content) {
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view text = content.substr(start, end - start);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    ++number;
    if (!text.empty()) lines.push_back({number, text});
    start = end + 1;
  }
  return lines;
}

double field_double(const std::string& path, const Line& line, std::string_view field) {
  double v = 0.0;
  if (!parse_double(field, v) || !std::isfinite(v)) {
    throw ParseError(path, line.number, "invalid number '" + std::string(field) + "'");
  }
  return v;
}

int field_label(const std::string& path, const Line& line, std::string_view field) {
  long long v = 0;
  if (!parse_int(field, v) || v < 0 || v > 1'000'000) {
    throw ParseError(path, line.number, "invalid label '" + std::string(field) + "'");
  }
  return static_cast<int>(v);
}

int resolve_count(int given, int max_label, const std::string& path, const char* what) {
  if (given == 0) return std::max(2, max_label + 1);
  if (max_label >= given) {
    throw ParseError(path, 0, std::string(what) + " label " + std::to_string(max_label) +
                                  " out of range for " + std::to_string(given) + " values");
  }
  return given;
}

}  // namespace

std::string_view to_string(Partition partition) {
  switch (partition) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
  }
  return "train";
}

std::optional<Partition> parse_partition(std::string_view text) {
  if (text == "train") return Partition::train;
  if (text == "val") return Partition::val;
  if (text == "test") return Partition::test;
  return std::nullopt;
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) input_error("synthetic spec needs at least 2 target classes");
  if (num_groups < 2) input_error("synthetic spec needs at least 2 sensitive groups");
  if (!(group_axes >= 0.0 && group_axes <= 1.0)) input_error("group_axes must lie in [0,1]");
  if (feature_dim < class_axes()) {
    input_error("feature_dim must be at least " + std::to_string(class_axes()) +
                " for this class count and group_axes");
  }
  if (n_samples < 10) {
    input_error("n_samples = " + std::to_string(n_samples) +
                " is too small for a 70/20/10 partition");
  }
  if (!(bias_strength >= 0.0 && bias_strength <= 1.0)) input_error("bias_strength must lie in [0,1]");
  if (!(label_coupling >= 0.0 && label_coupling <= 1.0)) input_error("label_coupling must lie in [0,1]");
  if (!(noise_scale > 0.0)) input_error("noise_scale must be positive");
  if (!group_imbalance.empty()) {
    if (group_imbalance.size() != static_cast<std::size_t>(num_groups)) {
      input_error("group_imbalance needs one weight per group");
    }
    double sum = 0.0;
    for (double w : group_imbalance) {
      if (!(w >= 0.0)) input_error("group_imbalance weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) input_error("group_imbalance weights must sum to 1");
  }
}

int SyntheticSpec::class_axes() const {
  return group_axes > 0.0 ? num_classes * (1 + num_groups) : num_classes;
}

std::vector<double> SyntheticSpec::group_weights() const {
  if (!group_imbalance.empty()) return group_imbalance;
  return std::vector<double>(num_groups, 1.0 / num_groups);
}

LabeledSet Dataset::subset(Partition which) const {
  LabeledSet out;
  out.num_classes = num_classes;
  out.num_groups = num_groups;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (partition[i] == which) rows.push_back(i);
  }
  out.features = Matrix(rows.size(), features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(features.row(rows[r]).begin(), features.cols(), out.features.row(r).begin());
    out.target.push_back(target[rows[r]]);
    out.sensitive.push_back(sensitive[rows[r]]);
  }
  return out;
}

Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  const int kt = spec.num_classes;
  const int ks = spec.num_groups;
  const auto d = static_cast<std::size_t>(spec.feature_dim);
  const std::size_t n = spec.n_samples;

  std::mt19937_64 rng(spec.seed);
  const auto weights = spec.group_weights();
  std::discrete_distribution<int> pick_group(weights.begin(), weights.end());
  std::normal_distribution<double> noise(0.0, spec.noise_scale);

  // p(y_t | y_s) per group.
  const double tilt = spec.bias_strength * spec.label_coupling;
  std::vector<std::discrete_distribution<int>> pick_target;
  for (int c = 0; c < ks; ++c) {
    std::vector<double> p(kt, (1.0 - tilt) / kt);
    p[c % kt] += tilt;
    pick_target.emplace_back(p.begin(), p.end());
  }

  Dataset out;
  out.num_classes = kt;
  out.num_groups = ks;
  out.features = Matrix(n, d);
  out.target.resize(n);
  out.sensitive.resize(n);
  const auto used_axes = static_cast<std::size_t>(spec.class_axes());
  const std::size_t extra_axes = d - used_axes;
  const double shared = std::sqrt(1.0 - spec.group_axes);
  const double own = std::sqrt(spec.group_axes);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = pick_group(rng);
    const int t = pick_target[c](rng);
    const double scale = 1.0 - spec.bias_strength * static_cast<double>(c) / (ks - 1);
    auto x = out.features.row(i);
    for (int j = 0; j < kt; ++j) {
      const double centroid = scale * spec.class_separation * ((j == t ? 1.0 : 0.0) - 1.0 / kt);
      x[j] = shared * centroid;
      if (own > 0.0) x[static_cast<std::size_t>(kt * (1 + c) + j)] = own * centroid;
    }
    if (extra_axes > 0) x[used_axes + static_cast<std::size_t>(c) % extra_axes] += spec.group_signal;
    for (double& v : x) v += noise(rng);
    out.target[i] = t;
    out.sensitive[i] = c;
  }

  // Partition by a seeded permutation: 70% train, 20% val, rest test.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 part_rng(spec.seed ^ kPartitionStream);
  std::shuffle(order.begin(), order.end(), part_rng);
  const auto n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  out.partition.assign(n, Partition::test);
  for (std::size_t k = 0; k < n; ++k) {
    if (k < n_train) {
      out.partition[order[k]] = Partition::train;
    } else if (k < n_train + n_val) {
      out.partition[order[k]] = Partition::val;
    }
  }
  return out;
}

std::string dataset_csv(const Dataset& data) {
  std::string out;
  const std::size_t d = data.features.cols();
  for (std::size_t j = 0; j < d; ++j) out += "feature_" + std::to_string(j) + ",";
  out += "y_t_star,y_s_star,partition\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features.row(i)) {
      out += format_double(v);
      out += ',';
    }
    out += std::to_string(data.target[i]) + "," + std::to_string(data.sensitive[i]) + "," +
           std::string(to_string(data.partition[i])) + "\n";
  }
  return out;
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_csv(data));
}

Dataset read_dataset(const std::filesystem::path& path, int num_classes, int num_groups) {
  const std::string source = path.string();
  const std::string content = read_file(path);
  const auto lines = table_lines(content);
  if (lines.empty()) throw ParseError(source, 1, "missing header");

  const auto header = split(lines[0].text, ',');
  if (header.size() < 4) throw ParseError(source, lines[0].number, "header has too few columns");
  const std::size_t d = header.size() - 3;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "feature_" + std::to_string(j)) {
      throw ParseError(source, lines[0].number,
                       "expected column feature_" + std::to_string(j) + ", got '" +
                           std::string(header[j]) + "'");
    }
  }
  if (header[d] != "y_t_star" || header[d + 1] != "y_s_star" || header[d + 2] != "partition") {
    throw ParseError(source, lines[0].number,
                     "header must end with y_t_star,y_s_star,partition");
  }
  if (lines.size() == 1) throw ParseError(source, lines[0].number, "empty dataset (no rows)");

  Dataset out;
  const std::size_t n = lines.size() - 1;
  std::vector<double> values;
  values.reserve(n * d);
  int max_target = 0;
  int max_group = 0;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const Line& line = lines[r];
    const auto fields = split(line.text, ',');
    if (fields.size() != header.size()) {
      throw ParseError(source, line.number,
                       "expected " + std::to_string(header.size()) + " columns, got " +
                           std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < d; ++j) values.push_back(field_double(source, line, fields[j]));
    out.target.push_back(field_label(source, line, fields[d]));
    out.sensitive.push_back(field_label(source, line, fields[d + 1]));
    if ((num_classes > 0 && out.target.back() >= num_classes) ||
        (num_groups > 0 && out.sensitive.back() >= num_groups)) {
      throw ParseError(source, line.number, "label out of range");
    }
    const auto part = parse_partition(fields[d + 2]);
    if (!part) {
      throw ParseError(source, line.number, "unknown partition '" + std::string(fields[d + 2]) + "'");
    }
    out.partition.push_back(*part);
    max_target = std::max(max_target, out.target.back());
    max_group = std::max(max_group, out.sensitive.back());
  }
  out.features = Matrix(n, d, std::move(values));
  out.num_classes = resolve_count(num_classes, max_target, source, "target");
  out.num_groups = resolve_count(num_groups, max_group, source, "sensitive");
  return out;
}

std::string prediction_csv(const ProbBatch& batch, std::span<const long long> sample_ids) {
  if (!sample_ids.empty() && sample_ids.size() != batch.size()) {
    input_error("sample id count does not match the batch");
  }
  std::string out = "sample_id,";
  for (int a = 0; a < batch.num_classes(); ++a) out += "p_" + std::to_string(a) + ",";
  out += "y_t_star,y_s_star\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out += std::to_string(sample_ids.empty() ? static_cast<long long>(i) : sample_ids[i]);
    for (double p : batch.probs().row(i)) {
      out += ',';
      out += format_double(p);
    }
    out += "," + std::to_string(batch.target()[i]) + "," + std::to_string(batch.sensitive()[i]) +
           "\n";
  }
  return out;
}

void write_prediction_dump(const ProbBatch& batch, const std::filesystem::path& path,
                           std::span<const long long> sample_ids) {
  write_file_atomic(path, prediction_csv(batch, sample_ids));
}

PredictionDump read_prediction_dump(const std::filesystem::path& path, int num_groups) {
  const std::string source = path.string();
  const std::string content = read_file(path);
  const auto lines = table_lines(content);
  if (lines.empty()) throw ParseError(source, 1, "missing header");

  const auto header = split(lines[0].text, ',');
  if (header.size() < 5 || header[0] != "sample_id") {
    throw ParseError(source, lines[0].number, "header must start with sample_id,p_0,p_1");
  }
  const std::size_t k = header.size() - 3;
  for (std::size_t a = 0; a < k; ++a) {
    if (header[1 + a] != "p_" + std::to_string(a)) {
      throw ParseError(source, lines[0].number, "expected column p_" + std::to_string(a));
    }
  }
  if (header[k + 1] != "y_t_star" || header[k + 2] != "y_s_star") {
    throw ParseError(source, lines[0].number, "header must end with y_t_star,y_s_star");
  }
  if (lines.size() == 1) throw ParseError(source, lines[0].number, "empty prediction dump (no rows)");

  const std::size_t n = lines.size() - 1;
  std::vector<long long> ids;
  std::vector<double> probs;
  std::vector<int> target;
  std::vector<int> sensitive;
  probs.reserve(n * k);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const Line& line = lines[r];
    const auto fields = split(line.text, ',');
    if (fields.size() != header.size()) {
      throw ParseError(source, line.number,
                       "expected " + std::to_string(header.size()) + " columns, got " +
                           std::to_string(fields.size()));
    }
    long long id = 0;
    if (!parse_int(fields[0], id)) throw ParseError(source, line.number, "invalid sample_id");
    ids.push_back(id);
    double row_sum = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      const double p = field_double(source, line, fields[1 + a]);
      if (p < 0.0 || p > 1.0) throw ParseError(source, line.number, "probability outside [0,1]");
      row_sum += p;
      probs.push_back(p);
    }
    if (std::abs(row_sum - 1.0) > kSimplexTolerance) {
      throw ParseError(source, line.number, "probabilities do not sum to 1");
    }
    const int t = field_label(source, line, fields[k + 1]);
    if (t >= static_cast<int>(k)) {
      throw ParseError(source, line.number, "target label " + std::to_string(t) + " out of range");
    }
    const int s = field_label(source, line, fields[k + 2]);
    if (num_groups > 0 && s >= num_groups) {
      throw ParseError(source, line.number, "sensitive label " + std::to_string(s) + " out of range");
    }
    target.push_back(t);
    sensitive.push_back(s);
  }
  return PredictionDump{std::move(ids),
                        ProbBatch(Matrix(n, k, std::move(probs)), std::move(target),
                                  std::move(sensitive), num_groups)};
}

}  // namespace fairreg
