#include "fairreg/sweep.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <numeric>
#include <random>

#include "fairreg/error.hpp"

namespace fairreg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && v[order[end]] == v[order[start]]) ++end;
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = rank;
    start = end;
  }
  return ranks;
}

struct Baseline {
  double accuracy = 0.0;
  std::optional<double> sigma_iou;
  std::array<double, 5> fairness{};
};

Baseline evaluate_baseline(const SweepData& data) {
  const AuditReport report = audit(predict(data.baseline, data.val), AuditMode::soft);
  return {report.accuracy, report.sigma_iou, report.fairness};
}

SweepResult start_result(const SweepConfig& config, const SweepData& data) {
  config.validate();
  const Baseline base = evaluate_baseline(data);
  SweepResult result;
  result.loss_kind = config.loss_kind;
  result.strategy = config.strategy;
  result.baseline_accuracy = base.accuracy;
  result.baseline_sigma_iou = base.sigma_iou;
  result.baseline_fairness = base.fairness;
  result.accuracy_floor =
      config.accuracy_floor.value_or(std::max(0.0, base.accuracy - kDefaultFloorMargin));
  if (base.accuracy < result.accuracy_floor) {
    result.warnings.push_back("baseline validation accuracy is below the accuracy floor");
  }
  return result;
}

void finish(SweepResult& result, const SweepData& data, std::vector<ModelParams>& params) {
  result.selected_trial = select_trial(result.trials, result.accuracy_floor);
  if (result.selected_trial) {
    result.selected_lambda = result.trials[*result.selected_trial].lambda;
    result.selected_params = std::move(params[*result.selected_trial]);
  } else {
    result.selected_lambda = 0.0;
    result.selected_params = data.baseline;
    result.warnings.push_back(
        "no trial met the accuracy floor; falling back to the lambda = 0 baseline");
  }
  result.selected_test_report = audit(predict(result.selected_params, data.test), AuditMode::soft);
}

}  // namespace

std::string_view to_string(SweepStrategy strategy) {
  return strategy == SweepStrategy::ladder ? "ladder" : "random";
}

std::optional<SweepStrategy> parse_sweep_strategy(std::string_view text) {
  if (text == "ladder") return SweepStrategy::ladder;
  if (text == "random") return SweepStrategy::random;
  return std::nullopt;
}

void SweepConfig::validate() const {
  if (!(lambda_low > 0.0 && lambda_low < lambda_high)) {
    throw Error(ErrorCategory::config, "lambda range must satisfy 0 < low < high");
  }
  if (n_trials < 1) throw Error(ErrorCategory::config, "n_trials must be at least 1");
  if (accuracy_floor && !(*accuracy_floor >= 0.0 && *accuracy_floor <= 1.0)) {
    throw Error(ErrorCategory::config, "accuracy_floor must lie in [0, 1]");
  }
  if (strategy == SweepStrategy::ladder && !(ladder_ratio > 1.0)) {
    throw Error(ErrorCategory::config, "ladder ratio must exceed 1");
  }
  base.validate();
}

std::uint64_t trial_seed(std::uint64_t sweep_seed, int trial) {
  return splitmix64(sweep_seed + static_cast<std::uint64_t>(trial));
}

TrialRecord run_trial(const SweepConfig& config, const SweepData& data, int trial, double lambda,
                      ModelParams* params_out) {
  TrainConfig tc = config.base;
  tc.lambda = lambda;
  tc.loss_kind = config.loss_kind;
  tc.seed = trial_seed(config.seed, trial);
  TrainResult trained = train(data.train, data.val, tc, data.baseline);
  const AuditReport report = audit(predict(trained.params, data.val), AuditMode::soft);

  TrialRecord record;
  record.trial = trial;
  record.lambda = lambda;
  record.seed = tc.seed;
  record.val_sigma_iou = report.sigma_iou;
  record.val_accuracy = report.accuracy;
  record.val_fairness = report.fairness;
  if (params_out) *params_out = std::move(trained.params);
  return record;
}

SweepResult ladder(const SweepConfig& config, const SweepData& data) {
  SweepResult result = start_result(config, data);
  std::vector<ModelParams> params;
  result.stop_reason = "trial_budget";
  for (int k = 0; k < config.n_trials; ++k) {
    const double lambda = config.lambda_low * std::pow(config.ladder_ratio, k);
    if (lambda >= config.lambda_high) {
      result.stop_reason = "range_exhausted";
      break;
    }
    params.emplace_back();
    result.trials.push_back(run_trial(config, data, k, lambda, &params.back()));
    if (result.trials.back().val_accuracy < result.accuracy_floor) {
      result.stop_reason = "accuracy_below_floor";
      break;
    }
  }
  finish(result, data, params);
  return result;
}

SweepResult random_search(const SweepConfig& config, const SweepData& data) {
  SweepResult result = start_result(config, data);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> log_lambda(std::log(config.lambda_low),
                                                    std::log(config.lambda_high));
  std::vector<double> lambdas(config.n_trials);
  for (double& l : lambdas) l = std::min(std::exp(log_lambda(rng)), std::nextafter(config.lambda_high, 0.0));

  const int n = config.n_trials;
  result.trials.resize(n);
  std::vector<ModelParams> params(n);
  std::vector<std::exception_ptr> failures(n);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < n; ++k) {
    try {
      result.trials[k] = run_trial(config, data, k, lambdas[k], &params[k]);
    } catch (...) {
      failures[k] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  result.stop_reason = "trial_budget";
  finish(result, data, params);
  return result;
}

SweepResult run_sweep(const SweepConfig& config, const SweepData& data) {
  return config.strategy == SweepStrategy::ladder ? ladder(config, data)
                                                  : random_search(config, data);
}

std::optional<int> select_trial(std::span<const TrialRecord> trials, double accuracy_floor) {
  std::optional<int> best;
  double best_sigma = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const auto& t = trials[k];
    if (t.val_accuracy < accuracy_floor || !t.val_sigma_iou) continue;
    if (!best || *t.val_sigma_iou < best_sigma) {
      best = static_cast<int>(k);
      best_sigma = *t.val_sigma_iou;
    }
  }
  return best;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) input_error("spearman: columns differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Trend trend(const SweepResult& result) {
  Trend out;
  std::vector<const TrialRecord*> usable;
  for (const auto& t : result.trials) {
    if (t.val_sigma_iou) usable.push_back(&t);
  }
  if (usable.size() < 3) return out;
  std::vector<double> log_lambda;
  std::vector<double> sigma;
  std::vector<double> acc;
  for (const auto* t : usable) {
    log_lambda.push_back(std::log(t->lambda));
    sigma.push_back(*t->val_sigma_iou);
    acc.push_back(t->val_accuracy);
  }
  out.spearman_fairness = spearman(log_lambda, sigma);
  out.spearman_accuracy = spearman(log_lambda, acc);
  for (const auto* t : usable) {
    const bool dominated = std::any_of(usable.begin(), usable.end(), [&](const TrialRecord* o) {
      const bool no_worse = *o->val_sigma_iou <= *t->val_sigma_iou && o->val_accuracy >= t->val_accuracy;
      const bool better = *o->val_sigma_iou < *t->val_sigma_iou || o->val_accuracy > t->val_accuracy;
      return no_worse && better;
    });
    if (!dominated) out.pareto_set.push_back(t->trial);
  }
  std::sort(out.pareto_set.begin(), out.pareto_set.end());
  return out;
}

std::string trials_jsonl(const SweepResult& result) {
  std::string out;
  for (const auto& t : result.trials) {
    nlohmann::ordered_json j;
    j["trial"] = t.trial;
    j["lambda"] = t.lambda;
    j["seed"] = t.seed;
    j["loss"] = std::string(to_string(result.loss_kind));
    j["val_sigma_iou"] = t.val_sigma_iou ? nlohmann::ordered_json(*t.val_sigma_iou)
                                         : nlohmann::ordered_json(nullptr);
    j["val_accuracy"] = t.val_accuracy;
    for (std::size_t k = 0; k < kAllLossKinds.size(); ++k) {
      j[std::string(to_string(kAllLossKinds[k]))] = t.val_fairness[k];
    }
    out += j.dump() + "\n";
  }
  return out;
}

nlohmann::ordered_json summary_json(const SweepResult& result) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["strategy"] = std::string(to_string(result.strategy));
  j["loss"] = std::string(to_string(result.loss_kind));
  j["baseline_accuracy"] = result.baseline_accuracy;
  j["baseline_sigma_iou"] =
      result.baseline_sigma_iou ? ordered_json(*result.baseline_sigma_iou) : ordered_json(nullptr);
  j["accuracy_floor"] = result.accuracy_floor;
  j["n_trials"] = result.trials.size();
  j["stop_reason"] = result.stop_reason;
  j["selected_trial"] =
      result.selected_trial ? ordered_json(*result.selected_trial) : ordered_json(nullptr);
  j["selected_lambda"] = result.selected_lambda;
  const Trend tr = trend(result);
  j["spearman_fairness"] =
      tr.spearman_fairness ? ordered_json(*tr.spearman_fairness) : ordered_json(nullptr);
  j["spearman_accuracy"] =
      tr.spearman_accuracy ? ordered_json(*tr.spearman_accuracy) : ordered_json(nullptr);
  j["pareto_set"] = tr.pareto_set;
  j["test_report"] = to_json(result.selected_test_report);
  j["warnings"] = result.warnings;
  return j;
}

}  // namespace fairreg
