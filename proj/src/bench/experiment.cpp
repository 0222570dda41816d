#include "sqrtslr/bench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <map>
#include <thread>
#include <tuple>
#include <utility>

#include "sqrtslr/errors.hpp"
#include "sqrtslr/estimators.hpp"

namespace sqrtslr::bench {

std::string_view to_string(Method m) { return m == Method::proposed ? "proposed" : "reference"; }

std::string_view to_string(Precision p) { return p == Precision::binary32 ? "binary32" : "binary64"; }

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::ok:
      return "ok";
    case TrialStatus::downdate_failure:
      return "downdate_failure";
    case TrialStatus::numerical_failure:
      return "numerical_failure";
  }
  return "ok";
}

Method parse_method(std::string_view s) {
  if (s == "proposed" || s == "prop") return Method::proposed;
  if (s == "reference" || s == "ref") return Method::reference;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

Precision parse_precision(std::string_view s) {
  if (s == "32" || s == "binary32" || s == "float") return Precision::binary32;
  if (s == "64" || s == "binary64" || s == "double") return Precision::binary64;
  throw ConfigError("unknown precision '" + std::string(s) + "'");
}

TrialStatus parse_status(std::string_view s) {
  if (s == "ok") return TrialStatus::ok;
  if (s == "downdate_failure") return TrialStatus::downdate_failure;
  if (s == "numerical_failure") return TrialStatus::numerical_failure;
  throw ConfigError("unknown status '" + std::string(s) + "'");
}

RuleSpec RuleSpec::parse(std::string_view text) {
  RuleSpec spec;
  if (text == "cubature" || text == "sr" || text == "spherical-radial") return spec;
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("unknown rule '" + std::string(text) + "'");
  const auto head = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  if (head == "gh") {
    spec.kind = Kind::gauss_hermite;
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), spec.order);
    if (ec != std::errc() || ptr != arg.data() + arg.size() || spec.order < 1) {
      throw ConfigError("gh:<order> needs a positive integer order");
    }
    return spec;
  }
  if (head == "ut") {
    spec.kind = Kind::unscented;
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), spec.kappa);
    if (ec != std::errc() || ptr != arg.data() + arg.size()) throw ConfigError("ut:<kappa> needs a number");
    return spec;
  }
  throw ConfigError("unknown rule '" + std::string(text) + "'");
}

std::string RuleSpec::str() const {
  switch (kind) {
    case Kind::gauss_hermite:
      return "gh:" + std::to_string(order);
    case Kind::unscented: {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, kappa);
      return "ut:" + std::string(buf, ptr);
    }
    case Kind::spherical_radial:
      break;
  }
  return "cubature";
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (length < 2) throw ConfigError("length must be >= 2");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (methods.empty()) throw ConfigError("at least one method required");
  if (precisions.empty()) throw ConfigError("at least one precision required");
  params.validate();
  // Rejects rules that violate positivity or degree-2 exactness up front.
  EstimatorOptions<double> probe(rule.build<double>(ct::kStateDim));
  (void)probe;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(trial) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

template <typename Scalar>
std::vector<TrialRecord> run_cell(const ExperimentConfig& config, const ct::Trajectory<double>& truth,
                                  std::size_t trial, Method method, Precision precision) {
  // The one and only cast into the cell precision.
  const auto params = config.params.cast<Scalar>();
  std::vector<Vector<Scalar>> observations;
  observations.reserve(truth.observations.size() - 1);
  for (std::size_t m = 1; m < truth.observations.size(); ++m) {
    observations.push_back(truth.observations[m].cast<Scalar>());
  }
  const auto model = ct::make_model(params);
  const auto init = ct::initial_density(params, config.sigma0_reading);
  const EstimatorOptions<Scalar> options(config.rule.build<Scalar>(ct::kStateDim),
                                         method == Method::proposed ? ResidualRoute::qr : ResidualRoute::downdate);

  std::vector<TrialRecord> records;
  auto failed = [&](TrialStatus status, const Error& e) {
    TrialRecord r;
    r.trial = trial;
    r.time = e.time_index().value_or(0);
    r.method = method;
    r.precision = precision;
    r.status = status;
    r.failure_step = r.time;
    records.push_back(r);
    return records;
  };
  std::vector<GaussianSqrt<Scalar>> smoothed;
  try {
    smoothed = ipls(init, std::span<const Vector<Scalar>>(observations), model, options, config.iterations);
  } catch (const DowndateFailure& e) {
    return failed(TrialStatus::downdate_failure, e);
  } catch (const Error& e) {
    return failed(TrialStatus::numerical_failure, e);
  }

  records.reserve(smoothed.size());
  for (std::size_t m = 0; m < smoothed.size(); ++m) {
    const Vector<double> estimate = smoothed[m].mean.template cast<double>();
    const Vector<double>& x = truth.states[m];
    TrialRecord r;
    r.trial = trial;
    r.time = m;
    r.method = method;
    r.precision = precision;
    r.errors = ErrorNorms{(estimate.head<2>() - x.head<2>()).norm(), (estimate.segment<2>(2) - x.segment<2>(2)).norm(),
                          std::abs(estimate(4) - x(4))};
    if (!std::isfinite(r.errors->position) || !std::isfinite(r.errors->velocity) ||
        !std::isfinite(r.errors->turn_rate)) {
      r.errors.reset();
      r.status = TrialStatus::numerical_failure;
      r.failure_step = m;
      records.assign(1, r);
      return records;
    }
    records.push_back(r);
  }
  return records;
}

}  // namespace

std::vector<TrialRecord> run_trial(const ExperimentConfig& config, std::size_t trial) {
  const auto truth =
      ct::simulate_trajectory(config.params, config.length, trial_seed(config.seed, trial), config.sigma0_reading);
  std::vector<TrialRecord> out;
  for (Method method : config.methods) {
    for (Precision precision : config.precisions) {
      auto cell = precision == Precision::binary32 ? run_cell<float>(config, truth, trial, method, precision)
                                                   : run_cell<double>(config, truth, trial, method, precision);
      out.insert(out.end(), cell.begin(), cell.end());
    }
  }
  return out;
}

void sort_records(std::vector<TrialRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.trial, a.time, a.method, a.precision) < std::tie(b.trial, b.time, b.method, b.precision);
  });
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::vector<TrialRecord>> per_trial(config.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < config.trials; t = next++) per_trial[t] = run_trial(config, t);
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned count = std::min<std::size_t>(config.threads ? config.threads : hw, config.trials);
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < count; ++i) pool.emplace_back(worker);
    worker();
  }
  std::vector<TrialRecord> records;
  for (auto& chunk : per_trial) records.insert(records.end(), chunk.begin(), chunk.end());
  sort_records(records);
  return records;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw EmptyInput("aggregate: no records");
  struct Sum {
    double pos = 0, vel = 0, omega = 0;
    std::size_t ok = 0;
  };
  using Cell = std::pair<Method, Precision>;
  std::map<Cell, std::map<std::size_t, Sum>> sums;
  std::map<Cell, std::size_t> failures;
  std::vector<std::size_t> times;
  for (const auto& r : records) {
    const Cell cell{r.method, r.precision};
    auto& per_time = sums[cell];
    failures.try_emplace(cell, 0);
    times.push_back(r.time);
    if (r.status != TrialStatus::ok) {
      ++failures[cell];
      continue;
    }
    auto& s = per_time[r.time];
    s.pos += r.errors->position;
    s.vel += r.errors->velocity;
    s.omega += r.errors->turn_rate;
    ++s.ok;
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::vector<AggregateRow> rows;
  for (const auto& [cell, per_time] : sums) {
    for (std::size_t t : times) {
      AggregateRow row;
      row.method = cell.first;
      row.precision = cell.second;
      row.time = t;
      row.failures = failures[cell];
      if (auto it = per_time.find(t); it != per_time.end() && it->second.ok > 0) {
        const auto& s = it->second;
        const double k = static_cast<double>(s.ok);
        row.trials_ok = s.ok;
        row.mean = ErrorNorms{s.pos / k, s.vel / k, s.omega / k};
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace sqrtslr::bench
