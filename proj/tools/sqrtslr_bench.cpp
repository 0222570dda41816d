// Command-line harness for the coordinated-turn smoothing benchmark.
//
//   sqrtslr-bench simulate   --length 101 --seed 7 --out trajectory.csv
//   sqrtslr-bench experiment --trials 100 --methods proposed,reference --precisions 32,64 --out results.csv
//   sqrtslr-bench aggregate  --in results.csv [--out results_mean.csv]

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sqrtslr/bench/experiment.hpp"
#include "sqrtslr/bench/records.hpp"
#include "sqrtslr/ct_model.hpp"
#include "sqrtslr/errors.hpp"

namespace {

using namespace sqrtslr;
using namespace sqrtslr::bench;

constexpr int kConfigExit = 2;
constexpr int kIoExit = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ct::Sigma0Reading parse_sigma0(const std::string& s) {
  if (s == "variance") return ct::Sigma0Reading::variance;
  if (s == "stddev") return ct::Sigma0Reading::stddev;
  throw ConfigError("--sigma0 must be 'variance' or 'stddev'");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

void print_summary(const std::vector<AggregateRow>& rows) {
  std::map<std::pair<Method, Precision>, std::pair<std::size_t, const AggregateRow*>> cells;
  for (const auto& r : rows) cells[{r.method, r.precision}] = {r.failures, &r};
  for (const auto& [cell, info] : cells) {
    const auto* last = info.second;
    std::cout << to_string(cell.first) << '/' << to_string(cell.second) << ": failures=" << info.first;
    if (last->mean) {
      std::cout << " final mean errors pos=" << last->mean->position << " vel=" << last->mean->velocity
                << " omega=" << last->mean->turn_rate;
    }
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Square-root SLR smoother benchmark on the coordinated-turn tracking problem"};
  app.require_subcommand(1);

  std::size_t trials = 100, length = 101, iterations = 10;
  std::string methods = "proposed,reference", precisions = "32,64", rule = "cubature", out_path = "results.csv";
  std::string sigma0 = "variance", in_path;
  std::uint64_t seed = ExperimentConfig{}.seed;
  unsigned threads = 0;

  auto* simulate = app.add_subcommand("simulate", "Simulate one ground-truth trajectory with observations");
  simulate->add_option("--length", length, "Number of states")->capture_default_str();
  simulate->add_option("--seed", seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", out_path, "Output CSV")->capture_default_str();
  simulate->add_option("--sigma0", sigma0, "Initial covariance reading: variance|stddev")->capture_default_str();

  auto* experiment = app.add_subcommand("experiment", "Run the Monte Carlo smoothing comparison");
  experiment->add_option("--trials", trials, "Monte Carlo trials")->capture_default_str();
  experiment->add_option("--length", length, "Trajectory length (states)")->capture_default_str();
  experiment->add_option("--iterations", iterations, "Smoother iterations")->capture_default_str();
  experiment->add_option("--methods", methods, "Comma list of proposed,reference")->capture_default_str();
  experiment->add_option("--precisions", precisions, "Comma list of 32,64")->capture_default_str();
  experiment->add_option("--rule", rule, "cubature | gh:<order> | ut:<kappa>")->capture_default_str();
  experiment->add_option("--seed", seed, "Master seed")->capture_default_str();
  experiment->add_option("--out", out_path, "Records CSV (aggregates go to *_mean)")->capture_default_str();
  experiment->add_option("--sigma0", sigma0, "Initial covariance reading: variance|stddev")->capture_default_str();
  experiment->add_option("--threads", threads, "Worker threads (0 = hardware)")->capture_default_str();

  auto* aggregate_cmd = app.add_subcommand("aggregate", "Recompute per-step means from a records CSV");
  aggregate_cmd->add_option("--in", in_path, "Records CSV")->required();
  aggregate_cmd->add_option("--out", out_path, "Output CSV (default: <in>_mean)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      ct::Params<double> params;
      const auto traj = ct::simulate_trajectory(params, length, seed, parse_sigma0(sigma0));
      auto out = open_output(out_path);
      out << "time,p1,p2,v1,v2,omega,range,bearing\n";
      for (std::size_t m = 0; m < traj.states.size(); ++m) {
        out << m;
        for (Index i = 0; i < traj.states[m].size(); ++i) out << ',' << format_double(traj.states[m](i));
        for (Index i = 0; i < traj.observations[m].size(); ++i) out << ',' << format_double(traj.observations[m](i));
        out << '\n';
      }
      if (!out) throw std::runtime_error("failed writing '" + out_path + "'");
      return 0;
    }

    if (experiment->parsed()) {
      ExperimentConfig config;
      config.trials = trials;
      config.length = length;
      config.iterations = iterations;
      config.methods.clear();
      for (const auto& m : split_list(methods)) config.methods.push_back(parse_method(m));
      config.precisions.clear();
      for (const auto& p : split_list(precisions)) config.precisions.push_back(parse_precision(p));
      config.rule = RuleSpec::parse(rule);
      config.seed = seed;
      config.output_path = out_path;
      config.sigma0_reading = parse_sigma0(sigma0);
      config.threads = threads;
      config.validate();

      const auto records = run_experiment(config);
      const auto rows = aggregate(records);
      emit_csv(records, rows, config.output_path);
      print_summary(rows);
      return 0;
    }

    if (aggregate_cmd->parsed()) {
      std::ifstream in(in_path, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open '" + in_path + "'");
      const auto records = read_records_csv(in);
      const auto rows = records.empty() ? std::vector<AggregateRow>{} : aggregate(records);
      const std::string target = app.got_subcommand(aggregate_cmd) && aggregate_cmd->count("--out")
                                     ? out_path
                                     : mean_path(in_path);
      auto out = open_output(target);
      write_aggregate_csv(out, rows);
      if (!out) throw std::runtime_error("failed writing '" + target + "'");
      print_summary(rows);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoExit;
  }
  return 0;
}
