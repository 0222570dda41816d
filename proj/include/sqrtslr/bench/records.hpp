#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sqrtslr/bench/experiment.hpp"

namespace sqrtslr::bench {

inline constexpr const char* kRecordsHeader =
    "trial,time,method,precision,pos_err,vel_err,omega_err,status,failure_step";
inline constexpr const char* kAggregateHeader =
    "method,precision,time,pos_err,vel_err,omega_err,trials_ok,failures";

/// Round-trip-exact text for a binary64 value: 17 significant digits.
std::string format_double(double v);

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Parses a records file; throws ConfigError naming the offending line.
std::vector<TrialRecord> read_records_csv(std::istream& in);

/// "dir/results.csv" -> "dir/results_mean.csv".
std::string mean_path(const std::string& path);

/// Writes records to `path` and aggregates to mean_path(path). Throws
/// std::runtime_error on I/O failure.
void emit_csv(const std::vector<TrialRecord>& records, const std::vector<AggregateRow>& aggregates,
              const std::string& path);

}  // namespace sqrtslr::bench
