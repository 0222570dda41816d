#include "sqrtslr/bench/records.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "sqrtslr/errors.hpp"

namespace sqrtslr::bench {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

namespace {

void write_optional(std::ostream& out, const std::optional<ErrorNorms>& e) {
  if (e) {
    out << format_double(e->position) << ',' << format_double(e->velocity) << ',' << format_double(e->turn_rate);
  } else {
    out << ",,";
  }
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << kRecordsHeader << '\n';
  for (const auto& r : records) {
    out << r.trial << ',' << r.time << ',' << to_string(r.method) << ',' << to_string(r.precision) << ',';
    write_optional(out, r.errors);
    out << ',' << to_string(r.status) << ',';
    if (r.failure_step) out << *r.failure_step;
    out << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregateHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << to_string(r.precision) << ',' << r.time << ',';
    write_optional(out, r.mean);
    out << ',' << r.trials_ok << ',' << r.failures << '\n';
  }
}

std::vector<TrialRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader) {
    throw ConfigError("records file does not start with the expected header");
  }
  std::vector<TrialRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 9) throw ConfigError("line " + std::to_string(line_no) + ": expected 9 fields");
    TrialRecord r;
    r.trial = parse_number<std::size_t>(f[0], line_no);
    r.time = parse_number<std::size_t>(f[1], line_no);
    r.method = parse_method(f[2]);
    r.precision = parse_precision(f[3]);
    r.status = parse_status(f[7]);
    if (r.status == TrialStatus::ok) {
      r.errors = ErrorNorms{parse_number<double>(f[4], line_no), parse_number<double>(f[5], line_no),
                            parse_number<double>(f[6], line_no)};
    } else if (!f[4].empty() || !f[5].empty() || !f[6].empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": failed record carries error values");
    }
    if (!f[8].empty()) r.failure_step = parse_number<std::size_t>(f[8], line_no);
    records.push_back(r);
  }
  return records;
}

std::string mean_path(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + "_mean";
  return path.substr(0, dot) + "_mean" + path.substr(dot);
}

void emit_csv(const std::vector<TrialRecord>& records, const std::vector<AggregateRow>& aggregates,
              const std::string& path) {
  auto write = [](const std::string& p, auto&& body) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + p + "' for writing");
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing '" + p + "'");
  };
  write(path, [&](std::ostream& o) { write_records_csv(o, records); });
  write(mean_path(path), [&](std::ostream& o) { write_aggregate_csv(o, aggregates); });
}

}  // namespace sqrtslr::bench
