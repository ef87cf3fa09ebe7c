#pragma once

// Per-seed metrics stream: append-only CSV with header
//   run_id,seed,env_step,scalar,value
// Values use the shortest round-trip decimal form, so streams written by
// identical runs are byte-identical and re-read values are exact.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "crossq/errors.hpp"

namespace crossq::experiment {

inline constexpr const char* kMetricsHeader = "run_id,seed,env_step,scalar,value";

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw MissingData("malformed number '" + std::string(s) + "'");
  }
  return v;
}

template <typename Int>
Int parse_integer(std::string_view s) {
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw MissingData("malformed integer '" + std::string(s) + "'");
  }
  return v;
}

struct MetricRecord {
  std::string run_id;
  std::uint64_t seed = 0;
  std::int64_t env_step = 0;
  std::string scalar;
  double value = 0.0;
};

class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, std::string run_id, std::uint64_t seed)
      : out_(path, std::ios::trunc), run_id_(std::move(run_id)), seed_(seed) {
    if (!out_) throw ConfigError("cannot write metrics file '" + path.string() + "'");
    out_ << kMetricsHeader << '\n';
  }

  void write(std::int64_t env_step, const std::string& scalar, double value) {
    auto& last = last_step_[scalar];
    if (env_step < last) throw UsageError("metric '" + scalar + "' written out of step order");
    last = env_step;
    out_ << run_id_ << ',' << seed_ << ',' << env_step << ',' << scalar << ',' << format_number(value) << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::string run_id_;
  std::uint64_t seed_;
  std::map<std::string, std::int64_t> last_step_;
};

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<MetricRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingData("cannot read metrics file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw MissingData("metrics file '" + path.string() + "' has an unexpected header");
  }
  std::vector<MetricRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw MissingData("malformed metrics line in '" + path.string() + "': " + line);
    MetricRecord r;
    r.run_id = std::string(f[0]);
    r.seed = parse_integer<std::uint64_t>(f[1]);
    r.env_step = parse_integer<std::int64_t>(f[2]);
    r.scalar = std::string(f[3]);
    r.value = parse_number(f[4]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace crossq::experiment
