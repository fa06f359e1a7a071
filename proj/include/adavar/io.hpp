#pragma once

// CSV and JSON persistence for traces, curves and histograms.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "adavar/estimation.hpp"
#include "adavar/experiments.hpp"
#include "adavar/solver.hpp"

namespace adavar {

inline constexpr std::string_view kVersion = "0.1.0";

class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not an unsigned integer: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

// Header line plus rows, each row already split into cells.
inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                                      const std::vector<std::string>& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) throw IoError(path, "missing header row");
  std::vector<std::string> got;
  for (auto c : split_csv_line(line)) got.emplace_back(c);
  if (got != header) throw IoError(path, "unexpected header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    for (auto c : split_csv_line(line)) row.emplace_back(c);
    if (row.size() != header.size()) throw IoError(path, "row " + std::to_string(rows.size() + 1) + " has wrong width");
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Curves

inline void write_curve_csv(const std::filesystem::path& path, const ConvergenceCurve& c) {
  auto out = open_output(path);
  out << "checkpoint,failure_fraction,wilson_lo,wilson_hi\n";
  for (std::size_t i = 0; i < c.checkpoints.size(); ++i) {
    out << c.checkpoints[i] << ',' << format_double(c.failure_fraction[i]) << ',' << format_double(c.wilson_lo[i])
        << ',' << format_double(c.wilson_hi[i]) << '\n';
  }
  finish_output(out, path);
}

// The run count is not part of the CSV; pass it in when it matters.
inline ConvergenceCurve read_curve_csv(const std::filesystem::path& path, std::size_t runs = 0) {
  ConvergenceCurve c;
  c.runs = runs;
  try {
    for (const auto& row : read_csv(path, {"checkpoint", "failure_fraction", "wilson_lo", "wilson_hi"})) {
      c.checkpoints.push_back(parse_size(row[0]));
      c.failure_fraction.push_back(parse_double(row[1]));
      c.wilson_lo.push_back(parse_double(row[2]));
      c.wilson_hi.push_back(parse_double(row[3]));
    }
  } catch (const std::invalid_argument& e) {
    throw IoError(path, e.what());
  }
  return c;
}

// Long format: one row per (run, checkpoint).
inline void write_distances_csv(const std::filesystem::path& path, const std::vector<std::size_t>& checkpoints,
                                const RunDistances& d) {
  auto out = open_output(path);
  out << "run,checkpoint,dist_current,dist_best\n";
  for (std::size_t k = 0; k < d.current.size(); ++k) {
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      out << k << ',' << checkpoints[i] << ',' << format_double(d.current[k][i]) << ','
          << format_double(d.best[k][i]) << '\n';
    }
  }
  finish_output(out, path);
}

inline RunDistances read_distances_csv(const std::filesystem::path& path, std::vector<std::size_t>& checkpoints) {
  RunDistances d;
  checkpoints.clear();
  try {
    for (const auto& row : read_csv(path, {"run", "checkpoint", "dist_current", "dist_best"})) {
      const std::size_t k = parse_size(row[0]);
      const std::size_t cp = parse_size(row[1]);
      if (k == d.current.size()) {
        d.current.emplace_back();
        d.best.emplace_back();
      } else if (k + 1 != d.current.size()) {
        throw std::invalid_argument("runs out of order");
      }
      if (k == 0) checkpoints.push_back(cp);
      d.current[k].push_back(parse_double(row[2]));
      d.best[k].push_back(parse_double(row[3]));
    }
  } catch (const std::invalid_argument& e) {
    throw IoError(path, e.what());
  }
  return d;
}

// ---------------------------------------------------------------------------
// Histograms

inline void write_histogram_csv(const std::filesystem::path& path, const OccupationHistogram& h) {
  auto out = open_output(path);
  out << "bin_lo,bin_hi,mass\n";
  for (std::size_t i = 0; i < h.bins(); ++i) {
    out << format_double(h.bin_lo(i)) << ',' << format_double(h.bin_hi(i)) << ',' << format_double(h.mass[i]) << '\n';
  }
  finish_output(out, path);
}

inline OccupationHistogram read_histogram_csv(const std::filesystem::path& path) {
  OccupationHistogram h;
  try {
    for (const auto& row : read_csv(path, {"bin_lo", "bin_hi", "mass"})) {
      const double lo = parse_double(row[0]);
      if (h.edges.empty()) h.edges.push_back(lo);
      h.edges.push_back(parse_double(row[1]));
      h.mass.push_back(parse_double(row[2]));
    }
  } catch (const std::invalid_argument& e) {
    throw IoError(path, e.what());
  }
  return h;
}

// ---------------------------------------------------------------------------
// Traces

// Streams records as they are produced; tracks best_f itself.
class TraceCsvWriter {
 public:
  TraceCsvWriter(const std::filesystem::path& path, std::size_t dim, bool coords)
      : path_(path), out_(open_output(path)), dim_(dim), coords_(coords) {
    out_ << "n,f_value,cutoff,sigma_used,regime,best_f";
    if (coords_) {
      for (std::size_t i = 0; i < dim_; ++i) out_ << ",x" << i;
    }
    out_ << '\n';
  }

  void write(const IterateRecord& r) {
    best_ = std::min(best_, r.f_value);
    out_ << r.n << ',' << format_double(r.f_value) << ',' << format_double(r.cutoff) << ','
         << format_double(r.sigma_used) << ',' << to_string(r.regime) << ',' << format_double(best_);
    if (coords_) {
      for (double v : r.position) out_ << ',' << format_double(v);
    }
    out_ << '\n';
  }

  void close() { finish_output(out_, path_); }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t dim_;
  bool coords_;
  double best_ = kInf;
};

inline void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace, bool coords) {
  const std::size_t dim = trace.records.empty() ? 0 : trace.records.front().position.size();
  TraceCsvWriter w(path, dim, coords);
  for (const auto& r : trace.records) w.write(r);
  w.close();
}

// ---------------------------------------------------------------------------
// Level sets

struct LevelSetRow {
  double level = 0.0;
  double f_hat = 0.0;
  std::size_t samples_used = 0;
  Provenance provenance = Provenance::iid_uniform;
};

inline void write_levelset_csv(const std::filesystem::path& path, const std::vector<LevelSetRow>& rows) {
  auto out = open_output(path);
  out << "level,f_hat,samples_used,provenance\n";
  for (const auto& r : rows) {
    out << format_double(r.level) << ',' << format_double(r.f_hat) << ',' << r.samples_used << ','
        << to_string(r.provenance) << '\n';
  }
  finish_output(out, path);
}

// ---------------------------------------------------------------------------
// JSON

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  finish_output(out, path);
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path, e.what());
  }
}

inline void write_version(const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "adavar " << kVersion << '\n';
  finish_output(out, path);
}

}  // namespace adavar
