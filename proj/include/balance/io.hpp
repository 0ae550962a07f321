#pragma once

// File formats used by the command-line tools: CSV/JSON tables, candidate
// pools, and pyramid directories of BLT1 tensors with a JSON manifest.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "json.hpp"

#include "balance/error.hpp"
#include "balance/pyramid.hpp"
#include "balance/sampling.hpp"
#include "balance/tensor_io.hpp"

namespace balance::io {

/// Shortest text that is guaranteed to round-trip: 17 significant digits,
/// '.' decimal point, locale independent.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw InvalidArgument("table row width mismatch");
    rows.push_back(std::move(row));
  }
};

inline std::string cell_text(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  return std::get<std::string>(c);
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t k = 0; k < t.columns.size(); ++k) out += (k ? "," : "") + t.columns[k];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + cell_text(row[k]);
    out += '\n';
  }
  return out;
}

/// Array of objects keyed by column name. Doubles use the same 17-digit text
/// as the CSV writer.
inline std::string to_json(const Table& t) {
  std::string out = "[\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out += "  {";
    for (std::size_t k = 0; k < t.columns.size(); ++k) {
      out += (k ? ", " : "") + nlohmann::json(t.columns[k]).dump() + ": ";
      const Cell& c = t.rows[r][k];
      out += std::holds_alternative<std::string>(c) ? nlohmann::json(std::get<std::string>(c)).dump() : cell_text(c);
    }
    out += r + 1 < t.rows.size() ? "},\n" : "}\n";
  }
  return out + "]\n";
}

/// Writes via a temporary sibling and rename, so a failed write never leaves
/// a partial file behind.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw InvalidArgument("failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("cannot parse " + what + " from '" + s + "'");
  }
  return v;
}

/// Rows of a headed CSV file; the header must equal `expected` exactly.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in, const std::vector<std::string>& expected) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("empty CSV input");
  if (split_csv_line(line) != expected) {
    std::string want;
    for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
    throw InvalidArgument("unexpected CSV header, want '" + want + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != expected.size()) {
      throw InvalidArgument("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(expected.size()) +
                            " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline const std::vector<std::string>& candidate_columns() {
  static const std::vector<std::string> cols{"id", "iou", "class_id", "instance_id", "is_positive"};
  return cols;
}

/// instance_id is -1 (or empty) when absent; is_positive accepts 0/1 or
/// true/false.
inline std::vector<Candidate> read_candidates(std::istream& in) {
  std::vector<Candidate> pool;
  for (const auto& f : read_csv(in, candidate_columns())) {
    Candidate c;
    c.id = parse_number<std::int64_t>(f[0], "id");
    c.iou = parse_number<double>(f[1], "iou");
    c.class_id = parse_number<int>(f[2], "class_id");
    if (!f[3].empty()) {
      const int inst = parse_number<int>(f[3], "instance_id");
      if (inst >= 0) c.instance_id = inst;
    }
    if (f[4] == "1" || f[4] == "true") {
      c.is_positive = true;
    } else if (f[4] == "0" || f[4] == "false") {
      c.is_positive = false;
    } else {
      throw InvalidArgument("cannot parse is_positive from '" + f[4] + "'");
    }
    c.validate();
    pool.push_back(c);
  }
  return pool;
}

inline std::vector<Candidate> read_candidates_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_candidates(in);
}

inline Table candidates_table(const std::vector<Candidate>& pool) {
  Table t{candidate_columns(), {}};
  for (const auto& c : pool) {
    t.add({c.id, c.iou, std::int64_t{c.class_id}, std::int64_t{c.instance_id.value_or(-1)},
           std::int64_t{c.is_positive ? 1 : 0}});
  }
  return t;
}

inline nlohmann::json draw_to_json(const SampleDraw& d) {
  return {{"selected_ids", d.selected_ids},
          {"per_bin_counts", d.per_bin_counts},
          {"per_bin_candidates", d.per_bin_candidates}};
}

// Pyramid directory: level_<l>.blt files plus manifest.json
//   {"levels": [{"level": 2, "channels": C, "height": H, "width": W, "file": "level_2.blt"}, ...]}

inline FeaturePyramid read_pyramid(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InvalidArgument("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad pyramid manifest: ") + e.what());
  }
  if (!manifest.contains("levels") || !manifest["levels"].is_array() || manifest["levels"].empty()) {
    throw InvalidArgument("pyramid manifest needs a non-empty 'levels' array");
  }
  FeaturePyramid pyr;
  int expected = 0;
  for (std::size_t k = 0; k < manifest["levels"].size(); ++k) {
    const auto& entry = manifest["levels"][k];
    const int level = entry.at("level").get<int>();
    if (k == 0) {
      pyr.min_level = level;
      expected = level;
    }
    if (level != expected) throw InvalidArgument("pyramid manifest levels must be consecutive and ascending");
    ++expected;
    const std::string file = entry.contains("file") ? entry["file"].get<std::string>()
                                                   : "level_" + std::to_string(level) + ".blt";
    Tensor t = read_tensor((dir / file).string());
    const Shape want{entry.at("channels").get<std::size_t>(), entry.at("height").get<std::size_t>(),
                     entry.at("width").get<std::size_t>()};
    if (t.shape() != want) {
      throw InvalidArgument("level " + std::to_string(level) + " is " + t.shape().str() + ", manifest says " +
                            want.str());
    }
    pyr.levels.push_back(std::move(t));
  }
  pyr.validate();
  return pyr;
}

inline std::string pyramid_manifest(const FeaturePyramid& pyr) {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t k = 0; k < pyr.levels.size(); ++k) {
    const int l = pyr.min_level + static_cast<int>(k);
    const auto& t = pyr.levels[k];
    levels.push_back({{"level", l},
                      {"channels", t.channels()},
                      {"height", t.height()},
                      {"width", t.width()},
                      {"file", "level_" + std::to_string(l) + ".blt"}});
  }
  return nlohmann::json{{"levels", levels}}.dump(2) + "\n";
}

/// Writes into a staging directory and renames it into place, so readers never
/// see a half-written pyramid. An existing `dir` is replaced.
inline void write_pyramid(const std::filesystem::path& dir, const FeaturePyramid& pyr) {
  namespace fs = std::filesystem;
  const fs::path staging = dir.string() + ".staging";
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    for (std::size_t k = 0; k < pyr.levels.size(); ++k) {
      const int l = pyr.min_level + static_cast<int>(k);
      write_tensor((staging / ("level_" + std::to_string(l) + ".blt")).string(), pyr.levels[k]);
    }
    write_file_atomic(staging / "manifest.json", pyramid_manifest(pyr));
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  fs::remove_all(dir);
  fs::rename(staging, dir);
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw InvalidArgument(name + " must be a 2-D array");
  Matrix m = Matrix::zeros(j.size(), j[0].size());
  for (std::size_t r = 0; r < m.rows; ++r) {
    if (!j[r].is_array() || j[r].size() != m.cols) throw InvalidArgument(name + ": ragged rows");
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

/// {"theta": [[...]], "phi": [[...]], "g": [[...]]}
inline NonLocalParams read_nonlocal_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return {matrix_from_json(j.at("theta"), "theta"), matrix_from_json(j.at("phi"), "phi"),
            matrix_from_json(j.at("g"), "g")};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad non-local params file: ") + e.what());
  }
}

}  // namespace balance::io
