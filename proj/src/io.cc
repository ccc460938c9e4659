#include "geoloss/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geoloss/error.hpp"

namespace geoloss::io {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool LooksLikeJson(const std::string& text) {
  const std::string t = Trim(text);
  return !t.empty() && t.front() == '{';
}

Json ParseJson(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

Vector JsonArray(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_array())
    throw ParseError(std::string("JSON object must have an array \"") + key + "\"");
  const Json& arr = j[key];
  Vector v(static_cast<Index>(arr.size()));
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw ParseError(std::string("non-numeric entry in \"") + key + "\" at index " +
                       std::to_string(i));
    v[static_cast<Index>(i)] = arr[i].get<double>();
  }
  return v;
}

}  // namespace

CsvTable ParseCsv(std::istream& in) {
  CsvTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      const std::string t = Trim(cell);
      double v = 0;
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ParseError("not a finite number: '" + t + "'", line_no, col);
      row.push_back(v);
    }
    if (!line.empty() && Trim(line).back() == ',')
      throw ParseError("empty cell", line_no, col + 1);
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  return table;
}

CsvTable ParseCsv(const std::string& text) {
  std::istringstream in(text);
  return ParseCsv(in);
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << contents;
}

bool HasJsonExtension(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

Vector ParseVector(const std::string& text, const char* json_key) {
  if (LooksLikeJson(text)) return JsonArray(ParseJson(text), json_key);
  const CsvTable t = ParseCsv(text);
  if (t.rows.empty()) throw ParseError("empty input");
  std::vector<double> values;
  if (t.rows.size() == 1) {
    values = t.rows[0];
  } else {
    for (size_t r = 0; r < t.rows.size(); ++r) {
      if (t.rows[r].size() != 1)
        throw ParseError("expected one value per row, found " + std::to_string(t.rows[r].size()),
                         t.line_numbers[r], 2);
      values.push_back(t.rows[r][0]);
    }
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

DiscreteMeasure ParseMeasure(const std::string& text) {
  const Vector v = ParseVector(text, "weights");
  try {
    return DiscreteMeasure(v);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid measure: ") + e.what());
  }
}

ScoreVector ParseScores(const std::string& text) {
  return ScoreVector(ParseVector(text, "values"));
}

CostSpec ParseCost(const std::string& text, double epsilon) {
  Matrix m;
  if (LooksLikeJson(text)) {
    const Json j = ParseJson(text);
    if (!j.is_object() || !j.contains("matrix") || !j["matrix"].is_array())
      throw ParseError("JSON cost must have an array \"matrix\"");
    const Json& rows = j["matrix"];
    const Index d = static_cast<Index>(rows.size());
    m.resize(d, d);
    for (Index i = 0; i < d; ++i) {
      const Json& row = rows[static_cast<size_t>(i)];
      if (!row.is_array() || static_cast<Index>(row.size()) != d)
        throw ParseError("cost matrix is not square: row " + std::to_string(i + 1) + " has " +
                             std::to_string(row.is_array() ? row.size() : 0) + " entries, expected " +
                             std::to_string(d),
                         static_cast<int>(i + 1), 0);
      for (Index k = 0; k < d; ++k) {
        if (!row[static_cast<size_t>(k)].is_number())
          throw ParseError("non-numeric cost entry", static_cast<int>(i + 1),
                           static_cast<int>(k + 1));
        m(i, k) = row[static_cast<size_t>(k)].get<double>();
      }
    }
    if (j.contains("epsilon")) {
      if (!j["epsilon"].is_number()) throw ParseError("\"epsilon\" must be a number");
      epsilon = j["epsilon"].get<double>();
    }
  } else {
    const CsvTable t = ParseCsv(text);
    if (t.rows.empty()) throw ParseError("empty cost file");
    const Index d = static_cast<Index>(t.rows.size());
    m.resize(d, d);
    for (Index i = 0; i < d; ++i) {
      const auto& row = t.rows[static_cast<size_t>(i)];
      if (static_cast<Index>(row.size()) != d) {
        const int line = t.line_numbers[static_cast<size_t>(i)];
        const int col = static_cast<int>(std::min<size_t>(row.size(), static_cast<size_t>(d)) + 1);
        throw ParseError("cost matrix is not square: " + std::to_string(d) + " rows but row " +
                             std::to_string(line) + " has " + std::to_string(row.size()) +
                             " columns",
                         line, col);
      }
      for (Index k = 0; k < d; ++k) m(i, k) = row[static_cast<size_t>(k)];
    }
  }
  try {
    return CostSpec(m, epsilon);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid cost: ") + e.what());
  }
}

DiscreteMeasure LoadMeasure(const std::string& path) { return ParseMeasure(ReadFile(path)); }
ScoreVector LoadScores(const std::string& path) { return ParseScores(ReadFile(path)); }
CostSpec LoadCost(const std::string& path, double epsilon) {
  return ParseCost(ReadFile(path), epsilon);
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string VectorToCsv(const Vector& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) out += FormatDouble(v[i]) + "\n";
  return out;
}

std::string MatrixToCsv(const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index k = 0; k < m.cols(); ++k) {
      if (k) out += ',';
      out += FormatDouble(m(i, k));
    }
    out += '\n';
  }
  return out;
}

namespace {
Json ArrayOf(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}
}  // namespace

Json ToJson(const DiscreteMeasure& a) { return {{"weights", ArrayOf(a.weights())}}; }
Json ToJson(const ScoreVector& f) { return {{"values", ArrayOf(f.values())}}; }

Json ToJson(const CostSpec& c) {
  Json rows = Json::array();
  const Matrix& m = c.base_matrix();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(ArrayOf(m.row(i).transpose()));
  return {{"matrix", rows}, {"epsilon", c.epsilon()}};
}

Json ToJson(const PotentialResult& r) {
  return {{"potential", ArrayOf(r.potential.values())},
          {"negentropy", r.negentropy},
          {"iterations", r.iterations},
          {"residual", r.residual}};
}

Json ToJson(const ConjugateSolution& s) {
  return {{"value", s.value},
          {"measure", ArrayOf(s.measure.weights())},
          {"iterations", s.iterations},
          {"gradient_norm", s.gradient_norm}};
}

std::string Dump(const Json& j) {
  // nlohmann prints the shortest representation that round-trips.
  return j.dump(2) + "\n";
}

}  // namespace geoloss::io
