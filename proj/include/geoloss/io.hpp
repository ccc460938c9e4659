#pragma once

// Text serialization. CSV: one value per row for measures and scores (a single
// comma-separated row is accepted too), d rows of d values for a cost.
// JSON: {"weights": [...]}, {"values": [...]}, {"matrix": [[...]], "epsilon": e}.
// Floats are written with 17 significant digits.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "geoloss/gsoftmax.hpp"
#include "geoloss/measures.hpp"
#include "geoloss/sinkhorn.hpp"

namespace geoloss::io {

using Json = nlohmann::json;

// Numeric CSV table. Blank lines are skipped. Throws ParseError with 1-based
// row (physical line) and column of the first bad cell.
struct CsvTable {
  std::vector<std::vector<double>> rows;
  std::vector<int> line_numbers;  // physical line of each row
};
CsvTable ParseCsv(std::istream& in);
CsvTable ParseCsv(const std::string& text);

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);
bool HasJsonExtension(const std::string& path);

// Parsers dispatch on content: text starting with '{' is JSON, else CSV.
Vector ParseVector(const std::string& text, const char* json_key);
DiscreteMeasure ParseMeasure(const std::string& text);
ScoreVector ParseScores(const std::string& text);
// A JSON epsilon overrides `epsilon`.
CostSpec ParseCost(const std::string& text, double epsilon = 1.0);

DiscreteMeasure LoadMeasure(const std::string& path);
ScoreVector LoadScores(const std::string& path);
CostSpec LoadCost(const std::string& path, double epsilon = 1.0);

std::string FormatDouble(double v);
std::string VectorToCsv(const Vector& v);
std::string MatrixToCsv(const Matrix& m);

Json ToJson(const DiscreteMeasure& a);
Json ToJson(const ScoreVector& f);
Json ToJson(const CostSpec& c);
Json ToJson(const PotentialResult& r);
Json ToJson(const ConjugateSolution& s);

// 17 significant digits, 2-space indent.
std::string Dump(const Json& j);

}  // namespace geoloss::io
