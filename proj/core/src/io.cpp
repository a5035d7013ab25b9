#include "fpr/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fpr/errors.hpp"

namespace fpr {

namespace {

using nlohmann::json;

json parse(const std::string& text, const char* what) {
  json parsed = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    throw InvalidInputError(std::string("malformed JSON in ") + what);
  }
  return parsed;
}

Matrix matrix_from_json(const json& value, const char* what) {
  if (!value.is_array() || value.empty()) {
    throw InvalidInputError(std::string(what) + ": expected a non-empty array of rows");
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(value.size());
  for (const auto& row : value) {
    if (!row.is_array()) throw InvalidInputError(std::string(what) + ": row is not an array");
    rows.push_back(row.get<std::vector<double>>());
  }
  const std::size_t cols = rows.front().size();
  for (const auto& row : rows) {
    if (row.size() != cols) throw InvalidInputError(std::string(what) + ": ragged rows");
  }
  return Matrix::from_rows(rows);
}

json matrix_to_json(const Matrix& matrix) {
  json rows = json::array();
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < matrix.cols(); ++j) row.push_back(matrix(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string market_to_json(const MarketInstance& market) {
  json root;
  root["n"] = market.n;
  root["m"] = market.m;
  root["budgets"] = market.budgets;
  root["valuations"] = matrix_to_json(market.valuations);
  return root.dump(2) + "\n";
}

MarketInstance market_from_json(const std::string& text) {
  const json root = parse(text, "market file");
  MarketInstance market;
  try {
    market.n = root.at("n").get<std::size_t>();
    market.m = root.at("m").get<std::size_t>();
    market.budgets = root.at("budgets").get<std::vector<double>>();
    market.valuations = matrix_from_json(root.at("valuations"), "market valuations");
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("market file: ") + e.what());
  }
  if (market.budgets.size() != market.n || market.valuations.rows() != market.n ||
      market.valuations.cols() != market.m) {
    throw InvalidInputError("market file: declared dimensions do not match the arrays");
  }
  return market;
}

std::string bids_to_json(const BidProfile& b) {
  json root;
  root["bids"] = matrix_to_json(b.bids);
  return root.dump(2) + "\n";
}

BidProfile bids_from_json(const std::string& text) {
  const json root = parse(text, "bids file");
  // Accept both {"bids": [[...]]} and a bare matrix.
  const json& value = root.is_object() ? root.at("bids") : root;
  return BidProfile{matrix_from_json(value, "bids")};
}

std::string schedule_to_json(const ActivationSchedule& s) {
  json steps = json::array();
  for (const auto& subset : s.steps) steps.push_back(subset);
  if (s.liveness_T) {
    json root;
    root["T"] = *s.liveness_T;
    root["steps"] = std::move(steps);
    return root.dump() + "\n";
  }
  return steps.dump() + "\n";
}

ActivationSchedule schedule_from_json(const std::string& text) {
  const json root = parse(text, "schedule file");
  ActivationSchedule s;
  const json* steps = nullptr;
  if (root.is_array()) {
    steps = &root;
  } else if (root.is_object()) {
    if (root.contains("T")) s.liveness_T = root.at("T").get<std::size_t>();
    if (!root.contains("steps")) {
      throw InvalidInputError("schedule file: object form requires a \"steps\" array");
    }
    steps = &root.at("steps");
  } else {
    throw InvalidInputError("schedule file: expected an array or an object");
  }
  if (!steps->is_array()) throw InvalidInputError("schedule file: steps must be an array");
  std::size_t max_index = 0;
  bool any = false;
  for (const auto& subset : *steps) {
    if (!subset.is_array()) {
      throw InvalidInputError("schedule file: each step must be an array of buyer indices");
    }
    std::vector<std::size_t> ids = subset.get<std::vector<std::size_t>>();
    for (const std::size_t i : ids) {
      max_index = std::max(max_index, i);
      any = true;
    }
    s.steps.push_back(std::move(ids));
  }
  s.n_buyers = any ? max_index + 1 : 0;
  return s;
}

std::string certificate_to_json(const EquilibriumCertificate& cert) {
  json root;
  root["prices"] = cert.prices.prices;
  root["utilities"] = cert.utilities;
  root["residuals"] = {{"clearing", cert.residuals.clearing},
                       {"budget", cert.residuals.budget},
                       {"optimality", cert.residuals.optimality}};
  root["acyclic"] = cert.acyclic;
  root["generic_verdict"] = to_string(cert.genericity.verdict);
  root["methods_agree"] = cert.methods_agree;
  root["accepted"] = cert.accepted;
  root["tolerance"] = cert.tolerance;
  root["bids"] = matrix_to_json(cert.bids.bids);
  return root.dump(2) + "\n";
}

EquilibriumCertificate certificate_from_json(const std::string& text) {
  const json root = parse(text, "certificate file");
  EquilibriumCertificate cert;
  try {
    cert.prices.prices = root.at("prices").get<std::vector<double>>();
    cert.utilities = root.at("utilities").get<std::vector<double>>();
    const json& residuals = root.at("residuals");
    cert.residuals.clearing = residuals.at("clearing").get<double>();
    cert.residuals.budget = residuals.at("budget").get<double>();
    cert.residuals.optimality = residuals.at("optimality").get<double>();
    cert.acyclic = root.at("acyclic").get<bool>();
    cert.genericity.verdict =
        genericity_verdict_from_string(root.at("generic_verdict").get<std::string>());
    cert.methods_agree = root.at("methods_agree").get<bool>();
    cert.accepted = root.value("accepted", false);
    cert.tolerance = root.value("tolerance", 1e-6);
    cert.bids.bids = matrix_from_json(root.at("bids"), "certificate bids");
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("certificate file: ") + e.what());
  }
  return cert;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          std::size_t m) {
  std::string out = "t,potential,nsw,distance";
  for (std::size_t j = 0; j < m; ++j) out += ",price_" + std::to_string(j);
  out += "\n";
  for (const TrajectoryPoint& point : trajectory.points) {
    out += std::to_string(point.t);
    out += ',';
    out += format_real(point.potential);
    out += ',';
    out += format_real(point.nsw);
    out += ',';
    out += format_real(point.distance);
    for (std::size_t j = 0; j < m; ++j) {
      out += ',';
      out += format_real(point.prices.at(j));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  CsvTable table;
  std::istringstream lines(text);
  std::string line;
  bool first = true;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    if (first) {
      while (std::getline(cells, cell, ',')) table.header.push_back(cell);
      first = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw InvalidInputError("csv: non-numeric cell '" + cell + "' in " + path.string());
      }
      row.push_back(value);
    }
    if (row.size() != table.header.size()) {
      throw InvalidInputError("csv: row width differs from header in " + path.string());
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw InvalidInputError("csv: empty file " + path.string());
  return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c > 0) out += ',';
    out += table.header[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += ',';
      out += format_real(row[c]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

std::string format_real(double x) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", x);
  return buffer;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInputError("cannot write file: " + path.string());
  out << text;
  if (!out) throw InvalidInputError("write failed: " + path.string());
}

const char* to_string(GenericityVerdict v) {
  switch (v) {
    case GenericityVerdict::generic:
      return "generic";
    case GenericityVerdict::non_generic:
      return "non-generic";
    case GenericityVerdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

GenericityVerdict genericity_verdict_from_string(const std::string& s) {
  if (s == "generic") return GenericityVerdict::generic;
  if (s == "non-generic") return GenericityVerdict::non_generic;
  if (s == "inconclusive") return GenericityVerdict::inconclusive;
  throw InvalidInputError("unknown genericity verdict: " + s);
}

void write_market(const std::filesystem::path& path, const MarketInstance& market) {
  write_text_file(path, market_to_json(market));
}

MarketInstance read_market(const std::filesystem::path& path) {
  return market_from_json(read_text_file(path));
}

void write_bids(const std::filesystem::path& path, const BidProfile& b) {
  write_text_file(path, bids_to_json(b));
}

BidProfile read_bids(const std::filesystem::path& path) {
  return bids_from_json(read_text_file(path));
}

void write_schedule(const std::filesystem::path& path, const ActivationSchedule& s) {
  write_text_file(path, schedule_to_json(s));
}

ActivationSchedule read_schedule(const std::filesystem::path& path) {
  return schedule_from_json(read_text_file(path));
}

void write_certificate(const std::filesystem::path& path, const EquilibriumCertificate& cert) {
  write_text_file(path, certificate_to_json(cert));
}

EquilibriumCertificate read_certificate(const std::filesystem::path& path) {
  return certificate_from_json(read_text_file(path));
}

}  // namespace fpr
