#include "eam/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "eam/common.hpp"

namespace eam {

namespace {

// RFC 4180 style: commas, optional double quotes with "" escapes.
std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

std::string row_error(std::size_t row, const std::string& what) {
  return "data row " + std::to_string(row) + ": " + what;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError(row_error(row, "cannot parse '" + cell + "' in column '" + column + "'"));
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, end};
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvSchema& schema, IngestReport* report) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("data: empty file, a header row is required");
  const auto header = split_row(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("data: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_subject = column(schema.subject), c_rt = column(schema.rt), c_resp = column(schema.response);
  std::vector<std::size_t> c_attr, c_cov;
  for (const auto& a : schema.attributes) c_attr.push_back(column(a));
  for (const auto& c : schema.covariates) c_cov.push_back(column(c));

  Dataset data;
  data.attribute_names = schema.attributes;
  data.covariate_names = schema.covariates;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto cells = split_row(line);
    if (cells.size() != header.size())
      throw ConfigError(row_error(row, "expected " + std::to_string(header.size()) + " cells, found " +
                                           std::to_string(cells.size())));
    Trial t;
    t.rt = parse_number(cells[c_rt], row, schema.rt);
    if (!(t.rt > 0.0)) throw ConfigError(row_error(row, "response time must be positive"));
    const double r = parse_number(cells[c_resp], row, schema.response) - schema.response_base;
    if (r < 0.0 || r != std::floor(r))
      throw ConfigError(row_error(row, "response must be an integer code >= " + std::to_string(schema.response_base)));
    t.response = static_cast<int>(r);
    for (std::size_t k = 0; k < c_attr.size(); ++k) {
      const auto& name = schema.attributes[k];
      const std::string& cell = cells[c_attr[k]];
      if (const auto lv = schema.levels.find(name); lv != schema.levels.end()) {
        const auto it = std::find(lv->second.begin(), lv->second.end(), cell);
        if (it == lv->second.end())
          throw ConfigError(row_error(row, "unknown level '" + cell + "' of '" + name + "'"));
        t.attributes.push_back(static_cast<double>(it - lv->second.begin()));
      } else {
        t.attributes.push_back(parse_number(cell, row, name));
      }
    }
    t.covariates.resize(static_cast<Eigen::Index>(c_cov.size()));
    for (std::size_t k = 0; k < c_cov.size(); ++k)
      t.covariates[static_cast<Eigen::Index>(k)] = parse_number(cells[c_cov[k]], row, schema.covariates[k]);

    const std::string& id = cells[c_subject];
    if (id.empty()) throw ConfigError(row_error(row, "empty subject identifier"));
    auto [it, fresh] = index.emplace(id, data.subjects.size());
    if (fresh) data.subjects.push_back(Subject{id, {}});
    data.subjects[it->second].trials.push_back(std::move(t));
  }
  if (data.subjects.empty()) throw ConfigError("data: no trials");
  check_subject_level(data, schema.subject_level);
  if (schema.zscore) zscore_covariates(data);
  if (report) {
    report->rows = row;
    report->notes.push_back(std::to_string(data.subjects.size()) + " subjects, " + std::to_string(row) + " trials");
    for (const auto& s : data.subjects) {
      std::ostringstream os;
      os << "subject " << s.id << ": " << s.trials.size() << " trials, min RT " << s.min_rt();
      report->notes.push_back(os.str());
    }
  }
  return data;
}

Dataset read_csv_file(const std::string& path, const CsvSchema& schema, IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw ConfigError("data: cannot open '" + path + "'");
  return read_csv(in, schema, report);
}

void write_csv(std::ostream& out, const Dataset& data, const CsvSchema& schema) {
  out << quote(schema.subject) << ',' << quote(schema.rt) << ',' << quote(schema.response);
  for (const auto& a : data.attribute_names) out << ',' << quote(a);
  for (const auto& c : data.covariate_names) out << ',' << quote(c);
  out << '\n';
  for (const auto& s : data.subjects) {
    for (const auto& t : s.trials) {
      out << quote(s.id) << ',' << num(t.rt) << ',' << t.response + schema.response_base;
      for (std::size_t k = 0; k < t.attributes.size(); ++k) {
        const auto lv = schema.levels.find(data.attribute_names[k]);
        if (lv != schema.levels.end())
          out << ',' << quote(lv->second.at(static_cast<std::size_t>(t.attributes[k])));
        else
          out << ',' << num(t.attributes[k]);
      }
      for (Eigen::Index k = 0; k < t.covariates.size(); ++k) out << ',' << num(t.covariates[k]);
      out << '\n';
    }
  }
}

void write_csv_file(const std::string& path, const Dataset& data, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_csv(out, data, schema);
}

void zscore_covariates(Dataset& data) {
  const int d = data.covariate_dim();
  if (d == 0) return;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
  const double n = static_cast<double>(data.trial_count());
  for (const auto& s : data.subjects)
    for (const auto& t : s.trials) sum += t.covariates;
  const Eigen::VectorXd mean = sum / n;
  for (const auto& s : data.subjects)
    for (const auto& t : s.trials) sq += (t.covariates - mean).cwiseAbs2();
  Eigen::VectorXd sd = (sq / std::max(1.0, n - 1)).cwiseSqrt();
  for (int k = 0; k < d; ++k)
    if (!(sd[k] > 0.0)) sd[k] = 1.0;
  for (auto& s : data.subjects)
    for (auto& t : s.trials) t.covariates = (t.covariates - mean).cwiseQuotient(sd);
}

void check_subject_level(const Dataset& data, const std::vector<std::string>& names) {
  for (const auto& name : names) {
    const auto it = std::find(data.covariate_names.begin(), data.covariate_names.end(), name);
    if (it == data.covariate_names.end())
      throw ConfigError("data: subject-level covariate '" + name + "' is not a declared covariate");
    const auto k = static_cast<Eigen::Index>(it - data.covariate_names.begin());
    for (const auto& s : data.subjects)
      for (const auto& t : s.trials)
        if (t.covariates[k] != s.trials.front().covariates[k])
          throw ConfigError("data: covariate '" + name + "' varies within subject '" + s.id +
                            "' but is declared subject-level");
  }
}

int Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

void write_table(const std::string& path, const Table& table) {
  if (static_cast<Eigen::Index>(table.columns.size()) != table.values.cols())
    throw ConfigError("table '" + path + "': header and values differ in width");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  for (std::size_t k = 0; k < table.columns.size(); ++k) out << (k ? "," : "") << quote(table.columns[k]);
  out << '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index k = 0; k < table.values.cols(); ++k) out << (k ? "," : "") << num(table.values(r, k));
    out << '\n';
  }
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  Table t;
  if (!std::getline(in, line)) throw ConfigError("table '" + path + "' is empty");
  t.columns = split_row(line);
  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto cells = split_row(line);
    if (cells.size() != t.columns.size())
      throw ConfigError("table '" + path + "' " + row_error(row, "wrong number of cells"));
    std::vector<double> v;
    for (std::size_t k = 0; k < cells.size(); ++k) v.push_back(parse_number(cells[k], row, t.columns[k]));
    rows.push_back(std::move(v));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < rows[r].size(); ++k)
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
  return t;
}

}  // namespace eam
