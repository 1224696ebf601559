#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "eam/data.hpp"

namespace eam {

struct CsvSchema {
  std::string subject = "subject", rt = "rt", response = "response";
  int response_base = 0;  // subtracted from the response column (1 for 1-based codes)
  std::vector<std::string> attributes;
  // Optional string levels per attribute; values are stored as the level index.
  std::map<std::string, std::vector<std::string>> levels;
  std::vector<std::string> covariates;
  std::vector<std::string> subject_level;  // covariates that must be constant within a subject
  bool zscore = false;
};

struct IngestReport {
  std::size_t rows = 0;
  std::vector<std::string> notes;
};

// Trials grouped by subject in order of first appearance. Throws ConfigError with the 1-based
// data row (header excluded) on missing columns, unparsable cells, RT <= 0, negative responses,
// unknown levels or subject-level covariates that vary.
Dataset read_csv(std::istream& in, const CsvSchema& schema, IngestReport* report = nullptr);
Dataset read_csv_file(const std::string& path, const CsvSchema& schema, IngestReport* report = nullptr);

// Columns subject, rt, response (with the schema's base), attributes and covariates.
void write_csv(std::ostream& out, const Dataset& data, const CsvSchema& schema = {});
void write_csv_file(const std::string& path, const Dataset& data, const CsvSchema& schema = {});

// Column-wise z-scores over all trials; constant columns are centred only.
void zscore_covariates(Dataset& data);

// Per-subject identical covariate rows for the named columns, else ConfigError.
void check_subject_level(const Dataset& data, const std::vector<std::string>& names);

// Numeric table with a header row, used for chains, draws and summaries.
struct Table {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;

  int column(const std::string& name) const;  // -1 when absent
};
void write_table(const std::string& path, const Table& table);
Table read_table(const std::string& path);

}  // namespace eam
