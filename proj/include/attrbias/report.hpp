#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attrbias/runner.hpp"

namespace attrbias {

// Shortest decimal that round-trips; empty for an absent value.
std::string format_number(std::optional<double> value);

std::string bias_report_csv(const BiasReport& report);
std::string distributions_csv(const BiasReport& report);
std::string faithfulness_csv(const BiasReport& report);
std::string training_csv(const BiasReport& report);

struct TableCell {
  std::optional<double> value;
  bool flagged = false;  // maximum of its comparison group, ties included
  bool agrees = false;   // Bias-attr: column maximum that is also the Bias-agg column maximum
};

// One axis of the report in the layout of the paper's comparison table:
// rows are methods plus an average row, columns are (dataset, model config).
// Bias-agg is flagged per row within a dataset, Bias-attr per column.
struct BiasTable {
  Axis axis = Axis::kTokenPosition;
  std::vector<std::pair<std::string, std::string>> columns;  // (dataset, model config)
  std::vector<Method> methods;
  std::vector<std::vector<TableCell>> agg;  // [method][column]
  std::vector<TableCell> agg_average;       // [column]
  bool has_attr = false;
  std::vector<std::vector<TableCell>> attr;  // [method][column]
};

// Uses the "all" class slice. Returns nullopt when the axis has no rows.
std::optional<BiasTable> make_table(const BiasReport& report, Axis axis);
// Values to four decimals; "+" marks a flagged cell, "*" an agreeing one.
std::string table_csv(const BiasTable& table);

// Bar chart of a distribution with a dashed line at the uniform level.
std::string distribution_svg(const DistributionRow& row);

// bias_report.csv, distributions.csv, faithfulness.csv, training.csv,
// table_<axis>.csv and figures/*.svg for the seed aggregates.
void write_report(const BiasReport& report, const std::string& dir);

}  // namespace attrbias
