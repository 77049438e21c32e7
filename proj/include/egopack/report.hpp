#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "egopack/metrics.hpp"
#include "egopack/training.hpp"
#include "json.hpp"

namespace egopack {

// Minimal static SVG charts; the report directory carries CSV tables next to
// every figure.
void svg_line_chart(const std::filesystem::path& path, const std::string& title,
                    const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::string& x_label, const std::string& y_label);
void svg_bar_chart(const std::filesystem::path& path, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<double>& values);
void svg_heatmap(const std::filesystem::path& path, const std::string& title,
                 const std::vector<std::string>& row_names,
                 const std::vector<std::string>& col_names,
                 const std::vector<std::vector<double>>& values);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Serializes one evaluation into predictions.jsonl / neighbors.jsonl under
// the run directory, so `report` can rebuild every figure offline.
void write_prediction_log(const std::filesystem::path& run_dir, const std::string& task,
                          const EvalOutput& eval);

// Builds the report directory (metrics.json, confusion_<task>.csv,
// agreement.csv, figures/*.svg) from one or more run directories.
void build_report(const std::vector<std::filesystem::path>& run_dirs,
                  const std::filesystem::path& out_dir);

}  // namespace egopack
