#include "egopack/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace egopack {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kW = 640;
constexpr int kH = 420;
constexpr int kMargin = 60;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

void svg_open(std::ofstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">"
        << title << "</text>\n";
}

}  // namespace

void svg_line_chart(const fs::path& path, const std::string& title, const std::vector<double>& xs,
                    const std::vector<double>& ys, const std::string& x_label,
                    const std::string& y_label) {
    if (xs.empty() || xs.size() != ys.size()) throw ShapeError("svg_line_chart: bad series");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write figure: " + path.string());
    svg_open(out, title);
    const double xmin = *std::min_element(xs.begin(), xs.end());
    const double xmax = *std::max_element(xs.begin(), xs.end());
    double ymin = *std::min_element(ys.begin(), ys.end());
    double ymax = *std::max_element(ys.begin(), ys.end());
    if (ymax == ymin) {
        ymax += 1.0;
        ymin -= 1.0;
    }
    auto px = [&](double x) {
        return xmax == xmin ? kW / 2.0
                            : kMargin + (x - xmin) / (xmax - xmin) * (kW - 2 * kMargin);
    };
    auto py = [&](double y) { return kH - kMargin - (y - ymin) / (ymax - ymin) * (kH - 2 * kMargin); };

    out << "<polyline fill=\"none\" stroke=\"#1565c0\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < xs.size(); ++i) out << px(xs[i]) << "," << py(ys[i]) << " ";
    out << "\"/>\n";
    for (size_t i = 0; i < xs.size(); ++i) {
        out << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i])
            << "\" r=\"3\" fill=\"#1565c0\"/>\n";
        out << "<text x=\"" << px(xs[i]) << "\" y=\"" << kH - kMargin + 18
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(xs[i])
            << "</text>\n";
    }
    out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << kH / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 16 "
        << kH / 2 << ")\">" << y_label << "</text>\n";
    out << "<text x=\"" << kMargin - 6 << "\" y=\"" << py(ymin)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(ymin)
        << "</text>\n";
    out << "<text x=\"" << kMargin - 6 << "\" y=\"" << py(ymax)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(ymax)
        << "</text>\n";
    out << "</svg>\n";
}

void svg_bar_chart(const fs::path& path, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<double>& values) {
    if (labels.size() != values.size() || labels.empty())
        throw ShapeError("svg_bar_chart: bad series");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write figure: " + path.string());
    svg_open(out, title);
    const double vmax = std::max(1e-12, *std::max_element(values.begin(), values.end()));
    const double band = static_cast<double>(kW - 2 * kMargin) / labels.size();
    for (size_t i = 0; i < labels.size(); ++i) {
        const double h = values[i] / vmax * (kH - 2 * kMargin);
        const double x = kMargin + band * i + band * 0.1;
        const double y = kH - kMargin - h;
        out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << band * 0.8 << "\" height=\""
            << h << "\" fill=\"#2e7d32\"/>\n";
        out << "<text x=\"" << x + band * 0.4 << "\" y=\"" << kH - kMargin + 14
            << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">" << labels[i]
            << "</text>\n";
    }
    out << "</svg>\n";
}

void svg_heatmap(const fs::path& path, const std::string& title,
                 const std::vector<std::string>& row_names,
                 const std::vector<std::string>& col_names,
                 const std::vector<std::vector<double>>& values) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write figure: " + path.string());
    svg_open(out, title);
    const size_t rows = values.size();
    const size_t cols = rows == 0 ? 0 : values[0].size();
    if (rows == 0 || cols == 0 || row_names.size() != rows || col_names.size() != cols)
        throw ShapeError("svg_heatmap: bad matrix");
    double vmax = 1e-12;
    for (const auto& r : values)
        for (double v : r) vmax = std::max(vmax, v);
    const double cw = static_cast<double>(kW - 2 * kMargin) / cols;
    const double ch = static_cast<double>(kH - 2 * kMargin) / rows;
    for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < cols; ++c) {
            const int shade = 255 - static_cast<int>(std::lround(values[r][c] / vmax * 200.0));
            out << "<rect x=\"" << kMargin + cw * c << "\" y=\"" << kMargin + ch * r << "\" width=\""
                << cw << "\" height=\"" << ch << "\" fill=\"rgb(" << shade << "," << shade
                << ",255)\" stroke=\"#ccc\"/>\n";
        }
        out << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + ch * r + ch / 2
            << "\" text-anchor=\"end\" font-size=\"9\" font-family=\"sans-serif\">" << row_names[r]
            << "</text>\n";
    }
    for (size_t c = 0; c < cols; ++c)
        out << "<text x=\"" << kMargin + cw * c + cw / 2 << "\" y=\"" << kMargin - 6
            << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">" << col_names[c]
            << "</text>\n";
    out << "</svg>\n";
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write csv: " + path.string());
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

void write_prediction_log(const fs::path& run_dir, const std::string& task,
                          const EvalOutput& eval) {
    fs::create_directories(run_dir);
    {
        std::ofstream out(run_dir / "predictions.jsonl");
        for (const auto& r : eval.records) {
            json j;
            j["task"] = task;
            if (!r.gt_verb.empty()) {
                j["gt_verb"] = r.gt_verb;
                j["gt_noun"] = r.gt_noun;
                j["pred_verb"] = r.pred_verb;
                j["pred_noun"] = r.pred_noun;
            }
            if (r.gt_label >= 0) {
                j["gt_label"] = r.gt_label;
                j["pred_label"] = r.pred_label;
            }
            if (r.loc_err >= 0.0 && r.gt_time > 0.0) {
                j["gt_time"] = r.gt_time;
                j["pred_time"] = r.pred_time;
                j["loc_err"] = r.loc_err;
            }
            if (!r.contributor_pred.empty()) j["contributors"] = r.contributor_pred;
            out << j.dump() << "\n";
        }
    }
    if (!eval.neighbors.entries.empty()) {
        std::ofstream out(run_dir / "neighbors.jsonl");
        for (const auto& e : eval.neighbors.entries) {
            json j{{"task", e.task}, {"layer", e.layer}, {"rows", e.rows}};
            out << j.dump() << "\n";
        }
    }
    {
        json j;
        j["task"] = task;
        for (const auto& [k, v] : eval.metrics) j["metrics"][k] = v;
        std::ofstream out(run_dir / "eval.json");
        out << j.dump(2) << "\n";
    }
}

namespace {

struct RunData {
    fs::path dir;
    std::string task;
    json manifest;
    json eval;
    std::vector<json> predictions;
    std::vector<json> neighbors;
};

RunData load_run(const fs::path& dir) {
    RunData run;
    run.dir = dir;
    {
        std::ifstream in(dir / "run.json");
        if (in) run.manifest = json::parse(in, nullptr, false);
    }
    {
        std::ifstream in(dir / "eval.json");
        if (!in) throw IoError("run has no eval.json: " + dir.string());
        run.eval = json::parse(in, nullptr, false);
        if (run.eval.is_discarded()) throw IoError("corrupt eval.json in " + dir.string());
        run.task = run.eval.at("task").get<std::string>();
    }
    {
        std::ifstream in(dir / "predictions.jsonl");
        std::string line;
        while (in && std::getline(in, line)) {
            if (line.empty()) continue;
            run.predictions.push_back(json::parse(line));
        }
    }
    {
        std::ifstream in(dir / "neighbors.jsonl");
        std::string line;
        while (in && std::getline(in, line)) {
            if (line.empty()) continue;
            run.neighbors.push_back(json::parse(line));
        }
    }
    return run;
}

}  // namespace

void build_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
    fs::create_directories(out_dir / "figures");
    json metrics;

    auto unique_name = [&](const std::string& base, const std::string& run_name,
                           const std::string& ext) {
        fs::path p = out_dir / (base + ext);
        if (!fs::exists(p)) return base;
        return base + "_" + run_name;
    };

    for (const auto& dir : run_dirs) {
        const RunData run = load_run(dir);
        const std::string run_name = dir.filename().string();
        metrics[run_name] = run.eval;

        // Confusion matrices for classification streams.
        auto emit_confusion = [&](const std::string& what, const std::vector<int>& preds,
                                  const std::vector<int>& labels) {
            if (preds.empty()) return;
            const ConfusionMatrix cm = confusion_matrix(preds, labels, 20);
            std::vector<std::string> header{"gt\\pred"};
            std::vector<std::string> names;
            for (int cls : cm.class_ids) names.push_back(std::to_string(cls));
            names.push_back("rest");
            for (const auto& n : names) header.push_back(n);
            std::vector<std::vector<std::string>> rows;
            std::vector<std::vector<double>> dense;
            for (size_t r = 0; r < cm.counts.size(); ++r) {
                std::vector<std::string> row{names[r]};
                std::vector<double> drow;
                for (long v : cm.counts[r]) {
                    row.push_back(std::to_string(v));
                    drow.push_back(static_cast<double>(v));
                }
                rows.push_back(std::move(row));
                dense.push_back(std::move(drow));
            }
            const std::string base = unique_name("confusion_" + run.task +
                                                     (what.empty() ? "" : "_" + what),
                                                 run_name, ".csv");
            write_csv(out_dir / (base + ".csv"), header, rows);
            svg_heatmap(out_dir / "figures" / (base + ".svg"),
                        "confusion " + run.task + " " + what + " (" + run_name + ")", names, names,
                        dense);
        };

        std::vector<int> pv, gv, pn, gn, pl, gl;
        for (const auto& p : run.predictions) {
            if (p.contains("pred_verb")) {
                for (int v : p["pred_verb"]) pv.push_back(v);
                for (int v : p["gt_verb"]) gv.push_back(v);
                for (int v : p["pred_noun"]) pn.push_back(v);
                for (int v : p["gt_noun"]) gn.push_back(v);
            }
            if (p.contains("pred_label")) {
                pl.push_back(p["pred_label"].get<int>());
                gl.push_back(p["gt_label"].get<int>());
            }
        }
        emit_confusion("verb", pv, gv);
        emit_confusion("noun", pn, gn);
        emit_confusion("", pl, gl);

        // Agreement between contributor streams (novel runs only).
        std::map<std::string, std::vector<int>> streams;
        for (const auto& p : run.predictions) {
            if (!p.contains("contributors")) continue;
            for (const auto& [name, preds] : p["contributors"].items())
                streams[name].push_back(preds[0].get<int>());
        }
        if (!streams.empty()) {
            std::vector<std::string> names;
            const auto m = agreement_matrix(streams, names);
            std::vector<std::string> header{"task"};
            for (const auto& n : names) header.push_back(n);
            std::vector<std::vector<std::string>> rows;
            std::vector<std::vector<double>> dense;
            for (size_t r = 0; r < names.size(); ++r) {
                std::vector<std::string> row{names[r]};
                for (double v : m[r]) row.push_back(fmt(v));
                rows.push_back(std::move(row));
                dense.push_back(m[r]);
            }
            const std::string base = unique_name("agreement", run_name, ".csv");
            write_csv(out_dir / (base + ".csv"), header, rows);
            svg_heatmap(out_dir / "figures" / (base + ".svg"), "agreement (" + run_name + ")",
                        names, names, dense);
        }

        // Closest-prototype histogram grouped by verb of the selected row.
        if (!run.neighbors.empty() && run.manifest.contains("bank_keys")) {
            std::map<std::string, std::map<int, long>> counts;
            const auto& bank_keys = run.manifest["bank_keys"];
            for (const auto& e : run.neighbors) {
                const std::string task = e.at("task").get<std::string>();
                if (!bank_keys.contains(task)) continue;
                for (int row : e.at("rows")) {
                    const int verb = bank_keys[task][static_cast<size_t>(row)][0].get<int>();
                    counts[task][verb] += 1;
                }
            }
            for (const auto& [task, byverb] : counts) {
                std::vector<std::string> labels;
                std::vector<double> values;
                std::vector<std::vector<std::string>> rows;
                for (const auto& [verb, count] : byverb) {
                    labels.push_back("v" + std::to_string(verb));
                    values.push_back(static_cast<double>(count));
                    rows.push_back({std::to_string(verb), std::to_string(count)});
                }
                write_csv(out_dir / ("prototype_matches_" + run_name + "_" + task + ".csv"),
                          {"verb", "count"}, rows);
                svg_bar_chart(out_dir / "figures" /
                                  ("prototype_matches_" + run_name + "_" + task + ".svg"),
                              "closest " + task + " prototypes (" + run_name + ")", labels, values);
            }
        }
    }

    std::ofstream out(out_dir / "metrics.json");
    if (!out) throw IoError("cannot write metrics.json under " + out_dir.string());
    out << metrics.dump(2) << "\n";
}

}  // namespace egopack
