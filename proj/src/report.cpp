#include "attrbias/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "attrbias/error.hpp"

namespace attrbias {

namespace fs = std::filesystem;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += csv_field(cells[i]);
  }
  return line + "\n";
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string slug(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

void flag_maxima(std::vector<TableCell*> group) {
  double best = -1.0;
  for (auto* c : group) {
    if (c->value) best = std::max(best, *c->value);
  }
  for (auto* c : group) c->flagged = c->value && *c->value == best;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_number(std::optional<double> value) {
  if (!value) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, *value);
  return std::string(buf, res.ptr);
}

std::string bias_report_csv(const BiasReport& report) {
  std::string out = join({"model_config", "dataset", "method", "axis", "class_slice", "seeds", "bias_cons",
                          "bias_agg", "bias_attr", "suff", "cmp"});
  for (const auto& r : report.rows) {
    out += join({r.model_config, r.dataset, std::string(to_string(r.method)), std::string(to_string(r.axis)),
                 r.class_slice, std::to_string(r.seeds_used), format_number(r.bias_cons),
                 format_number(r.bias_agg), format_number(r.bias_attr), format_number(r.suff),
                 format_number(r.cmp)});
  }
  return out;
}

std::string distributions_csv(const BiasReport& report) {
  std::string out = join({"model_config", "dataset", "method", "axis", "class_slice", "seed", "category",
                          "count", "prob"});
  for (const auto& d : report.distributions) {
    const auto seed = d.seed ? std::to_string(*d.seed) : std::string("aggregate");
    for (std::size_t i = 0; i < d.distribution.categories.size(); ++i) {
      out += join({d.model_config, d.dataset, std::string(to_string(d.method)), std::string(to_string(d.axis)),
                   d.class_slice, seed, d.distribution.categories[i], std::to_string(d.distribution.counts[i]),
                   format_number(d.distribution.probs[i])});
    }
  }
  return out;
}

std::string faithfulness_csv(const BiasReport& report) {
  std::string out = join({"model_config", "dataset", "method", "seed", "n", "suff", "cmp"});
  for (const auto& f : report.faithfulness) {
    out += join({f.model_config, f.dataset, std::string(to_string(f.result.method)),
                 std::to_string(f.result.seed), std::to_string(f.result.n), format_number(f.result.suff),
                 format_number(f.result.cmp)});
  }
  return out;
}

std::string training_csv(const BiasReport& report) {
  std::string out = join({"model_config", "dataset", "seed", "eval_split", "f1"});
  for (const auto& t : report.training) {
    out += join({t.model_config, t.dataset, std::to_string(t.seed), t.eval_split, format_number(t.f1)});
  }
  return out;
}

std::optional<BiasTable> make_table(const BiasReport& report, Axis axis) {
  BiasTable t;
  t.axis = axis;
  for (const auto& r : report.rows) {
    if (r.axis != axis || r.class_slice != "all") continue;
    const std::pair col{r.dataset, r.model_config};
    if (std::find(t.columns.begin(), t.columns.end(), col) == t.columns.end()) t.columns.push_back(col);
    if (std::find(t.methods.begin(), t.methods.end(), r.method) == t.methods.end()) t.methods.push_back(r.method);
  }
  if (t.columns.empty()) return std::nullopt;
  std::sort(t.methods.begin(), t.methods.end());
  const auto nc = t.columns.size(), nm = t.methods.size();
  t.agg.assign(nm, std::vector<TableCell>(nc));
  t.attr.assign(nm, std::vector<TableCell>(nc));
  t.agg_average.assign(nc, {});
  for (const auto& r : report.rows) {
    if (r.axis != axis || r.class_slice != "all") continue;
    const auto c = static_cast<std::size_t>(
        std::find(t.columns.begin(), t.columns.end(), std::pair{r.dataset, r.model_config}) - t.columns.begin());
    const auto m = static_cast<std::size_t>(std::find(t.methods.begin(), t.methods.end(), r.method) - t.methods.begin());
    t.agg[m][c].value = r.bias_agg;
    t.attr[m][c].value = r.bias_attr;
    if (r.bias_attr) t.has_attr = true;
  }
  for (std::size_t c = 0; c < nc; ++c) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t m = 0; m < nm; ++m) {
      if (t.agg[m][c].value) {
        sum += *t.agg[m][c].value;
        ++n;
      }
    }
    if (n) t.agg_average[c].value = sum / n;
  }

  // Bias-agg: within a dataset, flag the model config(s) with the highest value.
  std::set<std::string> datasets;
  for (const auto& col : t.columns) datasets.insert(col.first);
  for (const auto& ds : datasets) {
    for (std::size_t m = 0; m <= nm; ++m) {
      std::vector<TableCell*> group;
      for (std::size_t c = 0; c < nc; ++c) {
        if (t.columns[c].first == ds) group.push_back(m < nm ? &t.agg[m][c] : &t.agg_average[c]);
      }
      flag_maxima(group);
    }
  }
  if (t.has_attr) {
    for (std::size_t c = 0; c < nc; ++c) {
      std::vector<TableCell*> attr_col;
      double best_agg = -1.0;
      for (std::size_t m = 0; m < nm; ++m) {
        attr_col.push_back(&t.attr[m][c]);
        if (t.agg[m][c].value) best_agg = std::max(best_agg, *t.agg[m][c].value);
      }
      flag_maxima(attr_col);
      for (std::size_t m = 0; m < nm; ++m) {
        t.attr[m][c].agrees = t.attr[m][c].flagged && t.agg[m][c].value == best_agg;
      }
    }
  } else {
    t.attr.clear();
  }
  return t;
}

std::string table_csv(const BiasTable& t) {
  auto cell = [](const TableCell& c) {
    if (!c.value) return std::string();
    return fixed4(*c.value) + (c.flagged ? "+" : "") + (c.agrees ? "*" : "");
  };
  std::vector<std::string> header{"method"};
  for (const auto& [ds, cfg] : t.columns) header.push_back("bias_agg:" + ds + ":" + cfg);
  if (t.has_attr) {
    for (const auto& [ds, cfg] : t.columns) header.push_back("bias_attr:" + ds + ":" + cfg);
  }
  std::string out = join(header);
  for (std::size_t m = 0; m < t.methods.size(); ++m) {
    std::vector<std::string> row{std::string(to_string(t.methods[m]))};
    for (const auto& c : t.agg[m]) row.push_back(cell(c));
    if (t.has_attr) {
      for (const auto& c : t.attr[m]) row.push_back(cell(c));
    }
    out += join(row);
  }
  std::vector<std::string> avg{"avg"};
  for (const auto& c : t.agg_average) avg.push_back(cell(c));
  if (t.has_attr) avg.resize(avg.size() + t.columns.size());
  out += join(avg);
  return out;
}

std::string distribution_svg(const DistributionRow& row) {
  const auto& d = row.distribution;
  const std::size_t n = d.categories.size();
  const double bar = n > 60 ? 8.0 : 22.0;
  const double left = 50, top = 30, plot_h = 200, bottom = 90;
  const double width = left + bar * static_cast<double>(n) + 20, height = top + plot_h + bottom;
  const double chance = n ? 1.0 / static_cast<double>(n) : 0.0;
  double ymax = chance;
  for (double p : d.probs) ymax = std::max(ymax, p);
  ymax = std::max(ymax * 1.1, 1e-9);
  auto y = [&](double v) { return top + plot_h * (1.0 - v / ymax); };

  std::string s;
  auto num = [](double v) { return fixed4(v); };
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(left) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"12\">" +
       xml_escape(row.model_config + " / " + row.dataset + " / " + std::string(to_string(row.method)) + " / " +
                  std::string(to_string(row.axis)) + " / " + row.class_slice) +
       "</text>\n";
  s += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" +
       num(top + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(left) + "\" y1=\"" + num(top + plot_h) + "\" x2=\"" + num(width - 10) + "\" y2=\"" +
       num(top + plot_h) + "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = ymax * tick / 4.0;
    s += "<text x=\"" + num(left - 4) + "\" y=\"" + num(y(v) + 4) +
         "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"end\">" + fixed4(v).substr(0, 5) + "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double x = left + bar * static_cast<double>(i);
    s += "<rect x=\"" + num(x + 1) + "\" y=\"" + num(y(d.probs[i])) + "\" width=\"" + num(bar - 2) +
         "\" height=\"" + num(top + plot_h - y(d.probs[i])) + "\" fill=\"#4a72b0\"/>\n";
    const double lx = x + bar / 2, ly = top + plot_h + 8;
    s += "<text x=\"" + num(lx) + "\" y=\"" + num(ly) + "\" font-family=\"sans-serif\" font-size=\"8\" " +
         "text-anchor=\"end\" transform=\"rotate(-60 " + num(lx) + " " + num(ly) + ")\">" +
         xml_escape(d.categories[i]) + "</text>\n";
  }
  s += "<line x1=\"" + num(left) + "\" y1=\"" + num(y(chance)) + "\" x2=\"" + num(width - 10) + "\" y2=\"" +
       num(y(chance)) + "\" stroke=\"#c0392b\" stroke-dasharray=\"4 3\"/>\n";
  std::string note = "dashed line: uniform chance level 1/" + std::to_string(n);
  if (row.axis == Axis::kLexical) note += " (ignores unequal token base rates)";
  s += "<text x=\"" + num(left) + "\" y=\"" + num(height - 8) + "\" font-family=\"sans-serif\" font-size=\"9\">" +
       note + "</text>\n";
  s += "</svg>\n";
  return s;
}

void write_report(const BiasReport& report, const std::string& dir) {
  const fs::path root(dir);
  write_file(root / "bias_report.csv", bias_report_csv(report));
  write_file(root / "distributions.csv", distributions_csv(report));
  write_file(root / "faithfulness.csv", faithfulness_csv(report));
  write_file(root / "training.csv", training_csv(report));
  for (Axis a : {Axis::kTokenPosition, Axis::kLexical, Axis::kSentencePosition}) {
    if (auto t = make_table(report, a)) {
      write_file(root / ("table_" + std::string(to_string(a)) + ".csv"), table_csv(*t));
    }
  }
  for (const auto& d : report.distributions) {
    if (d.seed) continue;
    const auto name = slug(d.model_config) + "__" + slug(d.dataset) + "__" + std::string(to_string(d.method)) + "__" +
                      std::string(to_string(d.axis)) + "__" + d.class_slice + ".svg";
    write_file(root / "figures" / name, distribution_svg(d));
  }
}

}  // namespace attrbias
