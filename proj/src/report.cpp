#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "btlab/experiments.hpp"

namespace btlab {

namespace fs = std::filesystem;

namespace {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_x = false;
  /// Categorical x axis: point i sits at x = i and is labelled tick_labels[i].
  std::vector<std::string> tick_labels;
};

std::string num(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string render_svg(const Chart& chart) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  auto tx = [&](double x) { return chart.log_x ? std::log10(x) : x; };
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (chart.log_x && !(s.x[i] > 0))) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(chart.title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";

  // y ticks
  for (int i = 0; i <= 4; ++i) {
    const double v = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
      << num(v, 3) << "</text>\n";
  }
  // x ticks: categorical labels, decades on a log axis, or five even ticks
  auto xtick = [&](double x, const std::string& label) {
    o << "<line x1=\"" << px(x) << "\" y1=\"" << H - B << "\" x2=\"" << px(x) << "\" y2=\""
      << H - B + 4 << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
      << escape(label) << "</text>\n";
  };
  if (!chart.tick_labels.empty()) {
    for (std::size_t i = 0; i < chart.tick_labels.size(); ++i)
      xtick(static_cast<double>(i), chart.tick_labels[i]);
  } else if (chart.log_x) {
    for (int e = static_cast<int>(std::floor(x0)); e <= static_cast<int>(std::ceil(x1)); ++e) {
      if (e >= x0 - 1e-9 && e <= x1 + 1e-9) xtick(std::pow(10.0, e), "1e" + std::to_string(e));
    }
  } else {
    for (int i = 0; i <= 4; ++i) {
      const double v = x0 + (x1 - x0) * i / 4.0;
      xtick(v, num(v, 4));
    }
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << escape(chart.x_label) << (chart.log_x ? " (log scale)" : "") << "</text>\n";
  o << "<text transform=\"translate(16," << (T + H - B) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (chart.log_x && !(s.x[i] > 0))) continue;
      points += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
        << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
      << points << "\"/>\n";
    o << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << color
      << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct SweepRow {
  std::string value;
  bool ok = false;
  double top1 = NAN;
};

std::vector<SweepRow> read_sweep_csv(const std::string& path, std::string* sweep) {
  std::ifstream f(path);
  if (!f) throw FormatError("report: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw FormatError("report: '" + path + "' is empty");
  const auto header = split(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  std::string missing;
  for (const char* c : {"sweep", "value", "ok", "probe_top1"}) {
    if (!index.count(c)) missing += (missing.empty() ? "" : ", ") + std::string(c);
  }
  if (!missing.empty()) throw FormatError("report: '" + path + "' is missing columns: " + missing);
  std::vector<SweepRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw FormatError("report: '" + path + "' has a row with the wrong number of cells");
    }
    SweepRow r;
    *sweep = cells[index["sweep"]];
    r.value = cells[index["value"]];
    r.ok = cells[index["ok"]] == "1";
    if (r.ok && !cells[index["probe_top1"]].empty()) r.top1 = std::stod(cells[index["probe_top1"]]);
    rows.push_back(r);
  }
  return rows;
}

bool all_numeric(const std::vector<SweepRow>& rows) {
  for (const auto& r : rows) {
    try {
      std::size_t pos = 0;
      std::stod(r.value, &pos);
      if (pos != r.value.size()) return false;
    } catch (const std::exception&) {
      return false;
    }
  }
  return !rows.empty();
}

void write_file(const fs::path& path, const std::string& text, ReportOutput& out) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("report: cannot write '" + path.string() + "'");
  f << text;
  out.files.push_back(path.string());
}

std::string run_label(const fs::path& in_dir, const fs::path& file) {
  const fs::path parent = file.parent_path();
  if (fs::equivalent(parent, in_dir)) return "run";
  return parent.filename().string();
}

}  // namespace

ReportOutput report(const std::string& in_dir, const std::string& out_dir) {
  const fs::path in(in_dir);
  if (!fs::is_directory(in)) throw Error("report: no data: '" + in_dir + "' is not a directory");

  std::vector<fs::path> metrics_files, sweep_files;
  auto scan = [&](const fs::path& dir) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const std::string name = e.path().filename().string();
      if (name == "metrics.csv") metrics_files.push_back(e.path());
      if (name.rfind("sweep_", 0) == 0 && e.path().extension() == ".csv")
        sweep_files.push_back(e.path());
    }
  };
  scan(in);
  for (const auto& e : fs::directory_iterator(in))
    if (e.is_directory()) scan(e.path());
  std::sort(metrics_files.begin(), metrics_files.end());
  std::sort(sweep_files.begin(), sweep_files.end());

  // Parse everything before writing so a schema error leaves no output.
  std::vector<std::pair<std::string, std::vector<MetricsRecord>>> runs;
  for (const auto& p : metrics_files) {
    auto rows = read_metrics_csv(p.string());
    if (!rows.empty()) runs.emplace_back(run_label(in, p), std::move(rows));
  }
  struct Sweep {
    std::string name;
    std::vector<SweepRow> rows;
  };
  std::vector<Sweep> sweeps;
  for (const auto& p : sweep_files) {
    Sweep s;
    s.rows = read_sweep_csv(p.string(), &s.name);
    if (!s.rows.empty()) sweeps.push_back(std::move(s));
  }
  if (runs.empty() && sweeps.empty()) {
    throw Error("report: no data: no non-empty metrics.csv or sweep_*.csv under '" + in_dir + "'");
  }

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  ReportOutput result;

  for (const auto& [label, rows] : runs) {
    Chart chart;
    chart.title = "Loss curves: " + label;
    chart.x_label = "step";
    chart.y_label = "loss";
    Series total{"total", {}, {}}, inv{"invariance", {}, {}}, red{"redundancy", {}, {}};
    std::ostringstream tidy;
    tidy << "run,epoch,step,series,value\n";
    for (const auto& r : rows) {
      const double x = static_cast<double>(r.step);
      total.x.push_back(x), total.y.push_back(r.total);
      inv.x.push_back(x), inv.y.push_back(r.invariance);
      red.x.push_back(x), red.y.push_back(r.redundancy);
      const std::pair<const char*, double> cols[] = {
          {"total", r.total},         {"invariance", r.invariance},
          {"redundancy", r.redundancy}, {"mean_abs_offdiag", r.mean_abs_offdiag},
          {"min_std", r.min_std},     {"entropy_proxy", r.entropy_proxy}};
      for (const auto& [name, v] : cols)
        tidy << label << ',' << r.epoch << ',' << r.step << ',' << name << ',' << num(v, 17)
             << "\n";
      if (r.probe_top1)
        tidy << label << ',' << r.epoch << ',' << r.step << ",probe_top1," << num(*r.probe_top1, 17)
             << "\n";
    }
    chart.series = {total, inv, red};
    write_file(out / ("loss_" + label + ".svg"), render_svg(chart), result);
    write_file(out / ("loss_" + label + ".csv"), tidy.str(), result);
  }

  for (const auto& s : sweeps) {
    Chart chart;
    chart.title = "Probe accuracy vs " + s.name;
    chart.x_label = s.name == "lambda" ? "lambda" : s.name;
    chart.y_label = "probe top-1";
    Series acc{"top-1", {}, {}};
    const bool numeric = all_numeric(s.rows);
    chart.log_x = numeric && s.name == "lambda";
    std::ostringstream tidy;
    tidy << "sweep,value,ok,probe_top1\n";
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      const auto& r = s.rows[i];
      acc.x.push_back(numeric ? std::stod(r.value) : static_cast<double>(i));
      acc.y.push_back(r.top1);
      if (!numeric) chart.tick_labels.push_back(r.value);
      tidy << s.name << ',' << r.value << ',' << (r.ok ? 1 : 0) << ','
           << (std::isfinite(r.top1) ? num(r.top1, 17) : "") << "\n";
    }
    chart.series = {acc};
    write_file(out / ("sweep_" + s.name + ".svg"), render_svg(chart), result);
    write_file(out / ("sweep_" + s.name + "_tidy.csv"), tidy.str(), result);
  }
  return result;
}

}  // namespace btlab
