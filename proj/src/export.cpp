#include "walkeval/export.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>

#include <fmt/format.h>

#include "walkeval/error.hpp"

namespace walkeval {

namespace fs = std::filesystem;

namespace {

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string num(double value) { return fmt::format("{}", value); }

std::string num(const std::optional<double>& value) { return value ? num(*value) : std::string(); }

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) { row(header); }

  void row(std::initializer_list<std::string_view> fields) {
    bool first = true;
    for (auto f : fields) {
      if (!first) text_ += ',';
      text_ += csv_field(f);
      first = false;
    }
    text_ += '\n';
  }

  std::string str() const { return text_; }

 private:
  std::string text_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string file_stem(std::string_view criterion) {
  std::string out;
  for (char c : criterion) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

constexpr std::array<const char*, 4> kLevelColors{"#d1495b", "#edae49", "#00798c", "#30638e"};

const char* level_color(ExpertiseLevel level) { return kLevelColors[static_cast<std::size_t>(to_int(level) - 1)]; }

// Gaussian kernel density with Silverman's bandwidth.
std::vector<double> density(const std::vector<double>& values, const std::vector<double>& grid) {
  const double n = static_cast<double>(values.size());
  double spread = 0.0;
  if (values.size() >= 2) {
    const double sd = std::sqrt(stats::variance(values));
    const double iqr = (stats::quantile(values, 0.75) - stats::quantile(values, 0.25)) / 1.34;
    spread = iqr > 0.0 ? std::min(sd, iqr) : sd;
  }
  double h = 0.9 * spread * std::pow(n, -0.2);
  if (!(h > 0.0)) h = 1.0;
  std::vector<double> out;
  out.reserve(grid.size());
  for (double x : grid) {
    double sum = 0.0;
    for (double v : values) sum += special::normal_pdf((x - v) / h);
    out.push_back(sum / (n * h));
  }
  return out;
}

}  // namespace

std::string street_averages_csv(const ReportBundle& bundle) {
  Csv csv{"street", "level", "model", "criterion", "images", "mean"};
  for (const auto& s : bundle.street_averages) {
    csv.row({s.street, std::to_string(to_int(s.level)), model_label(s.level), s.criterion,
             std::to_string(s.images), num(s.mean)});
  }
  return csv.str();
}

std::string extremes_csv(const ReportBundle& bundle) {
  Csv csv{"level", "model", "criterion", "extreme", "image_id", "score", "tie"};
  for (const auto& e : bundle.extremes) {
    csv.row({std::to_string(to_int(e.level)), model_label(e.level), e.criterion, to_string(e.kind), e.image_id,
             num(e.score), e.tie ? "true" : "false"});
  }
  return csv.str();
}

std::string model_comparison_csv(const ReportBundle& bundle) {
  Csv csv{"criterion", "row",     "method",          "group_a",        "group_b", "statistic", "df1",
          "df2",       "mean_difference", "standard_error", "ci_low", "ci_high",   "p_value", "p_display"};
  for (const auto& c : bundle.model_comparison) {
    for (const auto* test : {&c.levene, &c.overall}) {
      csv.row({c.criterion, test == &c.levene ? "levene" : "overall", test->method, "", "", num(test->statistic),
               num(test->df.at(0)), num(test->df.at(1)), "", "", "", "", num(test->p_value),
               format_p(test->p_value)});
    }
    for (const auto& p : c.pairs) {
      csv.row({c.criterion, "pair", "games-howell", p.pair.first, p.pair.second, num(p.q_statistic), "", num(p.df),
               num(p.mean_difference), num(p.standard_error), num(p.ci_low), num(p.ci_high), num(p.p_value),
               format_p(p.p_value)});
    }
  }
  return csv.str();
}

std::string metric_divergence_csv(const ReportBundle& bundle) {
  Csv csv{"criterion", "rank", "metric", "vague_name", "statistic", "df", "p_value", "p_display",
          "n_c2",      "n_c3", "n_c4"};
  for (const auto& ranking : bundle.metric_divergence) {
    std::size_t rank = 0;
    for (const auto& r : ranking.rows) {
      csv.row({ranking.criterion, std::to_string(++rank), r.metric, r.vague_name, num(r.test.statistic),
               num(r.test.df.at(0)), num(r.test.p_value), format_p(r.test.p_value), std::to_string(r.sizes[0]),
               std::to_string(r.sizes[1]), std::to_string(r.sizes[2])});
    }
  }
  return csv.str();
}

std::string distribution_summary_csv(const ReportBundle& bundle) {
  Csv csv{"level", "model", "criterion", "n",      "mean", "sd",     "min",
          "q1",    "median", "q3",       "max",    "ci95_low", "ci95_high"};
  for (const auto& s : bundle.distribution_summary) {
    csv.row({std::to_string(to_int(s.level)), model_label(s.level), s.criterion, std::to_string(s.n), num(s.mean),
             num(s.sd), num(s.min), num(s.q1), num(s.median), num(s.q3), num(s.max), num(s.ci_low),
             num(s.ci_high)});
  }
  return csv.str();
}

std::string intervention_view_csv(const ReportBundle& bundle) {
  Csv csv{"street", "criterion", "metric", "level", "images", "mean", "threshold"};
  const auto& view = bundle.intervention_view;
  for (const auto& i : view.items) {
    csv.row({i.street, i.criterion, i.metric, std::to_string(to_int(i.level)), std::to_string(i.images), num(i.mean),
             num(view.threshold)});
  }
  return csv.str();
}

std::string distribution_svg(const ReportBundle& bundle, const std::string& criterion) {
  std::vector<const DistributionSummary*> rows;
  for (const auto& s : bundle.distribution_summary) {
    if (s.criterion == criterion) rows.push_back(&s);
  }

  constexpr double kWidth = 720;
  constexpr double kLeft = 90;
  constexpr double kRight = 30;
  constexpr double kTop = 50;
  constexpr double kDensityHeight = 220;
  constexpr double kBoxRow = 36;
  const double box_top = kTop + kDensityHeight + 40;
  const double height = box_top + kBoxRow * static_cast<double>(std::max<std::size_t>(rows.size(), 1)) + 50;

  double lo = 0.0;
  double hi = 1.0;
  if (!rows.empty()) {
    lo = rows.front()->min;
    hi = rows.front()->max;
    for (const auto* s : rows) {
      lo = std::min(lo, s->min);
      hi = std::max(hi, s->max);
    }
  }
  const double pad = std::max(1.0, 0.05 * (hi - lo));
  lo -= pad;
  hi += pad;
  const double plot_width = kWidth - kLeft - kRight;
  auto sx = [&](double v) { return kLeft + (v - lo) / (hi - lo) * plot_width; };

  constexpr int kGrid = 200;
  std::vector<double> grid;
  for (int i = 0; i <= kGrid; ++i) grid.push_back(lo + (hi - lo) * i / kGrid);
  std::vector<std::vector<double>> curves;
  double peak = 0.0;
  for (const auto* s : rows) {
    curves.push_back(density(s->values, grid));
    peak = std::max(peak, *std::max_element(curves.back().begin(), curves.back().end()));
  }
  if (!(peak > 0.0)) peak = 1.0;
  auto sy = [&](double d) { return kTop + kDensityHeight - d / peak * kDensityHeight; };

  std::string svg;
  auto out = std::back_inserter(svg);
  fmt::format_to(out,
                 "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
                 "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"12\">\n",
                 kWidth, height, kWidth, height);
  fmt::format_to(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
  fmt::format_to(out, "<text x=\"{:.2f}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{} score distribution</text>\n",
                 kWidth / 2, xml_escape(criterion));

  // Density panel
  fmt::format_to(out, "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", kLeft,
                 kTop + kDensityHeight, kWidth - kRight, kTop + kDensityHeight);
  fmt::format_to(out, "<text x=\"20\" y=\"{:.2f}\" transform=\"rotate(-90 20 {:.2f})\" text-anchor=\"middle\">density</text>\n",
                 kTop + kDensityHeight / 2, kTop + kDensityHeight / 2);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string points;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (i > 0) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", sx(grid[i]), sy(curves[r][i]));
    }
    fmt::format_to(out, "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
                   level_color(rows[r]->level), points);
  }

  // Legend
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double y = kTop + 10 + 18 * static_cast<double>(r);
    fmt::format_to(out, "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
                   kWidth - kRight - 110, y, level_color(rows[r]->level));
    fmt::format_to(out, "<text x=\"{:.2f}\" y=\"{:.2f}\">{} (n={})</text>\n", kWidth - kRight - 92, y + 10,
                   model_label(rows[r]->level), rows[r]->n);
  }

  // Box plots, one row per level
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& s = *rows[r];
    const double cy = box_top + kBoxRow * (static_cast<double>(r) + 0.5);
    const char* color = level_color(s.level);
    fmt::format_to(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kLeft - 8, cy + 4,
                   model_label(s.level));
    fmt::format_to(out, "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\"/>\n", sx(s.min),
                   cy, sx(s.max), cy, color);
    fmt::format_to(out,
                   "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" "
                   "fill-opacity=\"0.35\" stroke=\"{}\"/>\n",
                   sx(s.q1), cy - 10, sx(s.q3) - sx(s.q1), 20.0, color, color);
    fmt::format_to(out, "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\" stroke-width=\"2\"/>\n",
                   sx(s.median), cy - 10, sx(s.median), cy + 10);
    if (s.ci_low && s.ci_high) {
      fmt::format_to(out, "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\" stroke-dasharray=\"3,2\"/>\n",
                     sx(*s.ci_low), cy + 14, sx(*s.ci_high), cy + 14);
    }
    fmt::format_to(out, "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"black\"/>\n", sx(s.mean), cy + 14);
  }

  // Score axis
  const double axis_y = box_top + kBoxRow * static_cast<double>(std::max<std::size_t>(rows.size(), 1)) + 8;
  fmt::format_to(out, "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", kLeft,
                 axis_y, kWidth - kRight, axis_y);
  constexpr int kTicks = 6;
  for (int t = 0; t <= kTicks; ++t) {
    const double v = lo + (hi - lo) * t / kTicks;
    fmt::format_to(out, "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", sx(v),
                   axis_y, sx(v), axis_y + 5);
    fmt::format_to(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:.1f}</text>\n", sx(v), axis_y + 18, v);
  }
  fmt::format_to(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">score</text>\n", kLeft + plot_width / 2,
                 axis_y + 36);
  svg += "</svg>\n";
  return svg;
}

std::vector<fs::path> export_report(const ReportBundle& bundle, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  const std::array<std::pair<const char*, std::string (*)(const ReportBundle&)>, 6> tables{{
      {"street_averages.csv", &street_averages_csv},
      {"extremes.csv", &extremes_csv},
      {"model_comparison.csv", &model_comparison_csv},
      {"metric_divergence.csv", &metric_divergence_csv},
      {"distribution_summary.csv", &distribution_summary_csv},
      {"intervention_view.csv", &intervention_view_csv},
  }};
  std::vector<fs::path> written;
  for (const auto& [name, render] : tables) {
    written.push_back(dir / name);
    write_text(written.back(), render(bundle));
  }
  for (const auto& criterion : bundle.criteria) {
    written.push_back(dir / fmt::format("distribution_{}.svg", file_stem(criterion)));
    write_text(written.back(), distribution_svg(bundle, criterion));
  }
  return written;
}

}  // namespace walkeval
