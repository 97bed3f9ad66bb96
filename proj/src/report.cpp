#include "l2s/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace l2s::io {

std::string LossCurveSvg(const std::vector<training::StepRecord>& history) {
  constexpr double kWidth = 720, kHeight = 420;
  constexpr double kLeft = 70, kRight = 150, kTop = 30, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  struct Series {
    const char* name;
    const char* color;
    double model::LossBreakdown::*field;
  };
  const Series series[] = {{"joint", "#000000", &model::LossBreakdown::joint},
                           {"reconstruction", "#1f77b4", &model::LossBreakdown::rec},
                           {"kl", "#d62728", &model::LossBreakdown::kl},
                           {"sync", "#2ca02c", &model::LossBreakdown::met}};

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : history) {
    for (const auto& s : series) {
      const double v = r.losses.*s.field;
      if (v > 0.0 && std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!(hi > 0.0)) {
    lo = 0.1;
    hi = 1.0;
  }
  const double log_lo = std::floor(std::log10(lo));
  const double log_hi = std::max(log_lo + 1.0, std::ceil(std::log10(hi)));
  const double step_lo = history.empty() ? 0.0 : static_cast<double>(history.front().step);
  const double step_hi = history.empty() ? 1.0 : std::max(step_lo + 1.0, static_cast<double>(history.back().step));
  auto x_of = [&](double step) { return kLeft + plot_w * (step - step_lo) / (step_hi - step_lo); };
  auto y_of = [&](double v) {
    const double lv = std::log10(std::max(v, lo));
    return kTop + plot_h * (log_hi - lv) / (log_hi - log_lo);
  };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  for (double e = log_lo; e <= log_hi; e += 1.0) {
    const double y = y_of(std::pow(10.0, e));
    svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e"
        << static_cast<int>(e) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double step = step_lo + (step_hi - step_lo) * i / 4.0;
    svg << "<text x=\"" << x_of(step) << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\">"
        << static_cast<long long>(std::llround(step)) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">step</text>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"" << kTop - 10 << "\">training loss</text>\n";

  for (std::size_t k = 0; k < std::size(series); ++k) {
    const auto& s = series[k];
    if (!history.empty()) {
      svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\" points=\"";
      for (const auto& r : history) {
        const double v = r.losses.*s.field;
        if (!std::isfinite(v)) continue;
        svg << x_of(static_cast<double>(r.step)) << ',' << y_of(v) << ' ';
      }
      svg << "\"/>\n";
    }
    const double ly = kTop + 16.0 + 18.0 * static_cast<double>(k);
    svg << "<line x1=\"" << kWidth - kRight + 12 << "\" x2=\"" << kWidth - kRight + 32 << "\" y1=\"" << ly
        << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly + 4 << "\">" << s.name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace l2s::io
