#include "pbshm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "pbshm/error.hpp"

namespace pbshm::svg {

namespace {

constexpr const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"};
constexpr double kWidth = 640, kHeight = 480, kMargin = 60;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string scatter(const std::vector<Series>& series, const std::vector<std::string>& label_names,
                    const std::string& title, std::size_t dim_x, std::size_t dim_y) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (static_cast<std::size_t>(s.X.cols()) <= std::max(dim_x, dim_y))
      fail(ErrorKind::invalid_input, "scatter: series '" + s.name + "' has too few feature dimensions");
    if (s.labels.size() != static_cast<std::size_t>(s.X.rows()))
      fail(ErrorKind::invalid_input, "scatter: series '" + s.name + "' label count mismatch");
    for (Eigen::Index i = 0; i < s.X.rows(); ++i) {
      x0 = std::min(x0, s.X(i, dim_x));
      x1 = std::max(x1, s.X(i, dim_x));
      y0 = std::min(y0, s.X(i, dim_y));
      y1 = std::max(y1, s.X(i, dim_y));
    }
  }
  if (!std::isfinite(x0)) x0 = y0 = 0.0, x1 = y1 = 1.0;
  const auto pad = [](double& lo, double& hi) {
    const double span = hi > lo ? hi - lo : std::max(std::abs(lo), 1.0) * 1e-3;
    lo -= 0.05 * span;
    hi += 0.05 * span;
  };
  pad(x0, x1);
  pad(y0, y1);
  const auto px = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); };
  const auto py = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
  os << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin << "\" height=\""
     << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << num(px(fx)) << "\" y=\"" << kHeight - kMargin + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << tick(fx) << "</text>\n";
    os << "<text x=\"" << kMargin - 6 << "\" y=\"" << num(py(fy) + 3) << "\" text-anchor=\"end\" font-size=\"10\">"
       << tick(fy) << "</text>\n";
  }
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\" font-size=\"12\">feature "
     << dim_x + 1 << " (Hz)</text>\n";
  os << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << kHeight / 2 << ")\">feature " << dim_y + 1 << " (Hz)</text>\n";

  for (const auto& s : series) {
    os << "<g class=\"series\" data-name=\"" << escape(s.name) << "\">\n";
    for (Eigen::Index i = 0; i < s.X.rows(); ++i) {
      const char* colour = kPalette[static_cast<std::size_t>(std::max(0, s.labels[static_cast<std::size_t>(i)])) % 8];
      os << "<circle cx=\"" << num(px(s.X(i, dim_x))) << "\" cy=\"" << num(py(s.X(i, dim_y))) << "\" r=\"3\" "
         << (s.hollow ? std::string("fill=\"none\" stroke=\"") + colour + "\"" : std::string("fill=\"") + colour + "\"")
         << "/>\n";
    }
    os << "</g>\n";
  }

  double ly = kMargin + 12;
  const double lx = kWidth - kMargin - 150;
  for (std::size_t l = 0; l < label_names.size(); ++l, ly += 14)
    os << "<circle cx=\"" << lx << "\" cy=\"" << num(ly - 4) << "\" r=\"4\" fill=\"" << kPalette[l % 8]
       << "\"/><text x=\"" << lx + 10 << "\" y=\"" << num(ly) << "\" font-size=\"11\">" << escape(label_names[l])
       << "</text>\n";
  for (const auto& s : series) {
    os << "<circle cx=\"" << lx << "\" cy=\"" << num(ly - 4) << "\" r=\"4\" "
       << (s.hollow ? "fill=\"none\" stroke=\"black\"" : "fill=\"black\"") << "/><text x=\"" << lx + 10 << "\" y=\""
       << num(ly) << "\" font-size=\"11\">" << escape(s.name) << "</text>\n";
    ly += 14;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pbshm::svg
