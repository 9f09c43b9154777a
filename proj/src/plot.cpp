#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lastmile/sim.hpp"

namespace lastmile::cli {

namespace {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  Series data;
  bool equal_aspect = false;
};

constexpr int kPanelW = 420;
constexpr int kPanelH = 320;
constexpr int kPad = 48;

void draw_panel(std::ostringstream& svg, const Panel& p, int x0) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (std::size_t i = 0; i < p.data.x.size(); ++i) {
    xmin = std::min(xmin, p.data.x[i]);
    xmax = std::max(xmax, p.data.x[i]);
    ymin = std::min(ymin, p.data.y[i]);
    ymax = std::max(ymax, p.data.y[i]);
  }
  if (p.data.x.empty()) xmin = ymin = 0.0, xmax = ymax = 1.0;
  if (xmax - xmin < 1e-9) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-9) ymax = ymin + 1.0;
  const double w = kPanelW - 2 * kPad, h = kPanelH - 2 * kPad;
  double sx = w / (xmax - xmin), sy = h / (ymax - ymin);
  if (p.equal_aspect) sx = sy = std::min(sx, sy);

  svg << "<g transform=\"translate(" << x0 << ",0)\">\n";
  svg << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  svg << "<text x=\"" << kPanelW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << p.title
      << "</text>\n";
  svg << "<text x=\"" << kPanelW / 2 << "\" y=\"" << kPanelH - 10 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << p.x_label << " [" << xmin << ", " << xmax << "]</text>\n";
  svg << "<text x=\"12\" y=\"" << kPanelH / 2 << "\" font-size=\"11\" transform=\"rotate(-90 12 " << kPanelH / 2
      << ")\" text-anchor=\"middle\">" << p.y_label << " [" << ymin << ", " << ymax << "]</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.2\" points=\"";
  for (std::size_t i = 0; i < p.data.x.size(); ++i) {
    const double px = kPad + (p.data.x[i] - xmin) * sx;
    const double py = kPad + h - (p.data.y[i] - ymin) * sy;
    svg << px << ',' << py << ' ';
  }
  svg << "\"/>\n</g>\n";
}

}  // namespace

std::string plot_trace_svg(const std::filesystem::path& trace_path) {
  std::ifstream in(trace_path);
  if (!in) throw std::runtime_error("cannot open " + trace_path.string());
  Panel top{"top-down path", "x [m]", "y [m]", {}, true};
  Panel alt{"altitude profile", "t [s]", "z [m]", {}, false};
  Panel clr{"clearance timeline", "t [s]", "clearance [m]", {}, false};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") != "truth") continue;
    const double t = j.at("t").get<double>();
    const auto& p = j.at("position");
    top.data.x.push_back(p[0].get<double>());
    top.data.y.push_back(p[1].get<double>());
    alt.data.x.push_back(t);
    alt.data.y.push_back(p[2].get<double>());
    clr.data.x.push_back(t);
    clr.data.y.push_back(j.at("clearance").get<double>());
  }
  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 3 * kPanelW << "\" height=\"" << kPanelH
      << "\" font-family=\"sans-serif\">\n";
  draw_panel(svg, top, 0);
  draw_panel(svg, alt, kPanelW);
  draw_panel(svg, clr, 2 * kPanelW);
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lastmile::cli
