#include "latentblur/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace latentblur {

namespace {

struct Canvas {
  Image img;
  void set(Index x, Index y, const std::array<float, 3>& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    for (Index k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
  }
  void line(double x0, double y0, double x1, double y1, const std::array<float, 3>& c) {
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      set(std::lround(x0 + t * (x1 - x0)), std::lround(y0 + t * (y1 - y0)), c);
    }
  }
};

std::pair<double, double> padded_range(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(lo) * 0.05, 0.5);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

Image render_plot(const std::vector<PlotSeries>& series, const PlotOptions& o) {
  Canvas cv{Image(3, o.height, o.width)};
  cv.img.data.setOnes();

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_plot: x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  std::tie(xmin, xmax) = padded_range(xmin, xmax);
  std::tie(ymin, ymax) = padded_range(ymin, ymax);

  const double left = static_cast<double>(o.margin), right = static_cast<double>(o.width - o.margin);
  const double top = static_cast<double>(o.margin), bottom = static_cast<double>(o.height - o.margin);
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  const std::array<float, 3> axis{0.f, 0.f, 0.f}, grid{0.88f, 0.88f, 0.88f};
  for (int t = 0; t <= o.ticks; ++t) {
    const double fx = left + (right - left) * t / o.ticks;
    const double fy = top + (bottom - top) * t / o.ticks;
    cv.line(fx, top, fx, bottom, grid);
    cv.line(left, fy, right, fy, grid);
    cv.line(fx, bottom, fx, bottom + 4, axis);
    cv.line(left - 4, fy, left, fy, axis);
  }
  cv.line(left, top, right, top, axis);
  cv.line(left, bottom, right, bottom, axis);
  cv.line(left, top, left, bottom, axis);
  cv.line(right, top, right, bottom, axis);

  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double x = px(s.x[i]), y = py(s.y[i]);
      if (s.lines && i + 1 < s.x.size() && std::isfinite(s.x[i + 1]) && std::isfinite(s.y[i + 1])) {
        cv.line(x, y, px(s.x[i + 1]), py(s.y[i + 1]), s.color);
      }
      if (s.markers) {
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) cv.set(std::lround(x) + dx, std::lround(y) + dy, s.color);
      }
    }
  }
  return cv.img;
}

Image filmstrip(const std::vector<Image>& frames) {
  if (frames.empty()) throw std::invalid_argument("filmstrip: no frames");
  const Index h = frames.front().height, c = frames.front().channels;
  Index w = 0;
  for (const Image& f : frames) {
    if (f.height != h || f.channels != c) throw std::invalid_argument("filmstrip: frames differ in height or channels");
    w += f.width;
  }
  w += static_cast<Index>(frames.size()) - 1;
  Image out(c, h, w);
  out.data.setOnes();
  Index x0 = 0;
  for (const Image& f : frames) {
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < f.width; ++x)
        for (Index k = 0; k < c; ++k) out.at(y, x0 + x, k) = f.at(y, x, k);
    x0 += f.width + 1;
  }
  return out;
}

}  // namespace latentblur
