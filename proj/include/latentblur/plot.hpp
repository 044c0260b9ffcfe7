#pragma once

#include "latentblur/image.hpp"

#include <array>
#include <vector>

namespace latentblur {

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::array<float, 3> color{0.1f, 0.3f, 0.8f};
  bool lines = true;
  bool markers = true;
};

struct PlotOptions {
  Index width = 480;
  Index height = 360;
  Index margin = 32;
  int ticks = 5;
};

/// Minimal RGB chart: framed axes with tick marks, polylines and square markers.
Image render_plot(const std::vector<PlotSeries>& series, const PlotOptions& options = {});

/// Images side by side with a one-pixel white separator; all must share height and channel count.
Image filmstrip(const std::vector<Image>& frames);

}  // namespace latentblur
