#pragma once

#include <string>

#include "gradband/experiment.hpp"
#include "gradband/records.hpp"

namespace gradband {

// Map coordinates to SVG pixels: cell (x, y) is centred at
// ((x + 0.5) * cell_px, (N - 1 - y + 0.5) * cell_px).
struct PixelFrame {
  int size = 0;
  double cell_px = 10.0;
  double margin = 0.0;

  double px(double x) const { return margin + (x + 0.5) * cell_px; }
  double py(double y) const { return margin + (size - 1 - y + 0.5) * cell_px; }
};

// Value heat map with iso-lines and the steepest-ascent trace.
std::string contour_svg(const CdgRecordView& record, double cell_px = 10.0);
// Map, band region, bound curves, anchors and every candidate baffle. Bound
// polylines carry class="upper-bound" / class="lower-bound".
std::string band_svg(const CdgRecordView& record, double cell_px = 10.0);
// Generation and immune precision against map size; an empty chart when
// report is null.
std::string precision_svg(const CorpusReport* report);
// x,y,value rows for external 3-D surface plotting.
std::string surface_csv(const ValueSurface& surface);

}  // namespace gradband
