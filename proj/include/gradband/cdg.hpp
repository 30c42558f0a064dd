#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradband/a3c.hpp"
#include "gradband/error.hpp"
#include "gradband/grid_map.hpp"
#include "gradband/value_surface.hpp"

namespace gradband {

// Continuous map coordinate; cell (i, j) has its centre at (i, j).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// ---------------------------------------------------------------------------
// Value field

// Replaces every free-cell value v with value_max - v. Obstacle cells carry no
// value of their own; they are filled harmonically (each equals the mean of its
// in-map 4-neighbours) so the interpolated field has no walls or sinks there.
ValueSurface preprocess_values(const ValueSurface& surface);

// Bilinear interpolation of the cell-centre values and its analytic gradient.
// Points are clamped to [0, N-1]^2.
double interpolate(const ValueSurface& surface, Point p);
Point interpolate_gradient(const ValueSurface& surface, Point p);

// ---------------------------------------------------------------------------
// Steepest descent

struct DescentConfig {
  double stop_height = 1e-4;  // stop once one iteration descends less than this
  int iteration_cap = 0;      // 0: 10 * N^2
  double initial_step = 1.0;  // first trial displacement, in cells
  double backtrack = 0.5;
  double armijo_c = 1e-4;
  int max_backtracks = 50;
};

struct GradientTrace {
  std::vector<Point> points;
  // Per-iteration step sizes (alpha_x, alpha_y); equal because the line
  // search runs along the gradient direction.
  std::vector<Point> steps;
  bool degenerate = false;  // flat start: single-point trace
};

// Throws InvalidArgument if `start` lies in an obstacle cell or outside the map.
GradientTrace gradient_descent_trace(const ValueSurface& preprocessed, Point start, const DescentConfig& cfg = {});

// ---------------------------------------------------------------------------
// Least-squares gradient function y = a0 + a1 x + ... + ak x^k

struct GradientFit {
  int degree = 0;
  std::vector<double> coeffs;  // a0..ak
  double residual = 0.0;       // sum of squared vertical deviations

  double eval(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;
  // f(x, y) = y - p(x)
  double implicit(Point p) const { return p.y - eval(p.x); }
};

class DegenerateFit : public Error {
 public:
  DegenerateFit(double x_spread, const std::string& what) : Error(what), x_spread_(x_spread) {}
  double x_spread() const noexcept { return x_spread_; }

 private:
  double x_spread_;
};

// Sum of squared residuals of `coeffs` over `points`.
double fit_residual(std::span<const Point> points, std::span<const double> coeffs);

// Solves the normal equations of the Vandermonde system. Throws DegenerateFit
// when fewer than degree+1 distinct x values exist, when the x spread is below
// near_vertical_ratio times the y spread, or when the system is numerically
// rank deficient.
GradientFit fit_gradient_function(std::span<const Point> points, int degree, double near_vertical_ratio = 0.1);

// ---------------------------------------------------------------------------
// Point-to-curve distance

struct CurveFoot {
  double distance = 0.0;
  Point foot;
};

// Nearest perpendicular foot on y = p(x). Newton on the stationarity condition
// of the squared distance from 256 seeds, with a dense-sampling +
// golden-section fallback.
CurveFoot distance_to_curve(Point p, const GradientFit& fit);

// ---------------------------------------------------------------------------
// Gradient band

enum class BandCase { BothSides, OneSide, Degenerate };
const char* to_string(BandCase c);

// Region lower(x) <= y <= upper(x) inside the domain box, where
// upper(x) = p(x) + U and lower(x) = p(x) + L. When `swapped` is set the fit
// expresses x as a polynomial in y and all band coordinates are transposed.
struct GradientBand {
  GradientFit fit;
  double upper = 0.0;
  double lower = 0.0;
  double x_lo = 0.0;  // X_L
  double y_lo = 0.0;  // Y_L
  double x_max = 0.0;
  double y_max = 0.0;
  BandCase band_case = BandCase::Degenerate;
  bool swapped = false;
  bool upper_from_obstacle = false;
  bool lower_from_obstacle = false;
  // Perpendicular-nearest edge point on each side (band coordinates).
  std::optional<Cell> nearest_above;
  std::optional<Cell> nearest_below;
  double nearest_above_distance = 0.0;
  double nearest_below_distance = 0.0;
  // Edge point each obstacle-derived bound passes through (band coordinates).
  std::optional<Cell> upper_anchor;
  std::optional<Cell> lower_anchor;
  // Offsets through the map corners (X_max, 0) and (0, Y_max).
  double corner_offsets[2] = {0.0, 0.0};

  double upper_at(double x) const { return fit.eval(x) + upper; }
  double lower_at(double x) const { return fit.eval(x) + lower; }
  // Membership test in band coordinates.
  bool contains_local(Point p) const;
  // Membership test in map coordinates.
  bool contains(Point p) const { return contains_local(swapped ? Point{p.y, p.x} : p); }
};

GradientBand compute_gradient_band(const GridMap& map, const GradientFit& fit);

// ---------------------------------------------------------------------------
// Baffles

enum class Orientation { Row, Column };
const char* to_string(Orientation o);

struct DominantExample {
  std::string base_map_id;
  std::vector<Cell> baffle_cells;
  Orientation orientation = Orientation::Row;
  int index = 0;  // y of the row, or x of the column

  std::string id() const;
  friend bool operator==(const DominantExample&, const DominantExample&) = default;
};

GridMap perturbed_map(const GridMap& base, const DominantExample& example);

// One candidate per cross-section row j = 1..N-1 and column i = 1..N-1: the
// maximal run of free in-band cells that the fitted curve crosses (or passes
// nearest). Runs shorter than min_length and runs that disconnect start from
// goal are dropped. Rows first, then columns, ascending.
std::vector<DominantExample> generate_baffles(const GridMap& map, const GradientBand& band, int min_length = 2);

// ---------------------------------------------------------------------------
// Full pipeline

enum class TraceStart { RobotStart, SurfaceMaximum };

struct CdgConfig {
  int degree = 3;
  DescentConfig descent;
  TraceStart trace_start = TraceStart::RobotStart;
  double near_vertical_ratio = 0.1;
  int min_baffle_length = 2;
};

// Audit record of one run.
struct CdgRun {
  std::string map_id;
  ValueSurface surface;
  ValueSurface preprocessed;
  GradientTrace trace;
  GradientFit fit;
  GradientBand band;
  std::vector<DominantExample> examples;
};

CdgRun cdg_from_surface(const GridMap& map, const ValueSurface& surface, const CdgConfig& cfg = {});
CdgRun cdg(const GridMap& map, const Agent& agent, const CdgConfig& cfg = {});

}  // namespace gradband
