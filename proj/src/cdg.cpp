#include "gradband/cdg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace gradband {

// ---------------------------------------------------------------------------
// Value field

ValueSurface preprocess_values(const ValueSurface& surface) {
  ValueSurface out = surface;
  const int n = surface.size;
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (!out.free_mask[i]) continue;
    out.values[i] = surface.value_max - surface.values[i];
    hi = std::max(hi, out.values[i]);
    lo = std::min(lo, out.values[i]);
  }
  out.value_max = hi;

  std::vector<int> holes;
  for (int i = 0; i < n * n; ++i)
    if (!out.free_mask[static_cast<std::size_t>(i)]) {
      holes.push_back(i);
      out.values[static_cast<std::size_t>(i)] = 0.5 * (hi + lo);
    }
  // Gauss-Seidel on the discrete Laplace equation over obstacle cells.
  const double tol = 1e-13 * std::max(1.0, hi - lo);
  for (int sweep = 0; sweep < 100 * n * n && !holes.empty(); ++sweep) {
    double change = 0.0;
    for (int i : holes) {
      const int x = i % n, y = i / n;
      double sum = 0.0;
      int count = 0;
      if (x > 0) sum += out.values[static_cast<std::size_t>(i - 1)], ++count;
      if (x + 1 < n) sum += out.values[static_cast<std::size_t>(i + 1)], ++count;
      if (y > 0) sum += out.values[static_cast<std::size_t>(i - n)], ++count;
      if (y + 1 < n) sum += out.values[static_cast<std::size_t>(i + n)], ++count;
      const double v = sum / count;
      change = std::max(change, std::abs(v - out.values[static_cast<std::size_t>(i)]));
      out.values[static_cast<std::size_t>(i)] = v;
    }
    if (change <= tol) break;
  }
  return out;
}

namespace {

struct Patch {
  int i, j;
  double fx, fy;
  double v00, v10, v01, v11;
};

Patch locate(const ValueSurface& s, Point p) {
  const int n = s.size;
  const double hi = n - 1;
  const double x = std::clamp(p.x, 0.0, hi);
  const double y = std::clamp(p.y, 0.0, hi);
  Patch q{};
  q.i = std::min(static_cast<int>(std::floor(x)), std::max(n - 2, 0));
  q.j = std::min(static_cast<int>(std::floor(y)), std::max(n - 2, 0));
  q.fx = x - q.i;
  q.fy = y - q.j;
  const int i1 = std::min(q.i + 1, n - 1);
  const int j1 = std::min(q.j + 1, n - 1);
  q.v00 = s.at({q.i, q.j});
  q.v10 = s.at({i1, q.j});
  q.v01 = s.at({q.i, j1});
  q.v11 = s.at({i1, j1});
  return q;
}

}  // namespace

double interpolate(const ValueSurface& surface, Point p) {
  const auto q = locate(surface, p);
  return (1 - q.fx) * (1 - q.fy) * q.v00 + q.fx * (1 - q.fy) * q.v10 + (1 - q.fx) * q.fy * q.v01 +
         q.fx * q.fy * q.v11;
}

Point interpolate_gradient(const ValueSurface& surface, Point p) {
  const auto q = locate(surface, p);
  return {(1 - q.fy) * (q.v10 - q.v00) + q.fy * (q.v11 - q.v01),
          (1 - q.fx) * (q.v01 - q.v00) + q.fx * (q.v11 - q.v10)};
}

// ---------------------------------------------------------------------------
// Steepest descent

GradientTrace gradient_descent_trace(const ValueSurface& pre, Point start, const DescentConfig& cfg) {
  const int n = pre.size;
  const double hi = n - 1;
  if (start.x < 0 || start.y < 0 || start.x > hi || start.y > hi)
    throw InvalidArgument("descent start outside the map box");
  const Cell start_cell{static_cast<int>(std::lround(start.x)), static_cast<int>(std::lround(start.y))};
  if (!pre.is_free(start_cell)) throw InvalidArgument("descent start lies in an obstacle cell");

  GradientTrace trace;
  trace.points.push_back(start);
  const int cap = cfg.iteration_cap > 0 ? cfg.iteration_cap : 10 * n * n;
  Point p = start;
  double v = interpolate(pre, p);
  for (int it = 0; it < cap; ++it) {
    // On cell boundaries the interpolant is only piecewise smooth; when the
    // one-sided gradient admits no descent, try those of the adjacent patches.
    // On a ridge between patches both one-sided gradients can point along it;
    // their average is the last resort.
    constexpr double kNudge = 1e-9;
    const auto grad_at = [&](Point q) {
      return interpolate_gradient(pre, {std::clamp(q.x, 0.0, hi), std::clamp(q.y, 0.0, hi)});
    };
    const Point central{0.5 * (grad_at({p.x - kNudge, p.y}).x + grad_at({p.x + kNudge, p.y}).x),
                        0.5 * (grad_at({p.x, p.y - kNudge}).y + grad_at({p.x, p.y + kNudge}).y)};
    const Point directions[] = {grad_at(p), grad_at({p.x - kNudge, p.y}), grad_at({p.x, p.y - kNudge}),
                                grad_at({p.x - kNudge, p.y - kNudge}), central};
    // Every direction gets its own Armijo search; the deepest accepted step wins.
    bool accepted = false;
    bool any_gradient = false;
    Point next{};
    double next_v = v;
    double alpha = 0.0;
    for (const Point& g : directions) {
      const double gnorm2 = g.x * g.x + g.y * g.y;
      if (gnorm2 == 0.0) continue;
      any_gradient = true;
      double a = cfg.initial_step / std::sqrt(gnorm2);
      for (int b = 0; b <= cfg.max_backtracks; ++b, a *= cfg.backtrack) {
        const Point q{std::clamp(p.x - a * g.x, 0.0, hi), std::clamp(p.y - a * g.y, 0.0, hi)};
        // Armijo condition on the actual (possibly clamped) displacement.
        const double predicted = g.x * (p.x - q.x) + g.y * (p.y - q.y);
        const double qv = interpolate(pre, q);
        if (predicted > 0.0 && qv <= v - cfg.armijo_c * predicted) {
          if (!accepted || qv < next_v) {
            accepted = true;
            next = q;
            next_v = qv;
            alpha = a;
          }
          break;
        }
      }
    }
    if (!any_gradient && it == 0) trace.degenerate = true;
    if (!accepted) break;
    const double height = v - next_v;
    trace.points.push_back(next);
    trace.steps.push_back({alpha, alpha});
    p = next;
    v = next_v;
    if (height < cfg.stop_height) break;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Least squares

double GradientFit::eval(double x) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double GradientFit::derivative(double x) const {
  double acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 1;) acc = acc * x + static_cast<double>(j) * coeffs[j];
  return acc;
}

double GradientFit::second_derivative(double x) const {
  double acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 2;) acc = acc * x + static_cast<double>(j * (j - 1)) * coeffs[j];
  return acc;
}

double fit_residual(std::span<const Point> points, std::span<const double> coeffs) {
  double r = 0.0;
  for (const auto& p : points) {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * p.x + *it;
    const double d = p.y - acc;
    r += d * d;
  }
  return r;
}

GradientFit fit_gradient_function(std::span<const Point> points, int degree, double near_vertical_ratio) {
  if (degree < 1) throw InvalidArgument("polynomial degree must be >= 1");
  const auto k = static_cast<std::size_t>(degree);

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  std::set<double> distinct;
  for (const auto& p : points) {
    x_min = std::min(x_min, p.x);
    x_max = std::max(x_max, p.x);
    y_min = std::min(y_min, p.y);
    y_max = std::max(y_max, p.y);
    distinct.insert(p.x);
  }
  const double x_spread = points.empty() ? 0.0 : x_max - x_min;
  const double y_spread = points.empty() ? 0.0 : y_max - y_min;
  if (distinct.size() < k + 1)
    throw DegenerateFit(x_spread, "need " + std::to_string(k + 1) + " distinct x values, have " +
                                      std::to_string(distinct.size()));
  if (x_spread < near_vertical_ratio * y_spread)
    throw DegenerateFit(x_spread, "near-vertical trace: x spread " + std::to_string(x_spread) + " vs y spread " +
                                      std::to_string(y_spread));

  // Normal equations in the scaled variable t = x / s; a_j = c_j / s^j.
  const double s = std::max(std::abs(x_min), std::abs(x_max)) > 0 ? std::max(std::abs(x_min), std::abs(x_max)) : 1.0;
  const std::size_t m = k + 1;
  std::vector<double> power_sums(2 * k + 1, 0.0), rhs(m, 0.0);
  for (const auto& p : points) {
    const double t = p.x / s;
    double tp = 1.0;
    for (std::size_t e = 0; e <= 2 * k; ++e) {
      power_sums[e] += tp;
      if (e < m) rhs[e] += tp * p.y;
      tp *= t;
    }
  }
  std::vector<double> a(m * m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c) a[r * m + c] = power_sums[r + c];

  double max_diag = 0.0;
  for (std::size_t r = 0; r < m; ++r) max_diag = std::max(max_diag, std::abs(a[r * m + r]));
  // Gaussian elimination with partial pivoting.
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::abs(a[r * m + col]) > std::abs(a[piv * m + col])) piv = r;
    if (std::abs(a[piv * m + col]) <= 1e-13 * max_diag)
      throw DegenerateFit(x_spread, "rank-deficient normal equations");
    if (piv != col) {
      for (std::size_t c = 0; c < m; ++c) std::swap(a[col * m + c], a[piv * m + c]);
      std::swap(rhs[col], rhs[piv]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = a[r * m + col] / a[col * m + col];
      for (std::size_t c = col; c < m; ++c) a[r * m + c] -= f * a[col * m + c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> c(m);
  for (std::size_t r = m; r-- > 0;) {
    double acc = rhs[r];
    for (std::size_t q = r + 1; q < m; ++q) acc -= a[r * m + q] * c[q];
    c[r] = acc / a[r * m + r];
  }

  GradientFit fit;
  fit.degree = degree;
  fit.coeffs.resize(m);
  double scale = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    fit.coeffs[j] = c[j] / scale;
    scale *= s;
  }
  fit.residual = fit_residual(points, fit.coeffs);
  return fit;
}

// ---------------------------------------------------------------------------
// Point-to-curve distance

namespace {

double squared_distance(const GradientFit& fit, Point p, double x) {
  const double dx = x - p.x;
  const double dy = fit.eval(x) - p.y;
  return dx * dx + dy * dy;
}

}  // namespace

CurveFoot distance_to_curve(Point p, const GradientFit& fit) {
  const double vertical = std::abs(fit.eval(p.x) - p.y);
  if (vertical == 0.0) return {0.0, p};

  // The vertical foot has squared distance vertical^2, so the nearest foot
  // satisfies |x - p.x| <= vertical.
  const double lo = p.x - vertical;
  const double hi = p.x + vertical;
  double best_x = p.x;
  double best_d2 = vertical * vertical;
  bool found_stationary = false;

  constexpr int kSeeds = 256;
  constexpr int kNewtonIters = 60;
  for (int s = 0; s < kSeeds; ++s) {
    double x = lo + (hi - lo) * s / (kSeeds - 1);
    bool converged = false;
    for (int it = 0; it < kNewtonIters; ++it) {
      const double y = fit.eval(x) - p.y;
      const double d1 = fit.derivative(x);
      const double g = (x - p.x) + y * d1;
      const double gp = 1.0 + d1 * d1 + y * fit.second_derivative(x);
      if (gp == 0.0 || !std::isfinite(gp)) break;
      const double dx = g / gp;
      x -= dx;
      if (!std::isfinite(x)) break;
      if (std::abs(dx) <= 1e-15 * (1.0 + std::abs(x))) {
        converged = true;
        break;
      }
    }
    if (!converged || x < lo - vertical || x > hi + vertical) continue;
    found_stationary = true;
    const double d2 = squared_distance(fit, p, x);
    if (d2 < best_d2) {
      best_d2 = d2;
      best_x = x;
    }
  }

  if (!found_stationary) {
    constexpr int kDense = 100'000;
    for (int s = 0; s <= kDense; ++s) {
      const double x = lo + (hi - lo) * s / kDense;
      const double d2 = squared_distance(fit, p, x);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_x = x;
      }
    }
    const double h = (hi - lo) / kDense;
    double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
      if (squared_distance(fit, p, c) < squared_distance(fit, p, d))
        b = d;
      else
        a = c;
      c = b - inv_phi * (b - a);
      d = a + inv_phi * (b - a);
    }
    const double x = 0.5 * (a + b);
    if (squared_distance(fit, p, x) < best_d2) {
      best_x = x;
      best_d2 = squared_distance(fit, p, x);
    }
  }
  return {std::sqrt(best_d2), {best_x, fit.eval(best_x)}};
}

// ---------------------------------------------------------------------------
// Gradient band

const char* to_string(BandCase c) {
  switch (c) {
    case BandCase::BothSides:
      return "both-sides";
    case BandCase::OneSide:
      return "one-side";
    case BandCase::Degenerate:
      return "one-side-degenerate";
  }
  return "?";
}

bool GradientBand::contains_local(Point p) const {
  if (p.x < x_lo || p.x > x_max || p.y < y_lo || p.y > y_max) return false;
  const double base = fit.eval(p.x);
  return p.y >= base + lower && p.y <= base + upper;
}

namespace {

// Axis intersections of the lower bound, clamped to the map box.
void update_domain(GradientBand& band) {
  const auto lower = [&](double x) { return band.lower_at(x); };
  band.x_lo = 0.0;
  if (lower(0.0) < 0.0) {
    constexpr int kSamples = 1000;
    double prev = 0.0;
    for (int s = 1; s <= kSamples; ++s) {
      const double x = band.x_max * s / kSamples;
      if (lower(x) >= 0.0) {
        double a = prev, b = x;
        for (int it = 0; it < 100; ++it) {
          const double mid = 0.5 * (a + b);
          (lower(mid) >= 0.0 ? b : a) = mid;
        }
        band.x_lo = b;
        break;
      }
      prev = x;
    }
  }
  band.y_lo = std::clamp(lower(0.0), 0.0, band.y_max);
}

bool strictly_inside_domain(const GradientBand& band, Point p) {
  return p.x > band.x_lo && p.x < band.x_max && p.y > band.y_lo && p.y < band.y_max;
}

}  // namespace

GradientBand compute_gradient_band(const GridMap& map, const GradientFit& fit) {
  GradientBand band;
  band.fit = fit;
  band.x_max = band.y_max = map.size() - 1;
  band.corner_offsets[0] = 0.0 - fit.eval(band.x_max);
  band.corner_offsets[1] = band.y_max - fit.eval(0.0);

  // Extremes of y - p(x) over the cell centres of the map.
  double box_hi = -std::numeric_limits<double>::infinity();
  double box_lo = std::numeric_limits<double>::infinity();
  for (int y = 0; y < map.size(); ++y)
    for (int x = 0; x < map.size(); ++x) {
      const double off = y - fit.eval(x);
      box_hi = std::max(box_hi, off);
      box_lo = std::min(box_lo, off);
    }

  struct Sided {
    Cell cell;
    double offset;
  };
  std::vector<Sided> above, below;
  const auto edges = obstacle_edge_points(map);
  for (Cell c : edges.points) {
    const Point p{static_cast<double>(c.x), static_cast<double>(c.y)};
    const double off = fit.implicit(p);
    const double d = distance_to_curve(p, fit).distance;
    if (off >= 0.0) {
      above.push_back({c, off});
      if (!band.nearest_above || d < band.nearest_above_distance) {
        band.nearest_above = c;
        band.nearest_above_distance = d;
      }
    } else {
      below.push_back({c, off});
      if (!band.nearest_below || d < band.nearest_below_distance) {
        band.nearest_below = c;
        band.nearest_below_distance = d;
      }
    }
  }

  if (edges.points.empty()) {
    band.band_case = BandCase::Degenerate;
    band.upper = box_hi;
    band.lower = box_lo;
    if (!(band.lower < band.upper)) band.upper = band.lower + 1e-9;
    // Nothing to bound against: the band is the whole box.
    band.x_lo = band.y_lo = 0.0;
    return band;
  }

  // Corner-derived offset for the side without obstacles: the candidate nearer
  // the curve among those on the correct side, else the map extreme.
  const auto corner_bound = [&](bool upper_side) {
    double best = upper_side ? box_hi : box_lo;
    for (double c : band.corner_offsets) {
      if (upper_side && c > 0.0) best = std::min(best, c);
      if (!upper_side && c < 0.0) best = std::max(best, c);
    }
    return best;
  };

  if (band.nearest_above) {
    band.upper_from_obstacle = true;
    band.upper_anchor = band.nearest_above;
    band.upper = fit.implicit({static_cast<double>(band.nearest_above->x), static_cast<double>(band.nearest_above->y)});
  } else {
    band.upper = corner_bound(true);
  }
  if (band.nearest_below) {
    band.lower_from_obstacle = true;
    band.lower_anchor = band.nearest_below;
    band.lower = fit.implicit({static_cast<double>(band.nearest_below->x), static_cast<double>(band.nearest_below->y)});
  } else {
    band.lower = corner_bound(false);
  }
  band.band_case = (band.upper_from_obstacle && band.lower_from_obstacle) ? BandCase::BothSides : BandCase::OneSide;
  if (!(band.lower < band.upper)) band.upper = band.lower + 1e-9;

  // Perpendicular nearness and vertical offsets rank points differently on
  // curved fits; shrink each obstacle-derived bound until no edge point of its
  // side lies strictly between the bounds inside the domain box.
  for (int round = 0; round < 64; ++round) {
    update_domain(band);
    bool changed = false;
    for (const auto& s : above) {
      const Point p{static_cast<double>(s.cell.x), static_cast<double>(s.cell.y)};
      if (s.offset < band.upper && s.offset > band.lower && strictly_inside_domain(band, p)) {
        band.upper = s.offset;
        band.upper_anchor = s.cell;
        changed = true;
      }
    }
    for (const auto& s : below) {
      const Point p{static_cast<double>(s.cell.x), static_cast<double>(s.cell.y)};
      if (s.offset > band.lower && s.offset < band.upper && strictly_inside_domain(band, p)) {
        band.lower = s.offset;
        band.lower_anchor = s.cell;
        changed = true;
      }
    }
    if (!changed) break;
  }
  update_domain(band);
  return band;
}

// ---------------------------------------------------------------------------
// Baffles

const char* to_string(Orientation o) { return o == Orientation::Row ? "row" : "column"; }

std::string DominantExample::id() const {
  return std::string(orientation == Orientation::Row ? "row-" : "col-") + std::to_string(index);
}

GridMap perturbed_map(const GridMap& base, const DominantExample& example) {
  return add_baffle(base, example.baffle_cells);
}

namespace {

// Candidates for a band expressed in the map's own coordinates.
std::vector<DominantExample> baffles_local(const GridMap& map, const GradientBand& band, int min_length) {
  const int n = map.size();
  std::vector<DominantExample> out;
  const auto usable = [&](Cell c) {
    return map.is_free(c) && c != map.start() && c != map.goal() &&
           band.contains_local({static_cast<double>(c.x), static_cast<double>(c.y)});
  };

  for (int pass = 0; pass < 2; ++pass) {
    const bool rows = pass == 0;
    for (int index = 1; index < n; ++index) {
      const auto cell_at = [&](int t) { return rows ? Cell{t, index} : Cell{index, t}; };
      // Distance of a cell from the curve along the cross-section.
      const auto curve_gap = [&](Cell c) { return std::abs(c.y - band.fit.eval(c.x)); };

      std::vector<Cell> best;
      double best_gap = std::numeric_limits<double>::infinity();
      std::vector<Cell> run;
      double run_gap = std::numeric_limits<double>::infinity();
      for (int t = 0; t <= n; ++t) {
        const bool ok = t < n && usable(cell_at(t));
        if (ok) {
          run.push_back(cell_at(t));
          run_gap = std::min(run_gap, curve_gap(cell_at(t)));
          continue;
        }
        if (!run.empty() && run_gap < best_gap) {
          best = run;
          best_gap = run_gap;
        }
        run.clear();
        run_gap = std::numeric_limits<double>::infinity();
      }
      if (static_cast<int>(best.size()) < min_length) continue;
      if (!is_connected(add_baffle(map, best))) continue;
      out.push_back({"", std::move(best), rows ? Orientation::Row : Orientation::Column, index});
    }
  }
  return out;
}

}  // namespace

std::vector<DominantExample> generate_baffles(const GridMap& map, const GradientBand& band, int min_length) {
  if (!band.swapped) return baffles_local(map, band, min_length);

  auto local = baffles_local(transpose(map), band, min_length);
  for (auto& ex : local) {
    for (auto& c : ex.baffle_cells) std::swap(c.x, c.y);
    std::sort(ex.baffle_cells.begin(), ex.baffle_cells.end(), row_major_less);
    ex.orientation = ex.orientation == Orientation::Row ? Orientation::Column : Orientation::Row;
  }
  std::stable_sort(local.begin(), local.end(), [](const DominantExample& a, const DominantExample& b) {
    if (a.orientation != b.orientation) return a.orientation == Orientation::Row;
    return a.index < b.index;
  });
  return local;
}

// ---------------------------------------------------------------------------
// Pipeline

CdgRun cdg_from_surface(const GridMap& map, const ValueSurface& surface, const CdgConfig& cfg) {
  CdgRun run;
  run.map_id = fingerprint(map);
  run.surface = surface;
  run.preprocessed = preprocess_values(surface);

  Point start{static_cast<double>(map.start().x), static_cast<double>(map.start().y)};
  if (cfg.trace_start == TraceStart::SurfaceMaximum) {
    double best = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < map.size(); ++y)
      for (int x = 0; x < map.size(); ++x)
        if (Cell c{x, y}; run.preprocessed.is_free(c) && run.preprocessed.at(c) > best) {
          best = run.preprocessed.at(c);
          start = {static_cast<double>(x), static_cast<double>(y)};
        }
  }
  run.trace = gradient_descent_trace(run.preprocessed, start, cfg.descent);

  try {
    run.fit = fit_gradient_function(run.trace.points, cfg.degree, cfg.near_vertical_ratio);
    run.band = compute_gradient_band(map, run.fit);
  } catch (const DegenerateFit&) {
    std::vector<Point> swapped;
    swapped.reserve(run.trace.points.size());
    for (const auto& p : run.trace.points) swapped.push_back({p.y, p.x});
    run.fit = fit_gradient_function(swapped, cfg.degree, cfg.near_vertical_ratio);
    run.band = compute_gradient_band(transpose(map), run.fit);
    run.band.swapped = true;
  }
  run.examples = generate_baffles(map, run.band, cfg.min_baffle_length);
  for (auto& ex : run.examples) ex.base_map_id = run.map_id;
  return run;
}

CdgRun cdg(const GridMap& map, const Agent& agent, const CdgConfig& cfg) {
  return cdg_from_surface(map, extract_value_surface(agent, map), cfg);
}

}  // namespace gradband
