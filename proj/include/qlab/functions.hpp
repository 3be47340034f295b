#pragma once

// Test functions on R^N with exact classical norms.
//
// Every one-dimensional family is described by a sorted list of monotone
// pieces (flat, affine or smooth) covering its variation interval, plus the
// constant values it takes to the left and right of that interval. The
// estimators in quotient.hpp work entirely from that description.

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qlab/core.hpp"

namespace qlab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] double length() const { return hi - lo; }
  [[nodiscard]] bool empty() const { return !(lo < hi); }
};

/// Axis-aligned box, one interval per coordinate.
using Box = std::vector<Interval>;

struct Knot {
  double x;
  double y;
};

class FunctionSpec;

namespace family {

struct Constant {
  double value = 0.0;
};

/// Indicator of the closed interval [a, b].
struct Indicator {
  double a = 0.0;
  double b = 1.0;
};

/// Tent max(0, 1 - |x - center| / halfwidth).
struct Hat {
  double center = 0.0;
  double halfwidth = 1.0;
};

/// phi(k(|x| - 1/2)) with phi = 1 on (-inf,-1], 0 on [1,inf).
/// Profile 0 is the cubic smoothstep, the only one shipped.
struct SmoothedStep {
  int k = 8;
  int profile = 0;
};

/// Self-similar staircase on [0,1] of depth j: k ramps of width k^(-1/alpha)
/// per cell, each carrying a copy of the depth j-1 staircase scaled by 1/k.
/// placement in [0,1] slides each ramp inside its cell (0 = left-packed).
struct Staircase {
  int j = 1;
  int k = 4;
  double alpha = 0.5;
  double placement = 0.0;
};

/// sin(M pi x) on [-1, 1], zero outside.
struct SineBump {
  int m = 4;
};

/// Linear interpolation through knots with nondecreasing x; two knots with
/// equal x encode a jump. Constant extension beyond the end knots.
struct PiecewiseLinear {
  std::vector<Knot> knots;
};

/// x -> base(|x|) on R^dimension.
struct RadialExtension {
  std::shared_ptr<const FunctionSpec> base;
  int dimension = 2;
};

}  // namespace family

using Family = std::variant<family::Constant, family::Indicator, family::Hat, family::SmoothedStep,
                            family::Staircase, family::SineBump, family::PiecewiseLinear,
                            family::RadialExtension>;

/// v(x) = amplitude * u(scale * (x - shift)), scale > 0.
struct Transform {
  double amplitude = 1.0;
  double shift = 0.0;
  double scale = 1.0;
  [[nodiscard]] bool identity() const { return amplitude == 1.0 && shift == 0.0 && scale == 1.0; }
};

enum class PieceShape { flat, affine, smooth };

/// A monotone piece on [lo, hi]. v_lo and v_hi are the one-sided limits at
/// the ends (they differ from neighbours' values at jumps).
struct Piece {
  double lo;
  double hi;
  PieceShape shape;
  double v_lo;
  double v_hi;
};

namespace detail {

inline double smoothstep_profile(double t) {
  if (t <= -1.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double z = 0.5 * (t + 1.0);
  return 1.0 - z * z * (3.0 - 2.0 * z);
}

inline double smoothstep_profile_slope(double t) {
  if (t <= -1.0 || t >= 1.0) return 0.0;
  const double z = 0.5 * (t + 1.0);
  return -3.0 * z * (1.0 - z);
}

// Ramp width relative to the cell is k * L where L = k^(-1/alpha).
struct StaircaseGeometry {
  long double cell_ramp_lo;  // ramp start inside a unit cell
  long double cell_ramp_len; // ramp length inside a unit cell
  long double width;         // L
};

inline StaircaseGeometry staircase_geometry(const family::Staircase& s) {
  const long double k = s.k;
  const long double L = std::pow(k, -1.0L / static_cast<long double>(s.alpha));
  const long double gap = 1.0L / k - L;
  return {s.placement * gap * k, L * k, L};
}

inline double staircase_value(const family::Staircase& s, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const auto g = staircase_geometry(s);
  const long double k = s.k;
  long double pos = x;
  long double value = 0.0L;
  long double weight = 1.0L;
  for (int level = 0; level < s.j; ++level) {
    const long double scaled = pos * k;
    long double cell = std::floor(scaled);
    if (cell > k - 1) cell = k - 1;
    const long double t = scaled - cell;
    if (t < g.cell_ramp_lo) return static_cast<double>(value + weight * cell / k);
    if (t >= g.cell_ramp_lo + g.cell_ramp_len) return static_cast<double>(value + weight * (cell + 1) / k);
    value += weight * cell / k;
    weight /= k;
    pos = (t - g.cell_ramp_lo) / g.cell_ramp_len;
  }
  return static_cast<double>(value + weight * pos);
}

inline double staircase_slope(const family::Staircase& s, double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const auto g = staircase_geometry(s);
  const long double k = s.k;
  long double pos = x;
  for (int level = 0; level < s.j; ++level) {
    const long double scaled = pos * k;
    long double cell = std::floor(scaled);
    if (cell > k - 1) cell = k - 1;
    const long double t = scaled - cell;
    if (t < g.cell_ramp_lo || t >= g.cell_ramp_lo + g.cell_ramp_len) return 0.0;
    pos = (t - g.cell_ramp_lo) / g.cell_ramp_len;
  }
  return static_cast<double>(std::pow(1.0L / (k * g.width), static_cast<long double>(s.j)));
}

inline constexpr std::size_t kMaxStaircasePieces = std::size_t{1} << 22;

inline std::size_t staircase_piece_count(const family::Staircase& s) {
  // ramps k^j; plateaus at most one per ramp plus one
  long double n = std::pow(static_cast<long double>(s.k), s.j);
  return n * 2 + 2 > static_cast<long double>(kMaxStaircasePieces) ? kMaxStaircasePieces + 1
                                                                   : static_cast<std::size_t>(2 * n + 2);
}

inline void push_piece(std::vector<Piece>& out, Piece p) {
  if (!(p.hi > p.lo)) return;
  if (p.shape == PieceShape::flat && !out.empty() && out.back().shape == PieceShape::flat &&
      out.back().v_hi == p.v_lo && out.back().hi == p.lo) {
    out.back().hi = p.hi;
    return;
  }
  out.push_back(p);
}

inline void staircase_pieces(const family::Staircase& s, const StaircaseGeometry& g, int level,
                             long double x0, long double width, long double y0, long double height,
                             std::vector<Piece>& out) {
  if (level == 0) {
    push_piece(out, {static_cast<double>(x0), static_cast<double>(x0 + width), PieceShape::affine,
                     static_cast<double>(y0), static_cast<double>(y0 + height)});
    return;
  }
  const long double k = s.k;
  for (int l = 0; l < s.k; ++l) {
    const long double cell = x0 + width * l / k;
    const long double ramp = cell + width * g.cell_ramp_lo / k;
    const long double ramp_end = ramp + width * g.width;
    const long double cell_end = x0 + width * (l + 1) / k;
    const long double ylo = y0 + height * l / k;
    const long double yhi = y0 + height * (l + 1) / k;
    push_piece(out, {static_cast<double>(cell), static_cast<double>(ramp), PieceShape::flat,
                     static_cast<double>(ylo), static_cast<double>(ylo)});
    staircase_pieces(s, g, level - 1, ramp, width * g.width, ylo, height / k, out);
    push_piece(out, {static_cast<double>(ramp_end), static_cast<double>(cell_end), PieceShape::flat,
                     static_cast<double>(yhi), static_cast<double>(yhi)});
  }
}

/// Maximum of g over [lo, hi] by dense sampling plus Brent refinement.
template <class G>
double maximize(G g, double lo, double hi, int samples = 64) {
  double best_x = lo;
  double best = g(lo);
  const double step = (hi - lo) / samples;
  for (int i = 1; i <= samples; ++i) {
    const double x = i == samples ? hi : lo + step * i;
    const double v = g(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  const double a = std::max(lo, best_x - step);
  const double b = std::min(hi, best_x + step);
  if (b > a) {
    auto r = boost::math::tools::brent_find_minima([&](double x) { return -g(x); }, a, b, 52);
    best = std::max(best, -r.second);
  }
  return best;
}

struct Structure {
  bool pieces_available = true;
  std::vector<Piece> pieces;
  double left_value = 0.0;
  double right_value = 0.0;
  double min_feature = std::numeric_limits<double>::infinity();
  double lipschitz = 0.0;  // +inf when there are jumps
  bool piecewise_constant = true;
  bool monotone = false;   // globally monotone (enables TV shortcuts)
};

}  // namespace detail

/// Immutable description of a test function. Copies share structure.
class FunctionSpec {
 public:
  FunctionSpec() : FunctionSpec(family::Constant{0.0}) {}
  explicit FunctionSpec(Family fam, Transform t = {});

  static FunctionSpec constant(double c) { return FunctionSpec(family::Constant{c}); }
  static FunctionSpec indicator(double a, double b) { return FunctionSpec(family::Indicator{a, b}); }
  static FunctionSpec hat(double center, double halfwidth) {
    return FunctionSpec(family::Hat{center, halfwidth});
  }
  static FunctionSpec smoothed_step(int k, int profile = 0) {
    return FunctionSpec(family::SmoothedStep{k, profile});
  }
  static FunctionSpec staircase(int j, int k, double alpha, double placement = 0.0) {
    return FunctionSpec(family::Staircase{j, k, alpha, placement});
  }
  static FunctionSpec sine_bump(int m) { return FunctionSpec(family::SineBump{m}); }
  static FunctionSpec piecewise_linear(std::vector<Knot> knots) {
    return FunctionSpec(family::PiecewiseLinear{std::move(knots)});
  }
  static FunctionSpec radial(const FunctionSpec& base, int dimension = 2) {
    return FunctionSpec(family::RadialExtension{std::make_shared<const FunctionSpec>(base), dimension});
  }

  [[nodiscard]] FunctionSpec scaled(double amplitude) const {
    Transform t = transform_;
    t.amplitude *= amplitude;
    return FunctionSpec(family_, t);
  }
  [[nodiscard]] FunctionSpec translated(double by) const {
    Transform t = transform_;
    t.shift += by;
    return FunctionSpec(family_, t);
  }
  /// x -> u(a x)
  [[nodiscard]] FunctionSpec dilated(double a) const {
    Transform t = transform_;
    t.scale *= a;
    t.shift /= a;
    return FunctionSpec(family_, t);
  }

  [[nodiscard]] const Family& family() const { return family_; }
  [[nodiscard]] const Transform& transform() const { return transform_; }
  [[nodiscard]] int dimension() const { return dimension_; }
  [[nodiscard]] double support_radius() const { return support_radius_; }

  /// One-dimensional evaluation (dimension() == 1).
  [[nodiscard]] double operator()(double x) const {
    if (dimension_ != 1) throw DomainError("scalar evaluation of a function on R^" + std::to_string(dimension_));
    return eval1(x);
  }
  [[nodiscard]] double evaluate(std::span<const double> x) const;

  /// u'(x) inside a piece (one-sided value at breakpoints is unspecified).
  [[nodiscard]] double derivative(double x) const;

  /// u(x + h) - u(x), evaluated without cancellation where the family allows.
  [[nodiscard]] double difference(double x, double h) const;

  // Piece structure, transformed into x-space. Only for dimension() == 1.
  [[nodiscard]] bool pieces_available() const { return structure_->pieces_available; }
  [[nodiscard]] const std::vector<Piece>& pieces() const;
  [[nodiscard]] double left_value() const { return structure_->left_value; }
  [[nodiscard]] double right_value() const { return structure_->right_value; }
  /// Smallest interval outside of which u is constant on each side.
  [[nodiscard]] Interval variation_interval() const { return variation_; }
  [[nodiscard]] double min_feature() const { return structure_->min_feature; }
  [[nodiscard]] double lipschitz() const { return structure_->lipschitz; }
  [[nodiscard]] bool piecewise_constant() const { return structure_->piecewise_constant; }
  [[nodiscard]] bool is_constant() const { return variation_.empty(); }
  [[nodiscard]] bool monotone() const { return structure_->monotone; }
  /// Value of piece i at x using its exact affine/flat model when available.
  [[nodiscard]] double piece_value(const Piece& p, double x) const {
    switch (p.shape) {
      case PieceShape::flat: return p.v_lo;
      case PieceShape::affine: return p.v_lo + (p.v_hi - p.v_lo) * ((x - p.lo) / (p.hi - p.lo));
      case PieceShape::smooth: break;
    }
    return eval1(x);
  }
  /// The base profile of a radial extension.
  [[nodiscard]] const FunctionSpec& radial_base() const;

 private:
  [[nodiscard]] double eval1(double x) const;
  [[nodiscard]] double base_value(double x) const;
  [[nodiscard]] double base_slope(double x) const;
  [[nodiscard]] double base_difference(double x, double h) const;
  void build();

  Family family_;
  Transform transform_;
  int dimension_ = 1;
  double support_radius_ = 0.0;
  Interval variation_{0.0, 0.0};
  std::shared_ptr<const detail::Structure> structure_;
};

// ---------------------------------------------------------------------------

inline FunctionSpec::FunctionSpec(Family fam, Transform t) : family_(std::move(fam)), transform_(t) {
  if (!(transform_.scale > 0.0) || !std::isfinite(transform_.scale))
    throw DomainError("transform scale must be positive and finite");
  if (!std::isfinite(transform_.amplitude) || !std::isfinite(transform_.shift))
    throw DomainError("transform amplitude and shift must be finite");
  build();
}

inline double FunctionSpec::base_value(double x) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, family::Constant>) {
          return f.value;
        } else if constexpr (std::is_same_v<T, family::Indicator>) {
          return (x >= f.a && x <= f.b) ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, family::Hat>) {
          return std::max(0.0, 1.0 - std::abs(x - f.center) / f.halfwidth);
        } else if constexpr (std::is_same_v<T, family::SmoothedStep>) {
          return detail::smoothstep_profile(f.k * (std::abs(x) - 0.5));
        } else if constexpr (std::is_same_v<T, family::Staircase>) {
          return detail::staircase_value(f, x);
        } else if constexpr (std::is_same_v<T, family::SineBump>) {
          if (x < -1.0 || x > 1.0) return 0.0;
          return std::sin(f.m * M_PI * x);
        } else if constexpr (std::is_same_v<T, family::PiecewiseLinear>) {
          const auto& k = f.knots;
          if (x < k.front().x) return k.front().y;
          auto it = std::upper_bound(k.begin(), k.end(), x, [](double v, const Knot& kn) { return v < kn.x; });
          const std::size_t i = static_cast<std::size_t>(it - k.begin()) - 1;
          if (i + 1 >= k.size()) return k.back().y;
          const Knot& a = k[i];
          const Knot& b = k[i + 1];
          return a.y + (b.y - a.y) * ((x - a.x) / (b.x - a.x));
        } else {
          return f.base->eval1(std::abs(x));
        }
      },
      family_);
}

inline double FunctionSpec::base_slope(double x) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, family::Constant> || std::is_same_v<T, family::Indicator>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, family::Hat>) {
          if (std::abs(x - f.center) >= f.halfwidth) return 0.0;
          return x < f.center ? 1.0 / f.halfwidth : -1.0 / f.halfwidth;
        } else if constexpr (std::is_same_v<T, family::SmoothedStep>) {
          const double sgn = x < 0.0 ? -1.0 : 1.0;
          return f.k * sgn * detail::smoothstep_profile_slope(f.k * (std::abs(x) - 0.5));
        } else if constexpr (std::is_same_v<T, family::Staircase>) {
          return detail::staircase_slope(f, x);
        } else if constexpr (std::is_same_v<T, family::SineBump>) {
          if (x < -1.0 || x > 1.0) return 0.0;
          return f.m * M_PI * std::cos(f.m * M_PI * x);
        } else if constexpr (std::is_same_v<T, family::PiecewiseLinear>) {
          const auto& k = f.knots;
          if (x < k.front().x) return 0.0;
          auto it = std::upper_bound(k.begin(), k.end(), x, [](double v, const Knot& kn) { return v < kn.x; });
          const std::size_t i = static_cast<std::size_t>(it - k.begin()) - 1;
          if (i + 1 >= k.size()) return 0.0;
          return (k[i + 1].y - k[i].y) / (k[i + 1].x - k[i].x);
        } else {
          return f.base->derivative(x);
        }
      },
      family_);
}

inline double FunctionSpec::eval1(double x) const {
  const Transform& t = transform_;
  return t.amplitude * base_value(t.scale * (x - t.shift));
}

inline double FunctionSpec::evaluate(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dimension_)
    throw DomainError("point has dimension " + std::to_string(x.size()) + ", function lives on R^" +
                      std::to_string(dimension_));
  for (double c : x)
    if (!std::isfinite(c)) throw DomainError("evaluation point must be finite");
  if (dimension_ == 1) return eval1(x[0]);
  double r2 = 0.0;
  for (double c : x) r2 += c * c;
  return transform_.amplitude * base_value(transform_.scale * std::sqrt(r2));
}

inline double FunctionSpec::derivative(double x) const {
  const Transform& t = transform_;
  return t.amplitude * t.scale * base_slope(t.scale * (x - t.shift));
}

inline double FunctionSpec::difference(double x, double h) const {
  if (dimension_ != 1) throw DomainError("difference() is one-dimensional");
  const Transform& t = transform_;
  return t.amplitude * base_difference(t.scale * (x - t.shift), t.scale * h);
}

namespace detail {

// w(x + h) - w(x) for the staircase: descend while both points share a ramp.
inline double staircase_difference(family::Staircase s, double x, double h) {
  if (x <= 0.0 || x + h >= 1.0 || h == 0.0) return staircase_value(s, x + h) - staircase_value(s, x);
  const auto g = staircase_geometry(s);
  const long double k = s.k;
  long double pos = x, d = h, weight = 1.0L;
  int level = 0;
  for (; level < s.j; ++level) {
    const long double scaled = pos * k;
    long double cell = std::floor(scaled);
    if (cell > k - 1) cell = k - 1;
    const long double t = scaled - cell;
    const long double t2 = t + d * k;
    const long double end = g.cell_ramp_lo + g.cell_ramp_len;
    if (!(t >= g.cell_ramp_lo && t2 < end)) break;
    pos = (t - g.cell_ramp_lo) / g.cell_ramp_len;
    d = d * k / g.cell_ramp_len;
    weight /= k;
  }
  if (level == s.j) return static_cast<double>(weight * d);
  s.j -= level;
  const long double a = staircase_value(s, static_cast<double>(pos));
  const long double b = staircase_value(s, static_cast<double>(pos + d));
  return static_cast<double>(weight * (b - a));
}

}  // namespace detail

inline double FunctionSpec::base_difference(double x, double h) const {
  if (h < 0.0) return -base_difference(x + h, -h);  // the shortcuts below assume h > 0
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        const double y = x + h;
        if constexpr (std::is_same_v<T, family::Hat>) {
          const double lo = f.center - f.halfwidth, hi = f.center + f.halfwidth;
          if (x >= lo && y <= f.center) return h / f.halfwidth;
          if (x >= f.center && y <= hi) return -h / f.halfwidth;
        } else if constexpr (std::is_same_v<T, family::SmoothedStep>) {
          if ((x >= 0.0) == (y >= 0.0)) {
            const double t1 = f.k * (std::abs(x) - 0.5), t2 = f.k * (std::abs(y) - 0.5);
            if (t1 > -1.0 && t1 < 1.0 && t2 > -1.0 && t2 < 1.0) {
              const double z1 = 0.5 * (t1 + 1.0), z2 = 0.5 * (t2 + 1.0);
              const double dz = (x >= 0.0 ? 0.5 : -0.5) * f.k * h;
              return -dz * (3.0 * (z1 + z2) - 2.0 * (z1 * z1 + z1 * z2 + z2 * z2));
            }
          }
        } else if constexpr (std::is_same_v<T, family::SineBump>) {
          if (x >= -1.0 && y <= 1.0) {
            const double a = f.m * M_PI;
            return 2.0 * std::cos(a * (x + 0.5 * h)) * std::sin(0.5 * a * h);
          }
        } else if constexpr (std::is_same_v<T, family::Staircase>) {
          return detail::staircase_difference(f, x, h);
        } else if constexpr (std::is_same_v<T, family::PiecewiseLinear>) {
          const auto& k = f.knots;
          auto it = std::upper_bound(k.begin(), k.end(), x, [](double v, const Knot& kn) { return v < kn.x; });
          if (it != k.begin() && it != k.end() && y < it->x) {
            const Knot& a = *(it - 1);
            return (it->y - a.y) / (it->x - a.x) * h;
          }
        }
        return base_value(y) - base_value(x);
      },
      family_);
}

inline const std::vector<Piece>& FunctionSpec::pieces() const {
  if (dimension_ != 1) throw DomainError("piece structure requested for a function on R^" + std::to_string(dimension_));
  if (!structure_->pieces_available)
    throw DomainError("piece structure too large for this function (more than " +
                      std::to_string(detail::kMaxStaircasePieces) + " pieces)");
  return structure_->pieces;
}

inline const FunctionSpec& FunctionSpec::radial_base() const {
  const auto* r = std::get_if<family::RadialExtension>(&family_);
  if (!r) throw DomainError("not a radial extension");
  return *r->base;
}

inline void FunctionSpec::build() {
  auto st = std::make_shared<detail::Structure>();
  std::vector<Piece> base;  // untransformed
  double left = 0.0, right = 0.0;
  double radius = 0.0;  // untransformed support radius about the origin
  bool jumps = false;
  bool monotone = false;
  double base_lip = 0.0;

  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, family::Constant>) {
          if (!std::isfinite(f.value)) throw DomainError("constant must be finite");
          left = right = f.value;
          monotone = true;
        } else if constexpr (std::is_same_v<T, family::Indicator>) {
          if (!(f.a < f.b) || !std::isfinite(f.a) || !std::isfinite(f.b))
            throw DomainError("indicator requires finite a < b");
          base.push_back({f.a, f.b, PieceShape::flat, 1.0, 1.0});
          radius = std::max(std::abs(f.a), std::abs(f.b));
          jumps = true;
        } else if constexpr (std::is_same_v<T, family::Hat>) {
          if (!(f.halfwidth > 0.0) || !std::isfinite(f.halfwidth) || !std::isfinite(f.center))
            throw DomainError("hat requires a finite center and positive halfwidth");
          base.push_back({f.center - f.halfwidth, f.center, PieceShape::affine, 0.0, 1.0});
          base.push_back({f.center, f.center + f.halfwidth, PieceShape::affine, 1.0, 0.0});
          radius = std::abs(f.center) + f.halfwidth;
          base_lip = 1.0 / f.halfwidth;
        } else if constexpr (std::is_same_v<T, family::SmoothedStep>) {
          if (f.k < 2) throw DomainError("smoothed step requires k >= 2");
          if (f.profile != 0) throw DomainError("unknown smoothed step profile " + std::to_string(f.profile));
          const double inner = 0.5 - 1.0 / f.k;
          const double outer = 0.5 + 1.0 / f.k;
          base.push_back({-outer, -inner, PieceShape::smooth, 0.0, 1.0});
          if (inner > 0.0) base.push_back({-inner, inner, PieceShape::flat, 1.0, 1.0});
          base.push_back({inner, outer, PieceShape::smooth, 1.0, 0.0});
          radius = outer;
          base_lip = 0.75 * f.k;
        } else if constexpr (std::is_same_v<T, family::Staircase>) {
          if (f.j < 0 || f.k < 2 || !(f.alpha > 0.0 && f.alpha < 1.0))
            throw DomainError("staircase requires j >= 0, k >= 2, 0 < alpha < 1");
          if (!(f.placement >= 0.0 && f.placement <= 1.0))
            throw DomainError("staircase placement must lie in [0, 1]");
          const auto g = detail::staircase_geometry(f);
          if (g.width * f.k > 1.0L) throw DomainError("staircase infeasible: k ramps of width k^(-1/alpha) exceed [0,1]");
          right = 1.0;
          radius = 1.0;
          monotone = true;
          base_lip = static_cast<double>(std::pow(1.0L / (f.k * g.width), static_cast<long double>(f.j)));
          if (detail::staircase_piece_count(f) > detail::kMaxStaircasePieces) {
            st->pieces_available = false;
            const long double Lj = std::pow(g.width, static_cast<long double>(f.j));
            const long double gap = (1.0L / f.k - g.width) * std::pow(g.width, static_cast<long double>(f.j - 1));
            st->min_feature = static_cast<double>(f.placement > 0.0 && f.placement < 1.0
                                                      ? std::min(Lj, gap * std::min<long double>(f.placement, 1 - f.placement))
                                                      : std::min(Lj, gap));
          } else {
            detail::staircase_pieces(f, g, f.j, 0.0L, 1.0L, 0.0L, 1.0L, base);
          }
        } else if constexpr (std::is_same_v<T, family::SineBump>) {
          if (f.m < 1) throw DomainError("sine bump requires M >= 1");
          // extrema at (n + 1/2)/M
          std::vector<double> cuts{-1.0};
          for (int n = -f.m; n < f.m; ++n) cuts.push_back((n + 0.5) / f.m);
          cuts.push_back(1.0);
          for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double a = cuts[i], b = cuts[i + 1];
            base.push_back({a, b, PieceShape::smooth, std::sin(f.m * M_PI * a), std::sin(f.m * M_PI * b)});
          }
          // exact endpoint values
          base.front().v_lo = 0.0;
          base.back().v_hi = 0.0;
          for (std::size_t i = 0; i + 1 < base.size(); ++i) {
            const double v = (i % 2 == 0) ? -1.0 : 1.0;
            base[i].v_hi = base[i + 1].v_lo = v;
          }
          radius = 1.0;
          base_lip = f.m * M_PI;
        } else if constexpr (std::is_same_v<T, family::PiecewiseLinear>) {
          const auto& k = f.knots;
          if (k.empty()) throw DomainError("piecewise linear function needs at least one knot");
          for (std::size_t i = 0; i < k.size(); ++i) {
            if (!std::isfinite(k[i].x) || !std::isfinite(k[i].y)) throw DomainError("knots must be finite");
            if (i > 0 && k[i].x < k[i - 1].x) throw DomainError("knot x values must be nondecreasing");
            if (i > 1 && k[i].x == k[i - 2].x) throw DomainError("at most two knots may share an x value");
          }
          left = k.front().y;
          right = k.back().y;
          bool up = true, down = true;
          for (std::size_t i = 0; i + 1 < k.size(); ++i) {
            if (k[i + 1].y > k[i].y) down = false;
            if (k[i + 1].y < k[i].y) up = false;
            if (k[i + 1].x == k[i].x) {
              if (k[i + 1].y != k[i].y) jumps = true;
              continue;
            }
            const PieceShape sh = k[i].y == k[i + 1].y ? PieceShape::flat : PieceShape::affine;
            base.push_back({k[i].x, k[i + 1].x, sh, k[i].y, k[i + 1].y});
            base_lip = std::max(base_lip, std::abs((k[i + 1].y - k[i].y) / (k[i + 1].x - k[i].x)));
          }
          monotone = up || down;
          if (base.empty() && left != right) throw DomainError("pwl with a bare jump needs a piece of positive length");
          for (const Knot& kn : k) radius = std::max(radius, std::abs(kn.x));
        } else {
          if (!f.base) throw DomainError("radial extension without base");
          if (f.base->dimension() != 1) throw DomainError("radial base must be one-dimensional");
          if (f.dimension != 2) throw DomainError("radial extension supports N = 2 only");
          if (transform_.shift != 0.0) throw DomainError("radial extension cannot be translated");
          dimension_ = f.dimension;
        }
      },
      family_);

  const Transform& t = transform_;
  if (dimension_ != 1) {
    const FunctionSpec& b = radial_base();
    const auto& bs = *b.structure_;
    radius = 0.0;
    for (const Piece& p : bs.pieces) radius = std::max({radius, std::abs(p.lo), std::abs(p.hi)});
    support_radius_ = radius / t.scale;
    st->pieces_available = false;
    st->left_value = st->right_value = t.amplitude * bs.right_value;
    st->piecewise_constant = bs.piecewise_constant;
    st->lipschitz = bs.lipschitz * std::abs(t.amplitude) * t.scale;
    st->min_feature = bs.min_feature / t.scale;
    variation_ = {-support_radius_, support_radius_};
    structure_ = std::move(st);
    return;
  }

  st->left_value = t.amplitude * left;
  st->right_value = t.amplitude * right;
  st->monotone = monotone;
  if (std::holds_alternative<family::Staircase>(family_)) {
    // the generator rounds cell offsets independently; the staircase is continuous
    for (std::size_t i = 1; i < base.size(); ++i) {
      base[i].lo = base[i - 1].hi;
      base[i].v_lo = base[i - 1].v_hi;
      if (base[i].shape == PieceShape::flat) base[i].v_hi = base[i].v_lo;
    }
    std::vector<Piece> merged;
    merged.reserve(base.size());
    for (const Piece& p : base) detail::push_piece(merged, p);
    base = std::move(merged);
  }
  st->pieces.reserve(base.size());
  for (const Piece& p : base) {
    Piece q{t.shift + p.lo / t.scale, t.shift + p.hi / t.scale, p.shape, t.amplitude * p.v_lo, t.amplitude * p.v_hi};
    if (t.amplitude == 0.0) q.shape = PieceShape::flat;
    st->pieces.push_back(q);
  }
  for (const Piece& p : st->pieces) {
    st->min_feature = std::min(st->min_feature, p.hi - p.lo);
    if (p.shape != PieceShape::flat && p.v_lo != p.v_hi) st->piecewise_constant = false;
  }
  if (!st->pieces_available) {
    st->piecewise_constant = false;
    st->min_feature /= t.scale;
  }
  // jumps between consecutive pieces or at the exterior
  if (st->pieces_available && !st->pieces.empty()) {
    const auto& ps = st->pieces;
    bool jump = ps.front().v_lo != st->left_value || ps.back().v_hi != st->right_value;
    for (std::size_t i = 0; i + 1 < ps.size(); ++i)
      if (ps[i].v_hi != ps[i + 1].v_lo || ps[i].hi != ps[i + 1].lo) jump = jump || ps[i].v_hi != ps[i + 1].v_lo;
    jumps = jumps || jump;
  }
  st->lipschitz = (jumps && t.amplitude != 0.0) ? std::numeric_limits<double>::infinity()
                                                : base_lip * std::abs(t.amplitude) * t.scale;
  if (t.amplitude == 0.0) st->piecewise_constant = true;

  const bool flat_everywhere = t.amplitude == 0.0 || std::holds_alternative<family::Constant>(family_) ||
                               (st->pieces_available && st->pieces.empty());
  if (flat_everywhere) {
    variation_ = {0.0, 0.0};
    st->pieces.clear();
    st->left_value = st->right_value = t.amplitude * left;
    st->lipschitz = 0.0;
    st->piecewise_constant = true;
    st->monotone = true;
    support_radius_ = 0.0;
  } else {
    if (st->pieces_available) {
      variation_ = {st->pieces.front().lo, st->pieces.back().hi};
    } else {
      variation_ = {t.shift, t.shift + 1.0 / t.scale};  // staircase on [0,1]
    }
    support_radius_ = std::max(std::abs(variation_.lo), std::abs(variation_.hi));
  }
  structure_ = std::move(st);
}

// ---------------------------------------------------------------------------
// Norms.

namespace detail {

template <class G>
double integrate(G g, double a, double b, double tol = 1e-13) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, a, b, 20, tol, &err);
}

// Length of the arc of the circle of radius r that lies inside a 2-D box.
inline double arc_inside_box(double r, const Box& box) {
  if (r <= 0.0) return 0.0;
  std::vector<double> angles{0.0, 2.0 * M_PI};
  auto add = [&](double c, bool vertical) {
    if (std::abs(c) > r) return;
    const double a = std::acos(c / r);
    if (vertical) {  // x = c
      angles.push_back(a);
      angles.push_back(2.0 * M_PI - a);
    } else {  // y = c, angle with sin = c/r
      const double s = std::asin(c / r);
      angles.push_back(std::fmod(s + 2.0 * M_PI, 2.0 * M_PI));
      angles.push_back(M_PI - s);
    }
  };
  add(box[0].lo, true);
  add(box[0].hi, true);
  add(box[1].lo, false);
  add(box[1].hi, false);
  std::sort(angles.begin(), angles.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < angles.size(); ++i) {
    const double a = angles[i], b = angles[i + 1];
    if (!(b > a)) continue;
    const double m = 0.5 * (a + b);
    const double x = r * std::cos(m), y = r * std::sin(m);
    if (x >= box[0].lo && x <= box[0].hi && y >= box[1].lo && y <= box[1].hi) total += r * (b - a);
  }
  return total;
}

inline Box whole_space(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return Box(static_cast<std::size_t>(n), Interval{-inf, inf});
}

inline void check_box(const FunctionSpec& f, const Box& box) {
  if (static_cast<int>(box.size()) != f.dimension())
    throw DomainError("domain has dimension " + std::to_string(box.size()) + ", function lives on R^" +
                      std::to_string(f.dimension()));
  for (const Interval& iv : box)
    if (!(iv.hi > iv.lo)) throw DomainError("domain box is empty");
}

}  // namespace detail

/// sup |u| over R^N.
inline double sup_norm(const FunctionSpec& f) {
  if (f.dimension() != 1) {
    const FunctionSpec& b = f.radial_base();
    double m = std::abs(b.right_value());
    if (b.pieces_available())
      for (const Piece& p : b.pieces())
        if (p.hi > 0.0) m = std::max({m, std::abs(p.v_hi), p.lo >= 0.0 ? std::abs(p.v_lo) : std::abs(b(0.0))});
    return std::abs(f.transform().amplitude) * m;
  }
  double m = std::max(std::abs(f.left_value()), std::abs(f.right_value()));
  if (f.pieces_available()) {
    for (const Piece& p : f.pieces()) m = std::max({m, std::abs(p.v_lo), std::abs(p.v_hi)});
  } else {
    m = std::max(m, std::max(std::abs(f(f.variation_interval().lo)), std::abs(f(f.variation_interval().hi))));
  }
  return m;
}

/// Total variation (|Du|(domain)) over a box; jumps on the boundary of the
/// domain are not counted. `clipped` reports whether the domain misses part of
/// the variation.
inline double grad_l1_norm(const FunctionSpec& f, const Box& domain, bool* clipped = nullptr) {
  detail::check_box(f, domain);
  if (f.is_constant()) {
    if (clipped) *clipped = false;
    return 0.0;
  }
  if (f.dimension() == 1) {
    const double lo = domain[0].lo, hi = domain[0].hi;
    const Interval v = f.variation_interval();
    bool clip = !(lo < v.lo && v.hi < hi);
    double total = 0.0;
    if (!f.pieces_available()) {
      // monotone staircase: TV is the increment over the clamped window
      const double a = std::max(lo, v.lo), b = std::min(hi, v.hi);
      if (b > a) total = std::abs(f(b) - f(a));
      clip = !(lo <= v.lo && v.hi <= hi);
    } else {
      const auto& ps = f.pieces();
      // jumps at piece boundaries strictly inside the domain
      auto jump_at = [&](double x, double l, double r) {
        if (x > lo && x < hi) total += std::abs(r - l);
        else if ((x == lo || x == hi) && l != r) clip = true;
      };
      jump_at(ps.front().lo, f.left_value(), ps.front().v_lo);
      for (std::size_t i = 0; i + 1 < ps.size(); ++i)
        if (ps[i].hi == ps[i + 1].lo) jump_at(ps[i].hi, ps[i].v_hi, ps[i + 1].v_lo);
      jump_at(ps.back().hi, ps.back().v_hi, f.right_value());
      for (const Piece& p : ps) {
        const double a = std::max(lo, p.lo), b = std::min(hi, p.hi);
        if (!(b > a) || p.shape == PieceShape::flat) continue;
        const double ua = a == p.lo ? p.v_lo : f.piece_value(p, a);
        const double ub = b == p.hi ? p.v_hi : f.piece_value(p, b);
        total += std::abs(ub - ua);
      }
      // a variation interval touching the domain boundary only through flat
      // exterior is not clipping
      if (clip && lo <= v.lo && v.hi <= hi) {
        clip = (v.lo == lo && ps.front().v_lo != f.left_value()) || (v.hi == hi && ps.back().v_hi != f.right_value());
      }
    }
    if (clipped) *clipped = clip;
    return total;
  }
  // radial: integrate |u'(r)| times arc length, plus jumps times arc length
  const FunctionSpec& b = f.radial_base();
  const double s = f.transform().scale, amp = std::abs(f.transform().amplitude);
  double total = 0.0;
  const auto& ps = b.pieces();
  auto arc = [&](double r) { return detail::arc_inside_box(r / s, domain); };
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Piece& p = ps[i];
    const double prev = i == 0 ? b.left_value() : ps[i - 1].v_hi;
    if (p.lo > 0.0 && prev != p.v_lo) total += std::abs(p.v_lo - prev) * arc(p.lo);
    const double a = std::max(0.0, p.lo);
    if (p.hi > a && p.shape != PieceShape::flat)
      total += detail::integrate([&](double r) { return std::abs(b.derivative(r)) * arc(r); }, a, p.hi) / s;
  }
  if (!ps.empty() && ps.back().hi > 0.0 && ps.back().v_hi != b.right_value())
    total += std::abs(b.right_value() - ps.back().v_hi) * arc(ps.back().hi);
  total *= amp;
  if (clipped) {
    const double R = f.support_radius();
    *clipped = !(domain[0].lo < -R && domain[0].hi > R && domain[1].lo < -R && domain[1].hi > R);
  }
  return total;
}

inline double grad_l1_norm(const FunctionSpec& f) { return grad_l1_norm(f, detail::whole_space(f.dimension())); }

/// ||grad u||_{L^q(domain)} for N < q <= inf. +inf when u jumps inside the domain.
inline Extended grad_lq_norm(const FunctionSpec& f, double q, const Box& domain, bool* clipped = nullptr) {
  detail::check_box(f, domain);
  if (!(q > f.dimension())) throw DomainError("grad_lq_norm requires q > N");
  const bool sup = std::isinf(q);
  if (clipped) *clipped = false;
  if (f.is_constant()) return Extended(0.0);
  if (f.dimension() == 1) {
    const double lo = domain[0].lo, hi = domain[0].hi;
    const Interval v = f.variation_interval();
    if (clipped) *clipped = !(lo <= v.lo && v.hi <= hi);
    double acc = 0.0;
    if (!f.pieces_available()) {
      // staircase: constant slope on ramps; only the full [0,1] window is cheap
      const auto& sc = std::get<family::Staircase>(f.family());
      if (!(lo <= v.lo && v.hi <= hi)) throw DomainError("staircase L^q norm over a partial window needs piece structure");
      const double slope = f.lipschitz();
      if (sup) return Extended(slope);
      const double len = std::pow(static_cast<double>(sc.k), sc.j) * std::pow(sc.k, -static_cast<double>(sc.j) / sc.alpha) / f.transform().scale;
      return Extended(std::pow(std::pow(slope, q) * len, 1.0 / q));
    }
    const auto& ps = f.pieces();
    auto inside = [&](double x) { return x > lo && x < hi; };
    if (inside(ps.front().lo) && ps.front().v_lo != f.left_value()) return Extended::infinity();
    if (inside(ps.back().hi) && ps.back().v_hi != f.right_value()) return Extended::infinity();
    for (std::size_t i = 0; i + 1 < ps.size(); ++i)
      if (inside(ps[i].hi) && ps[i].v_hi != ps[i + 1].v_lo) return Extended::infinity();
    for (const Piece& p : ps) {
      const double a = std::max(lo, p.lo), b = std::min(hi, p.hi);
      if (!(b > a) || p.shape == PieceShape::flat) continue;
      if (p.shape == PieceShape::affine) {
        const double slope = std::abs((p.v_hi - p.v_lo) / (p.hi - p.lo));
        acc = sup ? std::max(acc, slope) : acc + std::pow(slope, q) * (b - a);
      } else if (sup) {
        acc = std::max(acc, detail::maximize([&](double x) { return std::abs(f.derivative(x)); }, a, b));
      } else {
        acc += detail::integrate([&](double x) { return std::pow(std::abs(f.derivative(x)), q); }, a, b);
      }
    }
    return Extended(sup ? acc : std::pow(acc, 1.0 / q));
  }
  const FunctionSpec& b = f.radial_base();
  const double s = f.transform().scale, amp = std::abs(f.transform().amplitude);
  const auto& ps = b.pieces();
  auto arc = [&](double r) { return detail::arc_inside_box(r / s, domain); };
  double acc = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Piece& p = ps[i];
    const double prev = i == 0 ? b.left_value() : ps[i - 1].v_hi;
    if (p.lo > 0.0 && prev != p.v_lo && arc(p.lo) > 0.0) return Extended::infinity();
    const double a = std::max(0.0, p.lo);
    if (!(p.hi > a) || p.shape == PieceShape::flat) continue;
    if (sup) {
      acc = std::max(acc, detail::maximize([&](double r) { return arc(r) > 0.0 ? std::abs(b.derivative(r)) : 0.0; }, a, p.hi));
    } else {
      acc += detail::integrate([&](double r) { return std::pow(std::abs(b.derivative(r)), q) * arc(r); }, a, p.hi) / s;
    }
  }
  if (!ps.empty() && ps.back().hi > 0.0 && ps.back().v_hi != b.right_value() && arc(ps.back().hi) > 0.0)
    return Extended::infinity();
  if (clipped) {
    const double R = f.support_radius();
    *clipped = !(domain[0].lo <= -R && domain[0].hi >= R && domain[1].lo <= -R && domain[1].hi >= R);
  }
  // |grad v| = amp * s * |u'(s r)|
  return Extended(sup ? amp * s * acc : amp * s * std::pow(acc, 1.0 / q));
}

inline Extended grad_lq_norm(const FunctionSpec& f, double q) {
  return grad_lq_norm(f, q, detail::whole_space(f.dimension()));
}

/// The self-similar staircase of depth j with k ramps per level.
inline FunctionSpec build_staircase(int j, int k, double alpha, double placement = 0.0) {
  if (j < 0 || k < 2 || !(alpha > 0.0 && alpha < 1.0)) throw DomainError("staircase requires j >= 0, k >= 2, 0 < alpha < 1");
  if (std::pow(static_cast<double>(k), 1.0 - 1.0 / alpha) > 1.0) throw DomainError("staircase infeasible for these (k, alpha)");
  return FunctionSpec::staircase(j, k, alpha, placement);
}

// ---------------------------------------------------------------------------
// Canonical text form, e.g. "hat(0,1)", "staircase(3,4,0.5,0)|amp=2,shift=0,scale=1".

std::string to_string(const FunctionSpec& f);
FunctionSpec parse_function_spec(std::string_view text);

namespace detail {

inline std::string num(double v) { return format_double(v); }

inline std::string family_text(const Family& fam) {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, family::Constant>) {
          return "constant(" + num(f.value) + ")";
        } else if constexpr (std::is_same_v<T, family::Indicator>) {
          return "indicator(" + num(f.a) + "," + num(f.b) + ")";
        } else if constexpr (std::is_same_v<T, family::Hat>) {
          return "hat(" + num(f.center) + "," + num(f.halfwidth) + ")";
        } else if constexpr (std::is_same_v<T, family::SmoothedStep>) {
          return "smoothed_step(" + std::to_string(f.k) + "," + std::to_string(f.profile) + ")";
        } else if constexpr (std::is_same_v<T, family::Staircase>) {
          return "staircase(" + std::to_string(f.j) + "," + std::to_string(f.k) + "," + num(f.alpha) + "," +
                 num(f.placement) + ")";
        } else if constexpr (std::is_same_v<T, family::SineBump>) {
          return "sine_bump(" + std::to_string(f.m) + ")";
        } else if constexpr (std::is_same_v<T, family::PiecewiseLinear>) {
          std::string s = "pwl(";
          for (std::size_t i = 0; i < f.knots.size(); ++i) {
            if (i) s += ";";
            s += num(f.knots[i].x) + ":" + num(f.knots[i].y);
          }
          return s + ")";
        } else {
          return "radial(" + to_string(*f.base) + "," + std::to_string(f.dimension) + ")";
        }
      },
      fam);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline double parse_num(std::string_view s, std::string_view what) {
  s = trim(s);
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) throw DomainError("bad number '" + tmp + "' in " + std::string(what));
  return v;
}

inline int parse_int(std::string_view s, std::string_view what) {
  const double v = parse_num(s, what);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw DomainError("expected an integer in " + std::string(what));
  return static_cast<int>(v);
}

// Split on `sep` at parenthesis depth zero.
inline std::vector<std::string_view> split_top(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    else if (s[i] == ')') --depth;
    else if (s[i] == sep && depth == 0) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(s.substr(start));
  return out;
}

}  // namespace detail

inline std::string to_string(const FunctionSpec& f) {
  std::string s = detail::family_text(f.family());
  const Transform& t = f.transform();
  if (!t.identity())
    s += "|amp=" + detail::num(t.amplitude) + ",shift=" + detail::num(t.shift) + ",scale=" + detail::num(t.scale);
  return s;
}

inline FunctionSpec parse_function_spec(std::string_view text) {
  using detail::parse_int;
  using detail::parse_num;
  const std::string whole(text);
  auto parts = detail::split_top(detail::trim(text), '|');
  if (parts.size() > 2) throw DomainError("function spec has more than one transform suffix: " + whole);
  const std::string_view head = detail::trim(parts[0]);
  const auto open = head.find('(');
  if (open == std::string_view::npos || head.back() != ')') throw DomainError("malformed function spec: " + whole);
  const std::string name(detail::trim(head.substr(0, open)));
  const std::string_view body = head.substr(open + 1, head.size() - open - 2);
  auto args = detail::split_top(body, ',');
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi)
      throw DomainError("wrong number of arguments to " + name + " in: " + whole);
  };
  Family fam;
  if (name == "constant" || name == "const") {
    need(1, 1);
    fam = family::Constant{parse_num(args[0], name)};
  } else if (name == "indicator") {
    need(2, 2);
    fam = family::Indicator{parse_num(args[0], name), parse_num(args[1], name)};
  } else if (name == "hat") {
    need(2, 2);
    fam = family::Hat{parse_num(args[0], name), parse_num(args[1], name)};
  } else if (name == "smoothed_step") {
    need(1, 2);
    fam = family::SmoothedStep{parse_int(args[0], name), args.size() > 1 ? parse_int(args[1], name) : 0};
  } else if (name == "staircase") {
    need(3, 4);
    fam = family::Staircase{parse_int(args[0], name), parse_int(args[1], name), parse_num(args[2], name),
                            args.size() > 3 ? parse_num(args[3], name) : 0.0};
  } else if (name == "sine_bump") {
    need(1, 1);
    fam = family::SineBump{parse_int(args[0], name)};
  } else if (name == "pwl") {
    need(1, 1);
    family::PiecewiseLinear pl;
    for (auto kn : detail::split_top(body, ';')) {
      const auto colon = kn.find(':');
      if (colon == std::string_view::npos) throw DomainError("pwl knots must be x:y pairs in: " + whole);
      pl.knots.push_back({parse_num(kn.substr(0, colon), name), parse_num(kn.substr(colon + 1), name)});
    }
    fam = std::move(pl);
  } else if (name == "radial") {
    need(2, 2);
    fam = family::RadialExtension{std::make_shared<const FunctionSpec>(parse_function_spec(args[0])),
                                  parse_int(args[1], name)};
  } else {
    throw DomainError("unknown function family '" + name + "'");
  }
  Transform t;
  if (parts.size() == 2) {
    for (auto kv : detail::split_top(parts[1], ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) throw DomainError("transform entries must be key=value in: " + whole);
      const std::string key(detail::trim(kv.substr(0, eq)));
      const double v = parse_num(kv.substr(eq + 1), key);
      if (key == "amp") t.amplitude = v;
      else if (key == "shift") t.shift = v;
      else if (key == "scale") t.scale = v;
      else throw DomainError("unknown transform key '" + key + "'");
    }
  }
  return FunctionSpec(std::move(fam), t);
}

}  // namespace qlab
