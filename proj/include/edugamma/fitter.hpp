#pragma once

// Grouped, right-censored attainment data -> GG parameters.
//
// A record holds the population shares by highest level attained. Running
// sums of the shares give CDF values at the cumulative cycle durations; the
// complete-tertiary share is only known to sit at or above the last threshold
// and enters the least-squares objective through the survival function.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "edugamma/bfgs.hpp"
#include "edugamma/errors.hpp"
#include "edugamma/gg_model.hpp"
#include "edugamma/specfun.hpp"

namespace edugamma {

enum class Sex { total, male, female };
enum class AgeGroup { age15plus, age25plus };

inline std::string_view to_string(Sex s) {
  switch (s) {
    case Sex::total: return "total";
    case Sex::male: return "male";
    case Sex::female: return "female";
  }
  return "total";
}

inline std::string_view to_string(AgeGroup g) {
  return g == AgeGroup::age15plus ? "15plus" : "25plus";
}

inline std::optional<Sex> parse_sex(std::string_view s) {
  if (s == "total") return Sex::total;
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  return std::nullopt;
}

inline std::optional<AgeGroup> parse_age_group(std::string_view s) {
  if (s == "15plus") return AgeGroup::age15plus;
  if (s == "25plus") return AgeGroup::age25plus;
  return std::nullopt;
}

/// Identifies one country/year/sex/age-group cell.
struct CellKey {
  std::string country;
  int year = 0;
  Sex sex = Sex::total;
  AgeGroup age_group = AgeGroup::age15plus;

  /// "country:year:sex:age_group", the cell_id used by grouping files.
  std::string id() const {
    return country + ":" + std::to_string(year) + ":" + std::string(to_string(sex)) + ":" +
           std::string(to_string(age_group));
  }

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

/// Population shares by highest level attained.
struct CategoryShares {
  double no_schooling = 0.0;
  double primary = 0.0;
  double secondary = 0.0;
  double tertiary_incomplete = 0.0;
  double tertiary_complete = 0.0;

  std::array<double, 5> as_array() const {
    return {no_schooling, primary, secondary, tertiary_incomplete, tertiary_complete};
  }
  double sum() const {
    return no_schooling + primary + secondary + tertiary_incomplete + tertiary_complete;
  }
};

struct AttainmentRecord {
  CellKey key;
  CategoryShares shares;
  double dur_primary = 6.0;    // years
  double dur_secondary = 6.0;  // years
};

inline constexpr double kIlliteracyThreshold = 1.0;  // "less than 1 year of education"
inline constexpr double kTertiaryDuration = 4.0;
inline constexpr double kMinDuration = 3.0;
inline constexpr double kMaxDuration = 10.0;

enum class FitFlag : std::uint8_t {
  degenerate_illiterate = 1,
  degenerate_tertiary = 2,
  renormalized_input = 4,
};

class FitFlags {
 public:
  void set(FitFlag f) { bits_ |= static_cast<std::uint8_t>(f); }
  bool has(FitFlag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::uint8_t bits() const { return bits_; }

  /// '|'-separated flag names, empty string for no flags.
  std::string to_string() const {
    std::string out;
    auto add = [&](FitFlag f, std::string_view name) {
      if (!has(f)) return;
      if (!out.empty()) out += '|';
      out += name;
    };
    add(FitFlag::degenerate_illiterate, "degenerate_illiterate");
    add(FitFlag::degenerate_tertiary, "degenerate_tertiary");
    add(FitFlag::renormalized_input, "renormalized_input");
    return out;
  }

  static std::optional<FitFlags> parse(std::string_view text) {
    FitFlags flags;
    while (!text.empty()) {
      const auto bar = text.find('|');
      const auto name = text.substr(0, bar);
      if (name == "degenerate_illiterate") {
        flags.set(FitFlag::degenerate_illiterate);
      } else if (name == "degenerate_tertiary") {
        flags.set(FitFlag::degenerate_tertiary);
      } else if (name == "renormalized_input") {
        flags.set(FitFlag::renormalized_input);
      } else {
        return std::nullopt;
      }
      if (bar == std::string_view::npos) break;
      text.remove_prefix(bar + 1);
    }
    return flags;
  }

  friend bool operator==(const FitFlags&, const FitFlags&) = default;

 private:
  std::uint8_t bits_ = 0;
};

/// Censor-aware least-squares targets for one cell.
struct FitTargets {
  std::array<double, 4> thresholds{};   // t_NS, t_P, t_S, t_T (cumulative years)
  std::array<double, 4> cdf_targets{};  // F at each threshold
  double surv_target = 0.0;             // mass at >= t_T
  FitFlags flags;
};

struct FitConfig {
  double grid_min = 0.2;
  double grid_max = 20.0;
  double grid_step = 0.2;
  int max_iter = 500;
  double grad_tol = 1e-10;
  double obj_tol = 1e-14;

  /// Grid values of the shape a, built from the index to avoid drift.
  std::vector<double> grid() const {
    if (!(grid_step > 0.0) || !(grid_min > 0.0) || grid_max < grid_min) {
      throw DomainError("invalid shape grid");
    }
    const auto n = static_cast<std::size_t>(std::floor((grid_max - grid_min) / grid_step + 1e-9)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = grid_min + static_cast<double>(i) * grid_step;
    return g;
  }
};

struct FitResult {
  GGParams params;
  double rss = 0.0;
  double grid_a_start = 0.0;
  bool converged = false;
  int n_restarts_tried = 0;
  FitFlags flags;
};

// ---------------------------------------------------------------------------

inline FitTargets build_targets(const AttainmentRecord& record) {
  const double dp = record.dur_primary;
  const double ds = record.dur_secondary;
  if (!(dp >= kMinDuration && dp <= kMaxDuration) || !(ds >= kMinDuration && ds <= kMaxDuration)) {
    throw InvalidRecord("cycle durations must lie in [3, 10] years (" + record.key.id() + ")");
  }

  FitTargets t;
  auto shares = record.shares.as_array();
  for (double& s : shares) {
    if (!std::isfinite(s) || s < -1e-6) {
      throw InvalidRecord("negative or non-finite share in " + record.key.id());
    }
    if (s < 0.0) {
      s = 0.0;
      t.flags.set(FitFlag::renormalized_input);
    }
  }
  double total = 0.0;
  for (double s : shares) total += s;
  if (!(total >= 0.99 && total <= 1.01)) {
    throw InvalidRecord("shares of " + record.key.id() + " sum to " + std::to_string(total));
  }
  if (std::fabs(total - 1.0) > 1e-9) t.flags.set(FitFlag::renormalized_input);
  for (double& s : shares) s /= total;

  t.thresholds = {kIlliteracyThreshold, dp, dp + ds, dp + ds + kTertiaryDuration};
  double running = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    running += shares[j];
    t.cdf_targets[j] = std::min(running, 1.0);
  }
  t.surv_target = shares[4];
  // keep cdf[3] + surv == 1 exactly where rounding allows
  t.cdf_targets[3] = 1.0 - t.surv_target;
  for (std::size_t j = 0; j < 3; ++j) t.cdf_targets[j] = std::min(t.cdf_targets[j], t.cdf_targets[3]);

  if (shares[0] >= 1.0 - 1e-9) t.flags.set(FitFlag::degenerate_illiterate);
  if (shares[4] >= 1.0 - 1e-9) t.flags.set(FitFlag::degenerate_tertiary);
  return t;
}

namespace detail {

// Objective on raw parameters; +inf for anything the model cannot evaluate.
inline double objective_raw(double a, double beta, double p, const FitTargets& t) {
  if (!GGParams::valid(a, beta, p)) return std::numeric_limits<double>::infinity();
  try {
    double sum = 0.0;
    double upper = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      const double y = std::pow(t.thresholds[j] / beta, a);
      if (std::isnan(y)) return std::numeric_limits<double>::infinity();
      const double f = specfun::reg_lower_inc_gamma(p, y);
      const double r = f - t.cdf_targets[j];
      sum += r * r;
      if (j == 3) upper = specfun::reg_upper_inc_gamma(p, y);
    }
    const double r = upper - t.surv_target;
    sum += r * r;
    return std::isfinite(sum) ? sum : std::numeric_limits<double>::infinity();
  } catch (const ConvergenceError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace detail

/// Residual sum of squares: four CDF deviations plus the survival deviation
/// of the right-censored top category.
inline double objective(const GGParams& g, const FitTargets& t) {
  return detail::objective_raw(g.a(), g.beta(), g.p(), t);
}

/// Moment-matched (p0, beta0) for a fixed shape a. X^a ~ Gamma(p, beta^a), so
/// the gamma moment estimates of a pseudo-sample transformed by (.)^a give
/// p0 = m^2/v and beta0 = (v/m)^{1/a}. The pseudo-sample puts each category's
/// mass at its interval midpoint and the censored top category at t_T + 2.
inline std::pair<double, double> moment_start(double a, const FitTargets& t) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("shape a must be positive");
  const auto& th = t.thresholds;
  const std::array<double, 5> points = {0.5 * th[0], 0.5 * (th[0] + th[1]), 0.5 * (th[1] + th[2]),
                                        0.5 * (th[2] + th[3]), th[3] + 2.0};
  const auto& c = t.cdf_targets;
  const std::array<double, 5> mass = {c[0], c[1] - c[0], c[2] - c[1], c[3] - c[2], t.surv_target};

  double wsum = 0.0;
  double m = 0.0;
  std::array<double, 5> y{};
  for (std::size_t i = 0; i < 5; ++i) {
    y[i] = std::pow(points[i], a);
    wsum += mass[i];
    m += mass[i] * y[i];
  }
  m /= wsum;
  double v = 0.0;
  for (std::size_t i = 0; i < 5; ++i) v += mass[i] * (y[i] - m) * (y[i] - m);
  v /= wsum;
  if (v <= 1e-12) return {1.0, std::pow(m, 1.0 / a)};
  return {m * m / v, std::pow(v / m, 1.0 / a)};
}

/// Grid-restarted least squares. Each grid value of a seeds a BFGS run in
/// (ln a, ln beta, ln p); the restart with the smallest objective wins, ties
/// going to the smallest grid value.
inline FitResult grid_fit(const FitTargets& t, const FitConfig& config = {}) {
  optimize::BfgsOptions opt;
  opt.max_iter = config.max_iter;
  opt.grad_tol = config.grad_tol;
  opt.obj_tol = config.obj_tol;

  auto f = [&t](const std::array<double, 3>& theta) {
    return detail::objective_raw(std::exp(theta[0]), std::exp(theta[1]), std::exp(theta[2]), t);
  };

  std::optional<FitResult> best;
  bool any_converged = false;
  int tried = 0;
  for (double a0 : config.grid()) {
    ++tried;
    const auto [p0, beta0] = moment_start(a0, t);
    if (!GGParams::valid(a0, beta0, p0)) continue;
    const auto run = optimize::bfgs_minimize<3>(f, {std::log(a0), std::log(beta0), std::log(p0)}, opt);
    if (!std::isfinite(run.value)) continue;
    const double a = std::exp(run.x[0]);
    const double beta = std::exp(run.x[1]);
    const double p = std::exp(run.x[2]);
    if (!GGParams::valid(a, beta, p)) continue;
    any_converged = any_converged || run.converged;
    if (!best || run.value < best->rss) {
      best = FitResult{GGParams{a, beta, p}, 0.0, a0, run.converged, 0, t.flags};
      // recompute on the stored parameters so rss == objective(params)
      best->rss = objective(best->params, t);
    }
  }
  if (!best) throw FitFailed("every grid restart produced a non-finite objective");
  best->converged = any_converged;
  best->n_restarts_tried = tried;
  return *best;
}

struct RecordError {
  std::size_t index = 0;
  std::string cell_id;
  std::string message;
};

struct BatchFit {
  std::vector<std::optional<FitResult>> results;  // one slot per input record
  std::vector<RecordError> errors;                // ordered by index
};

/// Fits every record. Records are independent, so `threads` workers pull
/// indices from a shared counter and write into their own result slot.
inline BatchFit fit_all(std::span<const AttainmentRecord> records, const FitConfig& config = {},
                        unsigned threads = 1) {
  BatchFit out;
  out.results.resize(records.size());
  std::vector<std::optional<std::string>> failures(records.size());

  auto work = [&](std::size_t i) {
    try {
      out.results[i] = grid_fit(build_targets(records[i]), config);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1 || records.size() < 2) {
    for (std::size_t i = 0; i < records.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(threads, records.size());
    for (std::size_t w = 0; w < n; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < records.size(); i = next++) work(i);
      });
    }
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (failures[i]) out.errors.push_back({i, records[i].key.id(), *failures[i]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Goodness of fit

/// Sample quantile, linear interpolation between order statistics (type 7).
inline double quantile_type7(std::vector<double> values, double prob) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct GofRow {
  std::string group;
  std::size_t n = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// RSS quartiles per group. Groups come out in key order.
inline std::vector<GofRow> gof_quartiles(std::span<const std::pair<std::string, double>> keyed_rss) {
  if (keyed_rss.empty()) throw DomainError("goodness-of-fit summary needs at least one result");
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [key, rss] : keyed_rss) groups[key].push_back(rss);
  std::vector<GofRow> rows;
  for (const auto& [key, values] : groups) {
    if (values.empty()) throw DomainError("empty goodness-of-fit group " + key);
    rows.push_back({key, values.size(), quantile_type7(values, 0.25), quantile_type7(values, 0.5),
                    quantile_type7(values, 0.75)});
  }
  return rows;
}

/// Default goodness-of-fit grouping key: "year:sex".
inline std::string year_sex_key(const CellKey& key) {
  return std::to_string(key.year) + ":" + std::string(to_string(key.sex));
}

}  // namespace edugamma
