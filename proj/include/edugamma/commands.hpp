#pragma once

// Batch commands behind the edugamma CLI: fit, gof, aggregate, curves,
// lorenz, join-durations, demo. Each returns a process exit code and writes
// diagnostics to the given streams.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "edugamma/dataio.hpp"
#include "edugamma/fitter.hpp"
#include "edugamma/gg_model.hpp"
#include "edugamma/mixture.hpp"

namespace edugamma::cli {

enum ExitCode : int { kOk = 0, kPartial = 1, kUnusable = 2 };

struct Settings {
  FitConfig fit;
  unsigned threads = 1;
  double curve_x_max = 25.0;
  std::size_t curve_points = 401;
  std::size_t lorenz_points = 1001;
  std::size_t dominance_points = 2001;
};

/// Applies key=value overrides. Unknown keys are an error.
inline void apply_config(Settings& s, const std::map<std::string, std::string>& cfg) {
  for (const auto& [key, value] : cfg) {
    const auto num = io::parse_real(value);
    if (!num) throw ParseError("config key '" + key + "' needs a numeric value, got '" + value + "'");
    const double v = *num;
    auto count = [&] {
      if (!(v >= 1.0) || v != std::floor(v)) throw ParseError("config key '" + key + "' needs a positive integer");
      return static_cast<std::size_t>(v);
    };
    if (key == "grid_min") s.fit.grid_min = v;
    else if (key == "grid_max") s.fit.grid_max = v;
    else if (key == "grid_step") s.fit.grid_step = v;
    else if (key == "max_iter") s.fit.max_iter = static_cast<int>(count());
    else if (key == "grad_tol") s.fit.grad_tol = v;
    else if (key == "obj_tol") s.fit.obj_tol = v;
    else if (key == "threads") s.threads = static_cast<unsigned>(count());
    else if (key == "curve_x_max") s.curve_x_max = v;
    else if (key == "curve_points") s.curve_points = count();
    else if (key == "lorenz_points") s.lorenz_points = count();
    else if (key == "dominance_points") s.dominance_points = count();
    else throw ParseError("unknown config key '" + key + "'");
  }
}

/// EDUGAMMA_THREADS, when set, must be an integer >= 1.
inline std::optional<unsigned> threads_from_env() {
  const char* raw = std::getenv("EDUGAMMA_THREADS");
  if (!raw || !*raw) return std::nullopt;
  const auto v = io::parse_int(raw);
  if (!v || *v < 1) throw ParseError(std::string("EDUGAMMA_THREADS must be an integer >= 1, got '") + raw + "'");
  return static_cast<unsigned>(*v);
}

/// Defaults < config file < EDUGAMMA_THREADS < explicit thread flag.
inline Settings resolve_settings(const std::optional<std::string>& config_path,
                                 std::optional<unsigned> thread_flag) {
  Settings s;
  if (config_path) apply_config(s, io::parse_config(*config_path));
  if (const auto env = threads_from_env()) s.threads = *env;
  if (thread_flag) s.threads = std::max(1u, *thread_flag);
  return s;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  std::string input;
  std::string output;
  std::optional<std::string> report;  // defaults to <output>.errors.csv
  Settings settings;
};

inline int cmd_fit(const FitOptions& opt, std::ostream& out, std::ostream& err) {
  io::Dataset ds;
  try {
    ds = io::parse_attainment_csv(opt.input);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnusable;
  }
  for (const auto& w : ds.warnings) err << "warning: " << w << '\n';

  const std::string report_path = opt.report.value_or(opt.output + ".errors.csv");
  auto write_report = [&](const std::vector<std::string>& lines) {
    std::string text = "line,cell_id,message\n";
    for (const auto& l : lines) text += l + '\n';
    io::write_text(report_path, text);
  };
  auto sanitize = [](std::string s) {
    for (char& c : s) {
      if (c == ',' || c == '\n') c = ';';
    }
    return s;
  };

  std::vector<std::string> problems;
  for (const auto& e : ds.errors) problems.push_back(std::to_string(e.line) + ",," + sanitize(e.message));

  if (ds.records.empty()) {
    if (ds.provenance.data_rows == 0) {
      err << "error: " << opt.input << " has no data rows\n";
    } else {
      err << "error: every row of " << opt.input << " failed validation; see " << report_path << '\n';
      write_report(problems);
    }
    return kUnusable;
  }

  const auto batch = fit_all(ds.records, opt.settings.fit, opt.settings.threads);
  std::vector<io::ResultRow> rows;
  std::vector<std::pair<std::string, double>> all_rss;
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (!batch.results[i]) continue;
    rows.push_back(io::make_result_row(ds.records[i].key, *batch.results[i]));
    all_rss.emplace_back("all", batch.results[i]->rss);
    if (!batch.results[i]->flags.empty()) ++flagged;
  }
  for (const auto& e : batch.errors) problems.push_back("," + e.cell_id + "," + sanitize(e.message));

  try {
    io::write_results_csv(rows, opt.output);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnusable;
  }

  out << "fitted " << rows.size() << " of " << ds.provenance.data_rows << " rows, " << flagged
      << " flagged\n";
  if (!all_rss.empty()) {
    const auto q = gof_quartiles(all_rss).front();
    out << "rss quartiles: q1=" << io::format_real(q.q1) << " median=" << io::format_real(q.median)
        << " q3=" << io::format_real(q.q3) << '\n';
  }
  if (rows.empty()) {
    write_report(problems);
    return kUnusable;
  }
  if (!problems.empty()) {
    write_report(problems);
    err << problems.size() << " row(s) rejected; see " << report_path << '\n';
    return kPartial;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// gof

enum class GofGrouping { year_sex, year, sex };

inline int cmd_gof(const std::string& results_path, GofGrouping by, const std::optional<std::string>& output,
                   std::ostream& out, std::ostream& err) {
  try {
    const auto rows = io::parse_results_csv(results_path);
    if (rows.empty()) {
      err << "error: " << results_path << " has no result rows\n";
      return kUnusable;
    }
    std::vector<std::pair<std::string, double>> keyed;
    for (const auto& r : rows) {
      std::string key;
      switch (by) {
        case GofGrouping::year_sex: key = year_sex_key(r.key); break;
        case GofGrouping::year: key = std::to_string(r.key.year); break;
        case GofGrouping::sex: key = std::string(to_string(r.key.sex)); break;
      }
      keyed.emplace_back(key, r.rss);
    }
    const auto table = gof_quartiles(keyed);
    if (output) {
      io::write_gof_table(table, *output);
    } else {
      out << io::gof_table_text(table);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnusable;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Region assembly shared by aggregate / curves / lorenz

/// group_id -> Region, groups in sorted order.
inline std::map<std::string, Region> build_regions(const std::vector<io::ResultRow>& results,
                                                   const std::vector<io::GroupAssignment>& groups) {
  std::map<std::string, io::ResultRow> by_cell;
  for (const auto& r : results) by_cell.emplace(r.key.id(), r);
  std::map<std::string, std::vector<Region::Input>> members;
  for (const auto& g : groups) {
    const auto it = by_cell.find(g.cell_id);
    if (it == by_cell.end()) throw ParseError("group " + g.group_id + " references unknown cell " + g.cell_id);
    members[g.group_id].push_back({g.cell_id, it->second.params(), g.weight});
  }
  std::map<std::string, Region> regions;
  for (const auto& [id, inputs] : members) regions.emplace(id, Region(inputs));
  return regions;
}

/// Every result row as its own single-member region, keyed by cell_id.
inline std::map<std::string, Region> cell_regions(const std::vector<io::ResultRow>& results) {
  std::map<std::string, Region> regions;
  for (const auto& r : results) {
    regions.emplace(r.key.id(), Region({{r.key.id(), r.params(), 1.0}}));
  }
  return regions;
}

// ---------------------------------------------------------------------------
// aggregate

struct AggregateOptions {
  std::string results;
  std::string groups;
  std::string weight_column = "weight";
  std::vector<double> thetas = {0.0, 1.0, 2.0};
  std::optional<std::string> output;
};

inline std::string aggregate_text(const std::map<std::string, Region>& regions, const std::vector<double>& thetas) {
  std::string text = "group_id,n_members,mys,gini,theta,total,between,within\n";
  for (const auto& [id, region] : regions) {
    const std::string head = id + ',' + std::to_string(region.size()) + ',' + io::format_real(mixture_mean(region)) +
                             ',' + io::format_real(mixture_gini(region)) + ',';
    for (double theta : thetas) {
      const auto d = ge_decompose(region, theta);
      text += head + io::format_real(theta) + ',' + io::format_real(d.total) + ',' + io::format_real(d.between) +
              ',' + io::format_real(d.within) + '\n';
    }
  }
  return text;
}

inline int cmd_aggregate(const AggregateOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto regions =
        build_regions(io::parse_results_csv(opt.results), io::parse_groups_csv(opt.groups, opt.weight_column));
    if (regions.empty()) {
      err << "error: " << opt.groups << " defines no groups\n";
      return kUnusable;
    }
    const auto text = aggregate_text(regions, opt.thetas);
    if (opt.output) {
      io::write_text(*opt.output, text);
    } else {
      out << text;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnusable;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// curves

struct CurvesOptions {
  std::string results;
  std::optional<std::string> groups;
  std::string weight_column = "weight";
  std::string output;
  std::optional<std::string> dominance_output;  // defaults to <output>.dominance.csv
  Settings settings;
};

inline io::CurveSeries curve_series(const std::string& label, const Region& region, const std::vector<double>& xs) {
  io::CurveSeries c;
  c.label = label;
  c.x = xs;
  for (double x : xs) {
    c.cdf.push_back(mixture_cdf(region, x));
    const bool singular = mixture_density_singular_at(region, x);
    c.pdf_singular.push_back(singular);
    c.pdf.push_back(singular ? 0.0 : mixture_pdf(region, x));
  }
  return c;
}

/// For every ordered pair of groups (earlier id, later id): does the later
/// group first-order dominate the earlier one?
inline std::string dominance_text(const std::map<std::string, Region>& regions, double x_max, std::size_t points) {
  std::string text = "group_earlier,group_later,later_dominates,max_violation,worst_x\n";
  for (auto i = regions.begin(); i != regions.end(); ++i) {
    for (auto j = std::next(i); j != regions.end(); ++j) {
      const auto rep = first_order_dominance(j->second, i->second, x_max, points);
      text += i->first + ',' + j->first + ',' + (rep.dominates ? "1" : "0") + ',' +
              io::format_real(rep.max_violation) + ',' + io::format_real(rep.worst_x) + '\n';
    }
  }
  return text;
}

inline int cmd_curves(const CurvesOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto results = io::parse_results_csv(opt.results);
    const auto regions = opt.groups ? build_regions(results, io::parse_groups_csv(*opt.groups, opt.weight_column))
                                    : cell_regions(results);
    if (regions.empty()) {
      err << "error: nothing to draw\n";
      return kUnusable;
    }
    const auto xs = io::even_grid(0.0, opt.settings.curve_x_max, opt.settings.curve_points);
    std::vector<io::CurveSeries> curves;
    for (const auto& [id, region] : regions) curves.push_back(curve_series(id, region, xs));
    io::write_curve_grid(curves, opt.output);
    io::write_text(opt.dominance_output.value_or(opt.output + ".dominance.csv"),
                   dominance_text(regions, opt.settings.curve_x_max, opt.settings.dominance_points));
    out << "wrote " << curves.size() << " curve(s) on " << xs.size() << " points\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnusable;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// lorenz

struct LorenzOptions {
  std::string results;
  std::optional<std::string> groups;
  std::string weight_column = "weight";
  std::string output;
  Settings settings;
};

inline int cmd_lorenz(const LorenzOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto results = io::parse_results_csv(opt.results);
    const auto regions = opt.groups ? build_regions(results, io::parse_groups_csv(*opt.groups, opt.weight_column))
                                    : cell_regions(results);
    if (regions.empty()) {
      err << "error: nothing to draw\n";
      return kUnusable;
    }
    const auto us = io::even_grid(0.0, 1.0, opt.settings.lorenz_points);
    std::vector<io::LorenzSeries> series;
    for (const auto& [id, region] : regions) {
      io::LorenzSeries s{id, us, {}};
      for (double u : us) s.lorenz.push_back(mixture_lorenz(region, u));
      series.push_back(std::move(s));
    }
    io::write_lorenz_grid(series, opt.output);
    out << "wrote " << series.size() << " Lorenz curve(s) on " << us.size() << " points\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnusable;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// join-durations

inline int cmd_join_durations(const std::string& attainment, const std::string& durations, const std::string& output,
                              std::ostream& out, std::ostream& err) {
  try {
    const auto rep = io::join_durations(attainment, durations, output);
    out << "joined " << rep.rows - rep.unmatched.size() << " of " << rep.rows << " rows\n";
    for (const auto& u : rep.unmatched) err << "no durations for " << u << '\n';
    if (rep.rows == 0 || rep.unmatched.size() == rep.rows) return kUnusable;
    return rep.unmatched.empty() ? kOk : kPartial;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnusable;
  }
}

// ---------------------------------------------------------------------------
// demo

struct DemoCell {
  const char* country;
  int year;
  Sex sex;
  double a, beta, p;
};

struct DemoCountry {
  const char* name;
  double dur_primary;
  double dur_secondary;
  double population;  // millions, used as mixture weight
};

inline constexpr DemoCountry kDemoCountries[] = {
    {"ALP", 6, 6, 30}, {"BOR", 5, 7, 50}, {"CEN", 6, 5, 15}, {"DEL", 4, 8, 80}};

// Known generating parameters; ALP 1970 male is exponential with beta = 5.
inline constexpr DemoCell kDemoCells[] = {
    {"ALP", 1970, Sex::male, 1.0, 5.0, 1.0},   {"ALP", 1970, Sex::female, 1.0, 4.0, 1.0},
    {"ALP", 1990, Sex::male, 1.5, 7.0, 1.2},   {"ALP", 1990, Sex::female, 1.4, 6.5, 1.1},
    {"ALP", 2010, Sex::male, 2.2, 9.0, 1.3},   {"ALP", 2010, Sex::female, 2.3, 9.5, 1.2},
    {"BOR", 1970, Sex::male, 1.0, 2.5, 1.5},   {"BOR", 1970, Sex::female, 0.9, 2.2, 1.4},
    {"BOR", 1990, Sex::male, 1.2, 5.0, 1.6},   {"BOR", 1990, Sex::female, 1.1, 4.5, 1.5},
    {"BOR", 2010, Sex::male, 1.8, 7.0, 1.8},   {"BOR", 2010, Sex::female, 1.7, 7.0, 1.7},
    {"CEN", 1970, Sex::male, 2.0, 6.0, 0.8},   {"CEN", 1970, Sex::female, 1.8, 5.0, 0.7},
    {"CEN", 1990, Sex::male, 2.8, 8.0, 1.0},   {"CEN", 1990, Sex::female, 2.6, 7.5, 0.9},
    {"CEN", 2010, Sex::male, 3.5, 10.0, 1.1},  {"CEN", 2010, Sex::female, 3.6, 10.5, 1.0},
    {"DEL", 1970, Sex::male, 0.9, 1.5, 2.0},   {"DEL", 1970, Sex::female, 0.85, 1.2, 1.8},
    {"DEL", 1990, Sex::male, 1.2, 3.5, 1.8},   {"DEL", 1990, Sex::female, 1.1, 3.0, 1.8},
    {"DEL", 2010, Sex::male, 1.3, 5.0, 2.5},   {"DEL", 2010, Sex::female, 1.2, 4.8, 2.4},
};

/// Category shares implied by a GG distribution at the cumulative thresholds.
inline CategoryShares shares_from_params(const GGParams& g, double dur_primary, double dur_secondary) {
  const double t_s = dur_primary + dur_secondary;
  const double f_ns = gg::cdf(g, kIlliteracyThreshold);
  const double f_p = gg::cdf(g, dur_primary);
  const double f_s = gg::cdf(g, t_s);
  const double f_t = gg::cdf(g, t_s + kTertiaryDuration);
  return {f_ns, f_p - f_ns, f_s - f_p, f_t - f_s, gg::survival(g, t_s + kTertiaryDuration)};
}

inline std::vector<AttainmentRecord> demo_records() {
  std::vector<AttainmentRecord> recs;
  for (const auto& c : kDemoCells) {
    const DemoCountry* country = nullptr;
    for (const auto& dc : kDemoCountries) {
      if (std::string_view(dc.name) == c.country) country = &dc;
    }
    AttainmentRecord r;
    r.key = {c.country, c.year, c.sex, AgeGroup::age15plus};
    r.dur_primary = country->dur_primary;
    r.dur_secondary = country->dur_secondary;
    r.shares = shares_from_params(GGParams{c.a, c.beta, c.p}, r.dur_primary, r.dur_secondary);
    recs.push_back(r);
  }
  return recs;
}

/// One world group per year; each sex carries half the country population.
inline std::string demo_groups_text() {
  std::string text = "cell_id,group_id,weight\n";
  for (const auto& c : kDemoCells) {
    double pop = 0.0;
    for (const auto& dc : kDemoCountries) {
      if (std::string_view(dc.name) == c.country) pop = dc.population;
    }
    const CellKey key{c.country, c.year, c.sex, AgeGroup::age15plus};
    text += key.id() + ",world:" + std::to_string(c.year) + ',' + io::format_real(0.5 * pop) + '\n';
  }
  return text;
}

inline int cmd_demo(const std::string& directory, std::ostream& out, std::ostream& err) {
  try {
    std::filesystem::create_directories(directory);
    const auto base = std::filesystem::path(directory);
    io::write_text((base / "demo_attainment.csv").string(), io::attainment_csv_text(demo_records()));
    io::write_text((base / "demo_groups.csv").string(), demo_groups_text());
    out << "wrote " << (base / "demo_attainment.csv").string() << " and " << (base / "demo_groups.csv").string()
        << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnusable;
  }
  return kOk;
}

}  // namespace edugamma::cli
