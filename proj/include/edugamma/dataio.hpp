#pragma once

// CSV ingest and result writers. All files are UTF-8, comma separated, '.'
// decimal separator, LF line endings. Reals are written with 10 significant
// digits.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "edugamma/errors.hpp"
#include "edugamma/fitter.hpp"

namespace edugamma::io {

// ---------------------------------------------------------------------------
// Low-level helpers

inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_real(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Parameters as they survive a write/read cycle.
inline double persisted(double v) { return *parse_real(format_real(v)); }

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Reads a file into lines (CRLF tolerated, trailing empty lines dropped).
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (!lines.empty() && lines.front().rfind("\xEF\xBB\xBF", 0) == 0) lines.front().erase(0, 3);
  return lines;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Column name -> index. Throws ParseError when a required column is missing.
inline std::map<std::string, std::size_t> header_index(const std::string& header,
                                                       const std::vector<std::string>& required,
                                                       const std::string& path) {
  std::map<std::string, std::size_t> idx;
  const auto names = split_fields(header);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!idx.emplace(names[i], i).second) throw ParseError(path + ": duplicate column " + names[i]);
  }
  for (const auto& r : required) {
    if (!idx.count(r)) throw ParseError(path + ": missing column '" + r + "' in header");
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Attainment input

inline const std::vector<std::string>& attainment_columns() {
  static const std::vector<std::string> cols = {
      "country",  "year",     "sex",       "age_group",   "share_ns",     "share_p",
      "share_s",  "share_ti", "share_tc",  "dur_primary", "dur_secondary"};
  return cols;
}

struct RowError {
  std::size_t line = 0;  // 1-based file line, header is line 1
  std::string message;
};

struct Provenance {
  std::string digest;       // FNV-1a of the file bytes
  std::size_t data_rows = 0;
};

struct Dataset {
  std::vector<AttainmentRecord> records;
  std::vector<RowError> errors;
  std::vector<std::string> warnings;
  Provenance provenance;
  bool percent_mode = false;
};

namespace detail {

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool valid_year(int y) { return y >= 1970 && y <= 2010 && (y - 1970) % 5 == 0; }

}  // namespace detail

/// Parses and validates an attainment file. Whole-file problems (missing
/// file, malformed header) throw; row problems are collected in `errors`.
inline Dataset parse_attainment_csv(const std::string& path) {
  Dataset ds;
  ds.provenance.digest = fnv1a_hex(detail::slurp(path));
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file (no header)");
  const auto idx = header_index(lines.front(), attainment_columns(), path);

  static constexpr const char* share_cols[5] = {"share_ns", "share_p", "share_s", "share_ti", "share_tc"};

  struct Pending {
    std::size_t line;
    AttainmentRecord rec;
  };
  std::vector<Pending> pending;
  bool percent = false;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (lines[li].empty()) continue;
    ++ds.provenance.data_rows;
    const auto f = split_fields(lines[li]);
    auto field = [&](const std::string& col) -> const std::string& {
      static const std::string missing;
      const auto i = idx.at(col);
      return i < f.size() ? f[i] : missing;
    };
    auto fail = [&](const std::string& msg) { ds.errors.push_back({line_no, msg}); };

    AttainmentRecord rec;
    rec.key.country = field("country");
    if (rec.key.country.empty()) {
      fail("empty country");
      continue;
    }
    const auto year = parse_int(field("year"));
    if (!year || !detail::valid_year(*year)) {
      fail("year must be one of 1970, 1975, ..., 2010 (got '" + field("year") + "')");
      continue;
    }
    rec.key.year = *year;
    const auto sex = parse_sex(field("sex"));
    if (!sex) {
      fail("sex must be total, male or female (got '" + field("sex") + "')");
      continue;
    }
    rec.key.sex = *sex;
    const auto age = parse_age_group(field("age_group"));
    if (!age) {
      fail("age_group must be 15plus or 25plus (got '" + field("age_group") + "')");
      continue;
    }
    rec.key.age_group = *age;

    std::array<double, 5> shares{};
    bool ok = true;
    for (int j = 0; j < 5; ++j) {
      const auto v = parse_real(field(share_cols[j]));
      if (!v || !std::isfinite(*v)) {
        fail(std::string("unreadable ") + share_cols[j]);
        ok = false;
        break;
      }
      shares[j] = *v;
      if (*v > 1.5) percent = true;
    }
    if (!ok) continue;
    rec.shares = {shares[0], shares[1], shares[2], shares[3], shares[4]};

    const auto dp = parse_real(field("dur_primary"));
    const auto dsec = parse_real(field("dur_secondary"));
    if (!dp || !dsec) {
      fail("unreadable cycle duration");
      continue;
    }
    rec.dur_primary = *dp;
    rec.dur_secondary = *dsec;
    pending.push_back({line_no, rec});
  }

  if (percent) {
    ds.percent_mode = true;
    ds.warnings.push_back(path + ": share values above 1.5 found; reading all shares as percentages");
  }

  std::map<CellKey, std::size_t> seen;
  for (auto& [line_no, rec] : pending) {
    if (percent) {
      rec.shares.no_schooling /= 100.0;
      rec.shares.primary /= 100.0;
      rec.shares.secondary /= 100.0;
      rec.shares.tertiary_incomplete /= 100.0;
      rec.shares.tertiary_complete /= 100.0;
    }
    const auto arr = rec.shares.as_array();
    if (std::any_of(arr.begin(), arr.end(), [](double s) { return s < -1e-6 || s > 1.0 + 1e-6; })) {
      ds.errors.push_back({line_no, "shares must lie in [0, 1]"});
      continue;
    }
    const double total = rec.shares.sum();
    if (std::fabs(total - 1.0) > 1e-3) {
      ds.errors.push_back({line_no, "shares sum to " + format_real(total) + ", outside 1 +/- 1e-3"});
      continue;
    }
    if (!(rec.dur_primary >= kMinDuration && rec.dur_primary <= kMaxDuration) ||
        !(rec.dur_secondary >= kMinDuration && rec.dur_secondary <= kMaxDuration)) {
      ds.errors.push_back({line_no, "cycle durations must lie in [3, 10] years"});
      continue;
    }
    const auto [it, inserted] = seen.emplace(rec.key, line_no);
    if (!inserted) {
      ds.errors.push_back({line_no, "duplicate key " + rec.key.id() + " (rows " +
                                        std::to_string(it->second) + " and " + std::to_string(line_no) + ")"});
      continue;
    }
    ds.records.push_back(rec);
  }
  std::sort(ds.errors.begin(), ds.errors.end(),
            [](const RowError& a, const RowError& b) { return a.line < b.line; });
  return ds;
}

inline std::string attainment_csv_text(const std::vector<AttainmentRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < attainment_columns().size(); ++i) {
    if (i) out += ',';
    out += attainment_columns()[i];
  }
  out += '\n';
  for (const auto& r : records) {
    out += r.key.country + ',' + std::to_string(r.key.year) + ',' + std::string(to_string(r.key.sex)) +
           ',' + std::string(to_string(r.key.age_group));
    for (double s : r.shares.as_array()) out += ',' + format_real(s);
    out += ',' + format_real(r.dur_primary) + ',' + format_real(r.dur_secondary) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results table

struct ResultRow {
  CellKey key;
  double a = 0.0;
  double beta = 0.0;
  double p = 0.0;
  double rss = 0.0;
  bool converged = false;
  FitFlags flags;
  double mys = 0.0;
  double gini = 0.0;
  double mld = 0.0;
  double theil = 0.0;
  double ge2 = 0.0;

  GGParams params() const { return GGParams{a, beta, p}; }
};

/// Builds a row from a fit. Parameters are rounded to their persisted
/// 10-digit form first, so every derived column is reproducible from the
/// written a, beta, p.
inline ResultRow make_result_row(const CellKey& key, const FitResult& fit) {
  ResultRow row;
  row.key = key;
  row.a = persisted(fit.params.a());
  row.beta = persisted(fit.params.beta());
  row.p = persisted(fit.params.p());
  row.rss = fit.rss;
  row.converged = fit.converged;
  row.flags = fit.flags;
  const GGParams g = row.params();
  row.mys = gg::mean(g);
  row.gini = gg::gini(g);
  row.mld = gg::mld(g);
  row.theil = gg::theil(g);
  row.ge2 = gg::ge2(g);
  return row;
}

inline const std::vector<std::string>& results_columns() {
  static const std::vector<std::string> cols = {"country", "year", "sex",   "age_group", "a",
                                                "beta",    "p",    "rss",   "converged", "flags",
                                                "mys",     "gini", "mld",   "theil",     "ge2"};
  return cols;
}

inline std::string results_csv_text(std::vector<ResultRow> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ResultRow& x, const ResultRow& y) { return x.key < y.key; });
  std::string out;
  for (std::size_t i = 0; i < results_columns().size(); ++i) {
    if (i) out += ',';
    out += results_columns()[i];
  }
  out += '\n';
  for (const auto& r : rows) {
    out += r.key.country + ',' + std::to_string(r.key.year) + ',' + std::string(to_string(r.key.sex)) +
           ',' + std::string(to_string(r.key.age_group)) + ',' + format_real(r.a) + ',' +
           format_real(r.beta) + ',' + format_real(r.p) + ',' + format_real(r.rss) + ',' +
           (r.converged ? "1" : "0") + ',' + r.flags.to_string() + ',' + format_real(r.mys) + ',' +
           format_real(r.gini) + ',' + format_real(r.mld) + ',' + format_real(r.theil) + ',' +
           format_real(r.ge2) + '\n';
  }
  return out;
}

inline void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  write_text(path, results_csv_text(rows));
}

inline std::vector<ResultRow> parse_results_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file (no header)");
  const auto idx = header_index(lines.front(), results_columns(), path);
  std::vector<ResultRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = split_fields(lines[li]);
    const std::string where = path + ":" + std::to_string(li + 1) + ": ";
    auto field = [&](const char* col) -> std::string {
      const auto i = idx.at(col);
      if (i >= f.size()) throw ParseError(where + "missing field " + col);
      return f[i];
    };
    auto real = [&](const char* col) {
      const auto v = parse_real(field(col));
      if (!v) throw ParseError(where + "unreadable " + std::string(col));
      return *v;
    };
    ResultRow r;
    r.key.country = field("country");
    const auto year = parse_int(field("year"));
    const auto sex = parse_sex(field("sex"));
    const auto age = parse_age_group(field("age_group"));
    if (!year || !sex || !age) throw ParseError(where + "bad cell key");
    r.key.year = *year;
    r.key.sex = *sex;
    r.key.age_group = *age;
    r.a = real("a");
    r.beta = real("beta");
    r.p = real("p");
    r.rss = real("rss");
    const auto conv = field("converged");
    if (conv != "0" && conv != "1") throw ParseError(where + "converged must be 0 or 1");
    r.converged = conv == "1";
    const auto flags = FitFlags::parse(field("flags"));
    if (!flags) throw ParseError(where + "unknown flag in '" + field("flags") + "'");
    r.flags = *flags;
    r.mys = real("mys");
    r.gini = real("gini");
    r.mld = real("mld");
    r.theil = real("theil");
    r.ge2 = real("ge2");
    if (!GGParams::valid(r.a, r.beta, r.p)) throw ParseError(where + "invalid GG parameters");
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Grids and summaries

/// Mixture (or national) CDF/PDF on a fixed x grid. pdf_singular marks grid
/// points where the density diverges; their pdf field is left empty.
struct CurveSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> cdf;
  std::vector<double> pdf;
  std::vector<bool> pdf_singular;
};

struct LorenzSeries {
  std::string label;
  std::vector<double> u;
  std::vector<double> lorenz;
};

/// Evenly spaced grid with exact end points.
inline std::vector<double> even_grid(double lo, double hi, std::size_t points) {
  if (points < 2) throw DomainError("a grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  g.back() = hi;
  return g;
}

inline std::string curve_grid_text(const std::vector<CurveSeries>& curves) {
  std::string out = "group,x,cdf,pdf,pdf_singular\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      out += c.label + ',' + format_real(c.x[i]) + ',' + format_real(c.cdf[i]) + ',' +
             (c.pdf_singular[i] ? std::string() : format_real(c.pdf[i])) + ',' +
             (c.pdf_singular[i] ? "1" : "0") + '\n';
    }
  }
  return out;
}

inline void write_curve_grid(const std::vector<CurveSeries>& curves, const std::string& path) {
  write_text(path, curve_grid_text(curves));
}

inline std::string lorenz_grid_text(const std::vector<LorenzSeries>& series) {
  std::string out = "group,u,lorenz\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.u.size(); ++i) {
      out += s.label + ',' + format_real(s.u[i]) + ',' + format_real(s.lorenz[i]) + '\n';
    }
  }
  return out;
}

inline void write_lorenz_grid(const std::vector<LorenzSeries>& series, const std::string& path) {
  write_text(path, lorenz_grid_text(series));
}

inline std::string gof_table_text(const std::vector<GofRow>& rows) {
  std::string out = "group,n,q1,median,q3\n";
  for (const auto& r : rows) {
    out += r.group + ',' + std::to_string(r.n) + ',' + format_real(r.q1) + ',' + format_real(r.median) +
           ',' + format_real(r.q3) + '\n';
  }
  return out;
}

inline void write_gof_table(const std::vector<GofRow>& rows, const std::string& path) {
  write_text(path, gof_table_text(rows));
}

// ---------------------------------------------------------------------------
// Grouping and durations files

struct GroupAssignment {
  std::string cell_id;
  std::string group_id;
  double weight = 0.0;
};

/// Grouping file: cell_id,group_id,<weight column>. Extra weight columns
/// (e.g. different population bases) may sit side by side.
inline std::vector<GroupAssignment> parse_groups_csv(const std::string& path,
                                                     const std::string& weight_column = "weight") {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file (no header)");
  const auto idx = header_index(lines.front(), {"cell_id", "group_id", weight_column}, path);
  std::vector<GroupAssignment> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = split_fields(lines[li]);
    const std::string where = path + ":" + std::to_string(li + 1) + ": ";
    const auto get = [&](const std::string& col) {
      const auto i = idx.at(col);
      if (i >= f.size()) throw ParseError(where + "missing field " + col);
      return f[i];
    };
    const auto w = parse_real(get(weight_column));
    if (!w || !(*w >= 0.0) || !std::isfinite(*w)) throw ParseError(where + "weight must be a finite number >= 0");
    out.push_back({get("cell_id"), get("group_id"), *w});
  }
  return out;
}

struct Durations {
  double primary = 0.0;
  double secondary = 0.0;
};

/// UNESCO-style durations file: country,year,dur_primary,dur_secondary.
inline std::map<std::pair<std::string, int>, Durations> parse_durations_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file (no header)");
  const auto idx = header_index(lines.front(), {"country", "year", "dur_primary", "dur_secondary"}, path);
  std::map<std::pair<std::string, int>, Durations> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = split_fields(lines[li]);
    const std::string where = path + ":" + std::to_string(li + 1) + ": ";
    auto get = [&](const char* col) {
      const auto i = idx.at(col);
      if (i >= f.size()) throw ParseError(where + "missing field " + col);
      return f[i];
    };
    const auto year = parse_int(get("year"));
    const auto dp = parse_real(get("dur_primary"));
    const auto dsec = parse_real(get("dur_secondary"));
    if (!year || !dp || !dsec) throw ParseError(where + "unreadable year or duration");
    if (!out.emplace(std::pair{get("country"), *year}, Durations{*dp, *dsec}).second) {
      throw ParseError(where + "duplicate durations for " + get("country") + " " + std::to_string(*year));
    }
  }
  return out;
}

struct JoinReport {
  std::size_t rows = 0;
  std::vector<std::string> unmatched;  // "country year" pairs without durations
};

/// Writes the attainment file with dur_primary/dur_secondary filled in (added
/// or overwritten) from the durations table.
inline JoinReport join_durations(const std::string& attainment_path, const std::string& durations_path,
                                 const std::string& out_path) {
  const auto durations = parse_durations_csv(durations_path);
  const auto lines = read_lines(attainment_path);
  if (lines.empty()) throw ParseError(attainment_path + ": empty file (no header)");
  const std::vector<std::string> key_cols = {"country", "year", "sex", "age_group", "share_ns",
                                             "share_p", "share_s", "share_ti", "share_tc"};
  const auto idx = header_index(lines.front(), key_cols, attainment_path);

  JoinReport rep;
  std::string out;
  for (std::size_t i = 0; i < attainment_columns().size(); ++i) {
    if (i) out += ',';
    out += attainment_columns()[i];
  }
  out += '\n';
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = split_fields(lines[li]);
    auto get = [&](const std::string& col) -> std::string {
      const auto i = idx.at(col);
      return i < f.size() ? f[i] : std::string();
    };
    ++rep.rows;
    const auto year = parse_int(get("year"));
    const auto it = year ? durations.find({get("country"), *year}) : durations.end();
    if (it == durations.end()) {
      rep.unmatched.push_back(get("country") + " " + get("year"));
      continue;
    }
    for (const auto& col : key_cols) out += get(col) + ',';
    out += format_real(it->second.primary) + ',' + format_real(it->second.secondary) + '\n';
  }
  write_text(out_path, out);
  return rep;
}

// ---------------------------------------------------------------------------
// key=value configuration

/// '#' starts a comment; blank lines ignored; later keys override earlier.
inline std::map<std::string, std::string> parse_config(const std::string& path) {
  std::map<std::string, std::string> cfg;
  const auto lines = read_lines(path);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::string line = lines[li];
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(li + 1) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

}  // namespace edugamma::io
