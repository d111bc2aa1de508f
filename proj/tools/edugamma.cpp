// edugamma: batch CLI for fitting and aggregating schooling distributions.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edugamma/commands.hpp"

namespace cli = edugamma::cli;

int main(int argc, char** argv) {
  CLI::App app{"Fit generalized gamma distributions of schooling years and summarize inequality"};
  app.require_subcommand(1);

  std::string config;
  unsigned threads = 0;
  app.add_option("--config", config, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "worker threads for fit (overrides EDUGAMMA_THREADS)")
      ->check(CLI::PositiveNumber);

  auto settings = [&] {
    return cli::resolve_settings(config.empty() ? std::nullopt : std::optional<std::string>(config),
                                 threads > 0 ? std::optional<unsigned>(threads) : std::nullopt);
  };
  // Reject a malformed config or thread setting for every subcommand, not only those that use it.
  app.parse_complete_callback([&] { (void)settings(); });
  auto opt_path = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };

  int code = 0;

  // fit
  std::string fit_in, fit_out, fit_report;
  auto* fit = app.add_subcommand("fit", "fit one GG distribution per attainment cell");
  fit->add_option("input", fit_in, "attainment CSV")->required();
  fit->add_option("-o,--output", fit_out, "results CSV")->required();
  fit->add_option("--report", fit_report, "row error report (default <output>.errors.csv)");
  fit->callback([&] {
    code = cli::cmd_fit({fit_in, fit_out, opt_path(fit_report), settings()}, std::cout, std::cerr);
  });

  // gof
  std::string gof_in, gof_out, gof_by = "year_sex";
  auto* gof = app.add_subcommand("gof", "quartiles of residual sum of squares");
  gof->add_option("results", gof_in, "results CSV")->required();
  gof->add_option("--by", gof_by, "grouping")->check(CLI::IsMember({"year_sex", "year", "sex"}));
  gof->add_option("-o,--output", gof_out, "output CSV (default stdout)");
  gof->callback([&] {
    const auto by = gof_by == "year" ? cli::GofGrouping::year
                    : gof_by == "sex" ? cli::GofGrouping::sex
                                      : cli::GofGrouping::year_sex;
    code = cli::cmd_gof(gof_in, by, opt_path(gof_out), std::cout, std::cerr);
  });

  // aggregate
  cli::AggregateOptions agg;
  std::string agg_out;
  auto* aggregate = app.add_subcommand("aggregate", "regional MYS, Gini and GE between/within decomposition");
  aggregate->add_option("results", agg.results, "results CSV")->required();
  aggregate->add_option("groups", agg.groups, "groups CSV (cell_id,group_id,<weight column>)")->required();
  aggregate->add_option("--weight-column", agg.weight_column, "population weight column");
  aggregate->add_option("--theta", agg.thetas, "GE parameters")->delimiter(',');
  aggregate->add_option("-o,--output", agg_out, "output CSV (default stdout)");
  aggregate->callback([&] {
    agg.output = opt_path(agg_out);
    code = cli::cmd_aggregate(agg, std::cout, std::cerr);
  });

  // curves
  cli::CurvesOptions cur;
  std::string cur_groups, cur_dom;
  auto* curves = app.add_subcommand("curves", "mixture CDF/PDF grids and dominance report");
  curves->add_option("results", cur.results, "results CSV")->required();
  curves->add_option("--groups", cur_groups, "groups CSV; without it every cell is drawn");
  curves->add_option("--weight-column", cur.weight_column, "population weight column");
  curves->add_option("-o,--output", cur.output, "curve grid CSV")->required();
  curves->add_option("--dominance", cur_dom, "dominance report (default <output>.dominance.csv)");
  curves->callback([&] {
    cur.groups = opt_path(cur_groups);
    cur.dominance_output = opt_path(cur_dom);
    cur.settings = settings();
    code = cli::cmd_curves(cur, std::cout, std::cerr);
  });

  // lorenz
  cli::LorenzOptions lor;
  std::string lor_groups;
  auto* lorenz = app.add_subcommand("lorenz", "Lorenz curve grids for cells or groups");
  lorenz->add_option("results", lor.results, "results CSV")->required();
  lorenz->add_option("--groups", lor_groups, "groups CSV; without it every cell is drawn");
  lorenz->add_option("--weight-column", lor.weight_column, "population weight column");
  lorenz->add_option("-o,--output", lor.output, "Lorenz grid CSV")->required();
  lorenz->callback([&] {
    lor.groups = opt_path(lor_groups);
    lor.settings = settings();
    code = cli::cmd_lorenz(lor, std::cout, std::cerr);
  });

  // join-durations
  std::string join_att, join_dur, join_out;
  auto* join = app.add_subcommand("join-durations", "fill dur_primary/dur_secondary from a durations table");
  join->add_option("attainment", join_att, "attainment CSV")->required();
  join->add_option("durations", join_dur, "durations CSV (country,year,dur_primary,dur_secondary)")->required();
  join->add_option("-o,--output", join_out, "joined attainment CSV")->required();
  join->callback([&] { code = cli::cmd_join_durations(join_att, join_dur, join_out, std::cout, std::cerr); });

  // demo
  std::string demo_dir = ".";
  auto* demo = app.add_subcommand("demo", "write a 24-cell synthetic attainment file and world groups");
  demo->add_option("directory", demo_dir, "output directory");
  demo->callback([&] { code = cli::cmd_demo(demo_dir, std::cout, std::cerr); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kUnusable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUnusable;
  }
  return code;
}
