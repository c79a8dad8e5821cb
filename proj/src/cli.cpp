#include "riskmap/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include "riskmap/config.hpp"
#include "riskmap/diagnostics.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/forecast.hpp"
#include "riskmap/io.hpp"
#include "riskmap/simulate.hpp"
#include "riskmap/summary.hpp"

namespace riskmap {
namespace {

namespace fs = std::filesystem;

constexpr const char* kOutputEnv = "RISKMAP_OUTPUT_DIR";

struct Inputs {
  RegionTable regions;
  CountPanel panel;
};

std::string output_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

void ensure_output_dir(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec || !fs::is_directory(c.output_dir)) {
    throw ConfigError("cannot create output directory '" + c.output_dir + "'");
  }
}

Inputs load_inputs(const RunConfig& c, std::ostream& err) {
  for (const std::string* p : {&c.regions, &c.adjacency, &c.counts}) {
    if (!fs::exists(*p)) throw ConfigError("input file '" + *p + "' does not exist");
  }
  MergePlan merge;
  if (!c.merge.empty()) {
    if (!fs::exists(c.merge)) throw ConfigError("merge file '" + c.merge + "' does not exist");
    merge = load_merge(c.merge);
  }
  Inputs in;
  in.regions = load_regions(c.regions, c.adjacency, merge);
  LoadedCounts counts = load_counts(c.counts, c.count_mode, in.regions, merge);
  for (const auto& w : counts.warnings) err << "riskmap: warning: " << w << '\n';
  in.panel = std::move(counts.panel);
  return in;
}

PosteriorSamples load_fit(const RunConfig& c, const ModelContext& ctx) {
  const std::string path = output_path(c, "samples.csv");
  if (!fs::exists(path)) {
    throw ConfigError("samples file '" + path + "' not found; run 'riskmap fit' first");
  }
  PosteriorSamples s = read_samples(path);
  if (s.regions != ctx.regions() || s.days != ctx.days()) {
    throw ConfigError("samples file '" + path + "' does not match the configured data");
  }
  return s;
}

void write_lines(const std::string& path, const std::string& header,
                 const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << header << '\n';
  for (const auto& l : lines) out << l << '\n';
}

std::string join(std::initializer_list<std::string> parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(c, err);
  const ModelContext ctx(in.panel, in.regions, c.model);
  ensure_output_dir(c);
  const PosteriorSamples samples = run_mcmc(ctx, PriorSpec::defaults(), c.mcmc);
  for (const auto& w : samples.warnings) err << "riskmap: warning: " << w << '\n';
  write_samples(output_path(c, "samples.csv"), samples);
  write_summary(output_path(c, "summary.csv"), posterior_summary(samples));
  write_ledger(output_path(c, "acceptance.csv"), samples);
  out << "fit: " << samples.size() << " draws from " << samples.chains << " chain(s) written to "
      << c.output_dir << '\n';
  return kExitOk;
}

int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream&) {
  ScenarioSpec spec;
  spec.regions = grid_regions(c.sim_regions, c.mcmc.seed);
  spec.days = c.sim_days;
  spec.truth = c.truth;
  spec.seed = c.mcmc.seed;
  spec.reference_rate = c.sim_rate;
  spec.bym_convention = c.model.bym_convention;
  const Simulation sim = simulate_panel(spec);
  ensure_output_dir(c);
  write_regions(output_path(c, "regions.csv"), spec.regions);
  write_adjacency(output_path(c, "adjacency.csv"), spec.regions);
  write_counts(output_path(c, "counts.csv"), sim.panel, spec.regions, c.count_mode);
  write_truth(output_path(c, "truth.csv"), spec.truth);
  out << "simulate: " << c.sim_regions << " regions x " << c.sim_days << " days written to "
      << c.output_dir << '\n';
  return kExitOk;
}

int cmd_diagnose(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(c, err);
  const ModelContext ctx(in.panel, in.regions, c.model);
  const PosteriorSamples samples = load_fit(c, ctx);
  const CalibrationReport report = calibrate(samples, ctx, c.bins);
  for (const auto& w : report.warnings) err << "riskmap: warning: " << w << '\n';
  write_calibration(output_path(c, "calibration.csv"), report, in.regions, in.panel);
  write_histogram(output_path(c, "pit_histogram.csv"), report.histogram);
  const UniformityTest u = chi_square_uniformity(
      report.histogram, static_cast<double>(ctx.regions()) * ctx.days());
  out << "diagnose: PIT uniformity chi-square " << u.statistic << ", p = " << u.p_value << '\n';
  out << "diagnose: " << report.flagged.size() << " low-CPO cell(s) flagged\n";
  return kExitOk;
}

int cmd_forecast(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.horizon < 1) throw ConfigError("forecast needs horizon >= 1");
  const Inputs in = load_inputs(c, err);
  const ModelContext ctx(in.panel, in.regions, c.model);
  const PosteriorSamples samples = load_fit(c, ctx);
  const ForecastResult f = predictive_counts(samples, ctx, in.panel.dates, c.horizon, c.mcmc.seed);
  write_forecast(output_path(c, "forecast.csv"), f, in.regions);
  out << "forecast: " << c.horizon << " day(s) ahead written to " << c.output_dir << '\n';
  return kExitOk;
}

int cmd_report(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(c, err);
  const ModelContext ctx(in.panel, in.regions, c.model);
  const PosteriorSamples samples = load_fit(c, ctx);
  const int m = ctx.regions();
  const int T = ctx.days();
  const std::size_t n = samples.size();

  // (a) temporal trend
  std::vector<std::string> lines;
  std::vector<double> values(n), rr(n);
  for (int t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < n; ++d) {
      values[d] = samples.draws[d].latent.delta[t];
      rr[d] = std::exp(values[d]);
    }
    const CellSummary s = summarize_cell(values);
    const CellSummary e = summarize_cell(rr);
    lines.push_back(join({in.panel.dates[static_cast<std::size_t>(t)].to_string(),
                          format_double(s.mean), format_double(s.lower95), format_double(s.upper95),
                          format_double(e.mean), format_double(e.lower95),
                          format_double(e.upper95)}));
  }
  write_lines(output_path(c, "trend.csv"),
              "date,delta_mean,delta_lower95,delta_upper95,rr_mean,rr_lower95,rr_upper95", lines);

  // (b) spatial effects
  lines.clear();
  for (int i = 0; i < m; ++i) {
    std::vector<double> zeta(n), xi(n);
    for (std::size_t d = 0; d < n; ++d) {
      zeta[d] = samples.draws[d].latent.zeta[i];
      xi[d] = samples.draws[d].latent.xi[i];
    }
    const CellSummary z = summarize_cell(zeta);
    const CellSummary x = summarize_cell(xi);
    std::string name = in.regions[i].name;
    if (name.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : name) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      name = quoted + "\"";
    }
    lines.push_back(join({in.regions[i].id, name, format_double(z.mean), format_double(z.lower95),
                          format_double(z.upper95), format_double(x.mean), format_double(x.lower95),
                          format_double(x.upper95)}));
  }
  write_lines(output_path(c, "spatial.csv"),
              "region_id,name,zeta_mean,zeta_lower95,zeta_upper95,xi_mean,xi_lower95,xi_upper95",
              lines);

  // (c) observed vs fitted country series, plus the forecast when asked for
  lines.clear();
  for (const SeriesRow& r : fitted_country_series(samples, ctx, in.panel.dates)) {
    lines.push_back(join({r.date.to_string(), "fitted", format_double(r.observed),
                          format_double(r.fitted.mean), format_double(r.fitted.lower95),
                          format_double(r.fitted.upper95)}));
  }
  if (c.horizon > 0) {
    const ForecastResult f =
        predictive_counts(samples, ctx, in.panel.dates, c.horizon, c.mcmc.seed);
    for (int j = 0; j < c.horizon; ++j) {
      const CellSummary& s = f.country_summary[static_cast<std::size_t>(j)];
      lines.push_back(join({f.dates[static_cast<std::size_t>(j)].to_string(), "forecast", "",
                            format_double(s.mean), format_double(s.lower95),
                            format_double(s.upper95)}));
    }
  }
  write_lines(output_path(c, "country_series.csv"), "date,kind,observed,mean,lower95,upper95",
              lines);

  // (d) PIT histogram
  const CpoPit est = cpo_pit(samples, ctx);
  write_histogram(output_path(c, "pit_histogram.csv"), mean_pit_histogram(est.pit, est.cpo, c.bins));
  out << "report: plot data written to " << c.output_dir << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatio-temporal relative-risk mapping for daily case counts", "riskmap"};
  app.require_subcommand(1);
  std::map<std::string, std::optional<std::string>> flags;
  const char* commands[][2] = {
      {"fit", "sample the posterior and write samples.csv, summary.csv, acceptance.csv"},
      {"simulate", "write a synthetic dataset drawn from the model"},
      {"diagnose", "write CPO/PIT calibration tables for a fitted model"},
      {"forecast", "write k-day-ahead predictive summaries for a fitted model"},
      {"report", "write plot-data tables (trend, spatial effects, country series, PIT)"}};
  std::map<std::string, std::string> config_paths;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_paths[name], "key = value configuration file");
    for (const std::string& key : config_keys()) {
      sub->add_option_function<std::string>(
          "--" + key, [&flags, key](const std::string& v) { flags[key] = v; },
          "overrides '" + key + "' from the config file");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "riskmap: error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    std::map<std::string, std::string> values;
    if (!config_paths[command].empty()) values = read_config_file(config_paths[command]);
    if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') {
      values["output_dir"] = env;
    }
    for (const auto& [key, v] : flags) {
      if (v) values[key] = *v;
    }
    const RunConfig cfg = build_config(values);
    if (command == "fit") return cmd_fit(cfg, out, err);
    if (command == "simulate") return cmd_simulate(cfg, out, err);
    if (command == "diagnose") return cmd_diagnose(cfg, out, err);
    if (command == "forecast") return cmd_forecast(cfg, out, err);
    return cmd_report(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "riskmap: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "riskmap: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ContractError& e) {
    err << "riskmap: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DomainError& e) {
    err << "riskmap: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ModelSpecError& e) {
    err << "riskmap: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "riskmap: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "riskmap: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace riskmap
