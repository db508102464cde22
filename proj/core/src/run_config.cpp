#include "cowqkd/run_config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <tuple>

namespace cowqkd {

void RunConfig::validate() const {
  block().validate();
  ChannelParams ch;
  ch.epsilon = epsilon;
  ch.e_d = e_d;
  ch.e_m = e_m;
  ch.validate();
  if (n_cut < 1) throw ArgumentError("ncut must be at least 1");
  if (!(loss_start_db >= 0.0) || !std::isfinite(loss_end_db) || loss_end_db < loss_start_db) {
    throw ArgumentError("loss range must satisfy 0 <= start <= end");
  }
  if (!(loss_step_db > 0.0)) throw ArgumentError("loss step must be positive");
  if (mu && !(*mu > 0.0 && *mu <= 1.0)) throw ArgumentError("mu must lie in (0, 1]");
  if (!(mu_lo > 0.0 && mu_lo < mu_hi && mu_hi <= 1.0)) throw ArgumentError("optimize-mu range must satisfy 0 < lo < hi <= 1");
  if (!(tolerance > 0.0 && tolerance < 1.0)) throw ArgumentError("tol must lie in (0, 1)");
  if (threads < 1) throw ArgumentError("threads must be at least 1");
}

std::vector<double> RunConfig::loss_grid() const {
  const int n = static_cast<int>(std::floor((loss_end_db - loss_start_db) / loss_step_db + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (int k = 0; k < n; ++k) grid[k] = loss_start_db + k * loss_step_db;
  return grid;
}

BlockConfig RunConfig::block() const {
  BlockConfig c;
  c.m = m;
  c.n_cut = n_cut;
  c.phase_mode = mode;
  if (mu) c.mu = *mu;
  return c;
}

SweepSpec RunConfig::sweep() const {
  SweepSpec s;
  s.loss_db = loss_grid();
  s.epsilon = epsilon;
  s.e_d = e_d;
  s.e_m = e_m;
  s.fixed_mu = mu;
  s.search.mu_lo = mu_lo;
  s.search.mu_hi = mu_hi;
  s.threads = threads;
  return s;
}

PhaseErrorOptions RunConfig::solver_options() const {
  PhaseErrorOptions o;
  o.solver.gap_tolerance = tolerance;
  return o;
}

namespace {

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("optimize-mu expects lo:hi, got '" + text + "'");
  try {
    std::size_t used_lo = 0, used_hi = 0;
    const std::string lo = text.substr(0, colon), hi = text.substr(colon + 1);
    const double a = std::stod(lo, &used_lo);
    const double b = std::stod(hi, &used_hi);
    if (used_lo != lo.size() || used_hi != hi.size()) throw std::invalid_argument(text);
    return {a, b};
  } catch (const std::logic_error&) {
    throw UsageError("optimize-mu expects lo:hi, got '" + text + "'");
  }
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig cfg;
  std::string mode = "pure", format = "csv", range;
  double mu = 0.0;

  CLI::App app{"Asymptotic key-rate lower bound for coherent-one-way QKD", "cowrate"};
  app.set_config("--config", "", "Flat key=value file; keys are the long flag names");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--mode", mode, "Source model")->check(CLI::IsMember({"pure", "randomized"}));
  app.add_option("--m", cfg.m, "Block size in bits");
  app.add_option("--ncut", cfg.n_cut, "Tagged photon numbers in randomized mode");
  app.add_option("--dark", cfg.epsilon, "Dark-count probability per slot");
  app.add_option("--ed", cfg.e_d, "Data-line bit-flip probability");
  app.add_option("--em", cfg.e_m, "Monitoring-line misalignment");
  app.add_option("--loss-start", cfg.loss_start_db, "First loss point (dB)");
  app.add_option("--loss-end", cfg.loss_end_db, "Last loss point (dB)");
  app.add_option("--loss-step", cfg.loss_step_db, "Loss grid spacing (dB)");
  auto* fixed = app.add_option("--mu", mu, "Fixed mean photon number");
  app.add_option("--optimize-mu", range, "Optimize mu over lo:hi")->excludes(fixed);
  app.add_option("--tol", cfg.tolerance, "SDP relative gap target");
  app.add_option("--out", cfg.out, "Output file (default: stdout)");
  app.add_option("--format", format, "Output encoding")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", cfg.threads, "Worker threads");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  cfg.mode = parse_phase_mode(mode);
  cfg.format = format == "json" ? OutputFormat::json : OutputFormat::csv;
  if (fixed->count() > 0) cfg.mu = mu;
  if (!range.empty()) std::tie(cfg.mu_lo, cfg.mu_hi) = parse_range(range);
  try {
    cfg.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

namespace {

// 12 significant digits, the same text in both encodings.
std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

nlohmann::json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return nlohmann::json::parse(fmt(x));
}

}  // namespace

void write_sweep(std::ostream& os, const SweepResult& result, OutputFormat format) {
  if (format == OutputFormat::csv) {
    os << "loss_db,mu,m,G,e_bar,delta_max,rate_per_pulse,solver_gap\n";
    for (const auto& p : result.points) {
      os << fmt(p.loss_db) << ',' << fmt(p.mu) << ',' << p.m << ',' << fmt(p.G) << ',' << fmt(p.e_bar) << ','
         << fmt(p.delta_max) << ',' << fmt(p.rate_per_pulse) << ',' << fmt(p.solver_gap) << '\n';
    }
    os << "# cutoff_loss_db=" << (result.cutoff_loss_db ? fmt(*result.cutoff_loss_db) : "none")
       << " failed_points=" << result.failed_points << '\n';
    return;
  }
  nlohmann::json doc;
  doc["points"] = nlohmann::json::array();
  for (const auto& p : result.points) {
    doc["points"].push_back({{"loss_db", num(p.loss_db)},
                             {"mu", num(p.mu)},
                             {"m", p.m},
                             {"G", num(p.G)},
                             {"e_bar", num(p.e_bar)},
                             {"delta_max", num(p.delta_max)},
                             {"rate_per_pulse", num(p.rate_per_pulse)},
                             {"solver_gap", num(p.solver_gap)}});
  }
  doc["summary"] = {{"cutoff_loss_db", result.cutoff_loss_db ? num(*result.cutoff_loss_db) : nullptr},
                    {"failed_points", result.failed_points}};
  os << doc.dump(2) << '\n';
}

int run_sweep(const RunConfig& config, std::ostream& fallback) {
  config.validate();
  SweepResult result;
  try {
    result = sweep_and_cutoff(config.block(), config.sweep(), config.solver_options());
  } catch (const NumericError&) {
    return exit_code::numeric;
  }

  std::ofstream file;
  if (!config.out.empty()) {
    file.open(config.out);
    if (!file) throw UsageError("cannot open output file '" + config.out + "'");
  }
  std::ostream& os = config.out.empty() ? fallback : file;
  write_sweep(os, result, config.format);
  os.flush();

  if (result.failed_points == 0) return exit_code::ok;
  return result.failed_points == static_cast<int>(result.points.size()) ? exit_code::numeric : exit_code::partial;
}

}  // namespace cowqkd
