#include <cowqkd/run_config.hpp>

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cowqkd;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << body;
  return path;
}

std::vector<std::string> split_csv_numbers(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) out.push_back(cell);
  }
  return out;
}

}  // namespace

TEST_SUITE("run_config") {
  TEST_CASE("defaults") {
    const auto c = parse_config({});
    CHECK(c.mode == PhaseMode::pure);
    CHECK(c.m == 3);
    CHECK(c.n_cut == 2);
    CHECK(c.epsilon == 1e-7);
    CHECK(c.e_d == 0.01);
    CHECK(c.e_m == 0.005);
    CHECK(!c.mu.has_value());
    CHECK(c.format == OutputFormat::csv);
  }

  TEST_CASE("flags") {
    CHECK(parse_config({"--dark", "0"}).epsilon == 0.0);
    const auto c = parse_config({"--mode", "randomized", "--ncut", "3", "--optimize-mu", "1e-4:0.5", "--format", "json"});
    CHECK(c.mode == PhaseMode::randomized);
    CHECK(c.n_cut == 3);
    CHECK(c.mu_lo == 1e-4);
    CHECK(c.mu_hi == 0.5);
    CHECK(c.format == OutputFormat::json);
    CHECK(parse_config({"--loss-start", "1", "--loss-end", "2", "--loss-step", "0.25"}).loss_grid().size() == 5);
  }

  TEST_CASE("usage errors") {
    CHECK_THROWS_AS(parse_config({"--ed", "0.7"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--bogus"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--m", "three"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--mode", "coherent"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--mu", "0.1", "--optimize-mu", "0.1:0.2"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--optimize-mu", "0.5:0.1"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--optimize-mu", "0.5"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--loss-start", "5", "--loss-end", "1"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--config", "/nonexistent/cowrate.cfg"}), UsageError);
    CHECK_THROWS_AS(parse_config({"--help"}), HelpRequested);
  }

  TEST_CASE("config file with command-line override") {
    const auto path = temp_file("cowqkd_run_config_test.cfg", "# sweep\nm = 2\ndark = 0\nloss-end = 7\nmu = 0.2\n");
    const auto c = parse_config({"--config", path.string(), "--loss-end", "9"});
    CHECK(c.m == 2);
    CHECK(c.epsilon == 0.0);
    CHECK(c.loss_end_db == 9.0);
    REQUIRE(c.mu.has_value());
    CHECK(*c.mu == 0.2);

    const auto bad = temp_file("cowqkd_run_config_bad.cfg", "nonsense = 1\n");
    CHECK_THROWS_AS(parse_config({"--config", bad.string()}), UsageError);
    const auto range = temp_file("cowqkd_run_config_range.cfg", "ed = 0.9\n");
    CHECK_THROWS_AS(parse_config({"--config", range.string()}), UsageError);
    std::filesystem::remove(path);
    std::filesystem::remove(bad);
    std::filesystem::remove(range);
  }

  TEST_CASE("noiseless single point, both encodings, byte-identical reruns") {
    auto c = parse_config({"--m", "2", "--dark", "0", "--ed", "0", "--em", "0", "--mu", "0.02", "--loss-start", "0",
                           "--loss-end", "0"});
    std::ostringstream csv, csv_again, json;
    CHECK(run_sweep(c, csv) == exit_code::ok);
    CHECK(run_sweep(c, csv_again) == exit_code::ok);
    CHECK(csv.str() == csv_again.str());
    c.format = OutputFormat::json;
    CHECK(run_sweep(c, json) == exit_code::ok);

    const std::string text = csv.str();
    CHECK(text.rfind("loss_db,mu,m,G,e_bar,delta_max,rate_per_pulse,solver_gap\n", 0) == 0);
    const auto cells = split_csv_numbers(text);
    REQUIRE(cells.size() == 8);
    CHECK(std::stod(cells[6]) > 0.0);
    CHECK(text.find("# cutoff_loss_db=0 ") != std::string::npos);

    // Every CSV number appears verbatim in the JSON document.
    const std::string doc = json.str();
    for (const char* key : {"loss_db", "mu", "m", "G", "e_bar", "delta_max", "rate_per_pulse", "solver_gap"})
      CHECK(doc.find(std::string("\"") + key + "\"") != std::string::npos);
    for (const auto& cell : cells) CHECK(doc.find(": " + cell) != std::string::npos);
    CHECK(doc.find("\"cutoff_loss_db\": 0") != std::string::npos);
  }

  TEST_CASE("unsolved points are written as nan / null") {
    SweepResult r;
    RatePoint p;
    p.loss_db = 3;
    p.m = 3;
    p.solved = false;
    p.delta_max = p.solver_gap = std::numeric_limits<double>::quiet_NaN();
    r.points.push_back(p);
    r.failed_points = 1;
    std::ostringstream csv, json;
    write_sweep(csv, r, OutputFormat::csv);
    write_sweep(json, r, OutputFormat::json);
    CHECK(csv.str().find("3,0,3,0,0,nan,0,nan") != std::string::npos);
    CHECK(csv.str().find("cutoff_loss_db=none failed_points=1") != std::string::npos);
    CHECK(json.str().find("\"delta_max\": null") != std::string::npos);
    CHECK(json.str().find("\"cutoff_loss_db\": null") != std::string::npos);
  }

  TEST_CASE("output file") {
    const auto path = std::filesystem::temp_directory_path() / "cowqkd_run_config_out.csv";
    auto c = parse_config({"--m", "2", "--mu", "0.05", "--loss-start", "0", "--loss-end", "0", "--out", path.string()});
    std::ostringstream unused;
    CHECK(run_sweep(c, unused) == exit_code::ok);
    CHECK(unused.str().empty());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "loss_db,mu,m,G,e_bar,delta_max,rate_per_pulse,solver_gap");
    std::filesystem::remove(path);
  }
}
