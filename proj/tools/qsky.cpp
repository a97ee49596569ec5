// qsky: spin-orbit skyrmion simulator driver.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsky/cli.hpp"
#include "qsky/error.hpp"

namespace {

using namespace qsky;

struct Common {
  std::string config;
  std::string scenario;
  std::string grid;
  std::string out;
  double voltage = 0.0;
  std::uint64_t seed = 0;
  CLI::Option* voltage_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  c.voltage_opt = sub->add_option("--voltage", c.voltage, "Device voltage in volts");
  sub->add_option("--scenario", c.scenario, "Scenario name");
  c.seed_opt = sub->add_option("--seed", c.seed, "Master seed");
  sub->add_option("--grid", c.grid, "Grid size, N or NxM");
  sub->add_option("--out", c.out, "Output directory");
}

std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    std::size_t used = 0;
    const int nx = std::stoi(s.substr(0, x), &used);
    if (used != (x == std::string::npos ? s.size() : x)) throw std::invalid_argument(s);
    if (x == std::string::npos) return {nx, nx};
    const int ny = std::stoi(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument(s);
    return {nx, ny};
  } catch (const std::logic_error&) {
    throw ValidationError("--grid expects N or NxM, got '" + s + "'");
  }
}

cli::RunConfig build_config(const Common& o) {
  cli::RunConfig c;
  if (!o.config.empty()) c = cli::config_from_json(io::read_json(o.config));
  if (!o.scenario.empty()) c.scenario = cli::parse_scenario(o.scenario);
  if (o.voltage_opt->count()) c.voltage = o.voltage;
  if (o.seed_opt->count()) c.seed = o.seed;
  if (!o.grid.empty()) std::tie(c.grid.nx, c.grid.ny) = parse_grid(o.grid);
  if (!o.out.empty()) c.out = o.out;
  return c;
}

hilbert::Photon parse_photon(const std::string& s) {
  if (s == "A" || s == "a") return hilbert::Photon::A;
  if (s == "B" || s == "b") return hilbert::Photon::B;
  throw ValidationError("unknown photon '" + s + "' (expected A or B)");
}

int finish(const cli::RunResult& r, const std::string& dir) {
  cli::write_outputs(r, dir);
  std::cout << (r.ok ? "ok" : "incomplete") << ": wrote " << (std::filesystem::path(dir) / "report.json").string()
            << "\n";
  if (!r.ok)
    for (const auto& e : r.report.value("errors", io::json::array())) std::cerr << "qsky: " << e.get<std::string>() << "\n";
  return r.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-orbit skyrmion simulator: pipelines, tomography, topology, CHSH and GHZ"};
  app.set_version_flag("--version", cli::version());
  app.require_subcommand(1);

  Common simulate_o, chsh_o, ghz_o, sweep_o, tomo_o, stokes_o, skyrme_o, ingest_o;

  auto* simulate = app.add_subcommand("simulate", "Run one scenario and write its report");
  add_common(simulate, simulate_o);

  auto* chsh = app.add_subcommand("chsh", "CHSH test and OAM tomography of a Werner state");
  add_common(chsh, chsh_o);
  double visibility = 0.0;
  auto* vis_opt = chsh->add_option("--visibility", visibility, "Werner visibility")->check(CLI::Range(0.0, 1.0));

  auto* ghz = app.add_subcommand("ghz", "GHZ preparation, heralding and logical fidelity");
  add_common(ghz, ghz_o);
  int ghz_ell = 0;
  auto* ell_opt = ghz->add_option("--ell", ghz_ell, "Source OAM l");
  bool device_eta = false, force = false;
  ghz->add_flag("--device-eta", device_eta, "Use the device efficiencies at --voltage instead of eta = (1, 0)");
  ghz->add_flag("--force", force, "Skip the operating-point check");

  auto* sweep = app.add_subcommand("sweep", "Voltage sweep, one CSV row per (voltage, scenario)");
  add_common(sweep, sweep_o);
  double v_min = 0, v_max = 0, v_step = 0;
  int threads = 0;
  std::string scenarios;
  auto* vmin_opt = sweep->add_option("--v-min", v_min, "First voltage");
  auto* vmax_opt = sweep->add_option("--v-max", v_max, "Last voltage");
  auto* vstep_opt = sweep->add_option("--v-step", v_step, "Voltage step");
  auto* thr_opt = sweep->add_option("--threads", threads, "Worker threads (0: all cores)");
  sweep->add_option("--scenarios", scenarios, "Comma-separated pipeline scenarios");

  std::string counts_path, set_name = "hybrid36", first = "A", second = "B", rho_path;
  auto* tomo = app.add_subcommand("tomo", "Reconstruct a density matrix from a count file");
  add_common(tomo, tomo_o);
  tomo->add_option("--counts", counts_path, "Count CSV")->required()->check(CLI::ExistingFile);
  tomo->add_option("--set", set_name, "Projector set");
  tomo->add_option("--first", first, "Photon of the first slot");
  tomo->add_option("--second", second, "Photon of the second slot");

  auto* stokes = app.add_subcommand("stokes", "Stokes field (CSV) and invariants of a state");
  add_common(stokes, stokes_o);
  stokes->add_option("--rho", rho_path, "Density-matrix JSON (default: the scenario's model state)")
      ->check(CLI::ExistingFile);

  auto* skyrme = app.add_subcommand("skyrme", "Skyrme number and coverage of a state");
  add_common(skyrme, skyrme_o);
  skyrme->add_option("--rho", rho_path, "Density-matrix JSON (default: the scenario's model state)")
      ->check(CLI::ExistingFile);

  auto* ingest = app.add_subcommand("ingest", "Validate a count file against a projector set");
  add_common(ingest, ingest_o);
  ingest->add_option("--counts", counts_path, "Count CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--set", set_name, "Projector set");
  ingest->add_option("--first", first, "Photon of the first slot");
  ingest->add_option("--second", second, "Photon of the second slot");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      const auto c = build_config(simulate_o);
      return finish(cli::run_scenario(c), c.out);
    }
    if (chsh->parsed()) {
      auto c = build_config(chsh_o);
      c.scenario = cli::Scenario::chsh;
      if (vis_opt->count()) c.chsh.visibility = visibility;
      return finish(cli::run_scenario(c), c.out);
    }
    if (ghz->parsed()) {
      auto c = build_config(ghz_o);
      c.scenario = cli::Scenario::ghz;
      if (ell_opt->count()) c.ghz.ell = ghz_ell;
      if (device_eta) c.ghz.ideal_operating_point = false;
      if (force) c.ghz.force = true;
      return finish(cli::run_scenario(c), c.out);
    }
    if (sweep->parsed()) {
      auto c = build_config(sweep_o);
      c.scenario = cli::Scenario::sweep;
      if (vmin_opt->count()) c.sweep.v_min = v_min;
      if (vmax_opt->count()) c.sweep.v_max = v_max;
      if (vstep_opt->count()) c.sweep.v_step = v_step;
      if (thr_opt->count()) c.sweep.threads = threads;
      if (!scenarios.empty()) {
        c.sweep.scenarios.clear();
        for (const auto& s : io::split_csv(scenarios)) c.sweep.scenarios.push_back(cli::parse_scenario(s));
      }
      const auto rows = cli::sweep(c);
      std::filesystem::create_directories(c.out);
      const auto dir = std::filesystem::path(c.out);
      io::write_text((dir / "sweep.csv").string(), cli::sweep_csv(rows));
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.status != "ok";
      auto report = io::json{{"tool", "qsky"}, {"version", cli::version()}, {"config", cli::to_json(c)}};
      report["rows"] = rows.size();
      report["failed_rows"] = failed;
      report["ok"] = failed == 0;
      io::write_json((dir / "report.json").string(), report);
      std::cout << rows.size() << " rows, " << failed << " failed: wrote " << (dir / "sweep.csv").string() << "\n";
      return failed == 0 ? 0 : 1;
    }
    if (tomo->parsed()) {
      const auto c = build_config(tomo_o);
      return finish(cli::run_tomo(c, counts_path, tomography::parse_set_kind(set_name), parse_photon(first),
                                  parse_photon(second)),
                    c.out);
    }
    if (stokes->parsed()) {
      const auto c = build_config(stokes_o);
      return finish(cli::run_stokes(c, rho_path, true), c.out);
    }
    if (skyrme->parsed()) {
      const auto c = build_config(skyrme_o);
      return finish(cli::run_stokes(c, rho_path, false), c.out);
    }
    if (ingest->parsed()) {
      const auto c = build_config(ingest_o);
      const auto set = tomography::projector_set(tomography::parse_set_kind(set_name), parse_photon(first),
                                                 parse_photon(second));
      const auto records = tomography::ingest_counts(counts_path, set);
      std::int64_t total = 0;
      for (const auto& r : records) total += r.counts;
      std::vector<std::string> missing;
      for (const auto& e : set.entries) {
        bool found = false;
        for (const auto& r : records) found = found || (r.setting_a == e.setting_a && r.setting_b == e.setting_b);
        if (!found) missing.push_back(e.id());
      }
      cli::RunResult r;
      r.report = {{"tool", "qsky"},
                  {"version", cli::version()},
                  {"config", cli::to_json(c)},
                  {"counts_file", counts_path},
                  {"set", set_name},
                  {"records", records.size()},
                  {"total_counts", total},
                  {"missing_settings", missing}};
      r.ok = missing.empty();
      r.report["errors"] = missing.empty() ? io::json::array()
                                           : io::json::array({std::to_string(missing.size()) + " settings missing"});
      r.report["ok"] = r.ok;
      r.counts = records;
      return finish(r, c.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "qsky: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
