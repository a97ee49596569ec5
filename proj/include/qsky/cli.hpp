#pragma once

// Run configuration, scenario pipelines, voltage sweeps and report files
// behind the `qsky` command-line tool.

#include <optional>
#include <string>
#include <vector>

#include "qsky/device.hpp"
#include "qsky/experiment.hpp"
#include "qsky/hilbert.hpp"
#include "qsky/io.hpp"
#include "qsky/tomography.hpp"
#include "qsky/topology.hpp"

namespace qsky::cli {

enum class Scenario { entangled_nonlocal, heralded_local_A, heralded_local_B, trivial, ghz, chsh, sweep };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);
/// 3.9, 6.3, 5.4 and 4.7 V for the four pipeline scenarios; 4.7 V otherwise.
double default_voltage(Scenario s);
bool is_pipeline(Scenario s);

/// Tool version baked in at build time.
std::string version();

struct SourceConfig {
  std::vector<int> ells{0, 2, -2};
  std::vector<int> ks{1, 2};
  double sigma_l = 0.0;  // > 0 selects the Gaussian envelope instead
  int ell_max = kDefaultEllMax;
};

struct GridConfig {
  int nx = 256;
  int ny = 256;
  double half_extent = 0.0;  // 0: automatic
  double waist = 1.0;
};

struct TomographyConfig {
  bool noisy = true;
  experiment::CountModel counts{2000.0, 10.0, 0.0, 3.0};
  tomography::ReconstructOptions reconstruct{};
};

struct ChshConfig {
  double visibility = 0.86;
  double integration_s = 125.0;
  int n_theta_b = 64;
};

struct GhzConfig {
  int ell = 2;
  bool ideal_operating_point = true;  // eta = (1, 0) instead of the device at V
  bool force = false;
};

struct SweepSpec {
  double v_min = 3.0;
  double v_max = 6.5;
  double v_step = 0.1;
  std::vector<Scenario> scenarios{Scenario::entangled_nonlocal};
  int threads = 0;  // 0: hardware concurrency

  std::vector<double> voltages() const;
};

struct RunConfig {
  Scenario scenario = Scenario::entangled_nonlocal;
  std::uint64_t seed = 1;
  std::optional<double> voltage;
  device::DeviceParams device{};
  std::string retardation_table;
  hilbert::WavelengthConfig wavelengths{};
  device::PhaseConvention convention = device::PhaseConvention::unitary_i;
  SourceConfig source{};
  GridConfig grid{};
  TomographyConfig tomography{};
  ChshConfig chsh{};
  GhzConfig ghz{};
  SweepSpec sweep{};
  std::string out = "out";

  double effective_voltage() const { return voltage ? *voltage : default_voltage(scenario); }
  /// Throws ValidationError naming the first bad field.
  void validate() const;
};

/// Unknown keys are rejected so typos do not pass silently.
RunConfig config_from_json(const io::json& j, RunConfig base = {});
io::json to_json(const RunConfig& c);

/// Seed for one (voltage, scenario) point, independent of scheduling.
std::uint64_t point_seed(std::uint64_t master, double voltage, Scenario s);

struct PipelineState {
  hilbert::PureState state;          // conditional state after heralding
  double herald_probability = 0.0;   // dichroic x fibre x herald
  device::EtaByWavelength eta;
  tomography::ProjectorSet set;
  hilbert::DensityMatrix rho;        // in the set basis
  hilbert::DensityMatrix ideal;      // balanced target in the set basis
};

/// Source -> dichroic -> device -> single-mode fibre -> polarization herald
/// for one of the four pipeline scenarios.
PipelineState prepare_pipeline(const RunConfig& c, Scenario s, double voltage);

struct TopologyReport {
  topology::SkyrmeResult quadrature;
  topology::SkyrmeResult solid_angle;
  double coverage = 0.0;
  double half_extent = 0.0;
  double masked_fraction = 0.0;
};

TopologyReport analyze_topology(const hilbert::DensityMatrix& rho, const GridConfig& grid,
                                topology::StokesField* field = nullptr);
io::json to_json(const TopologyReport& t);

struct RunResult {
  io::json report;
  std::vector<experiment::CountRecord> counts;
  std::optional<hilbert::DensityMatrix> rho;        // reconstructed (or exact when noiseless)
  std::optional<hilbert::DensityMatrix> rho_model;  // exact pipeline state
  std::optional<topology::StokesField> stokes;
  bool ok = true;
};

RunResult run_scenario(const RunConfig& c);

/// Writes report.json plus counts.csv, rho.json, rho_model.json and
/// stokes.csv when present. Creates the directory.
void write_outputs(const RunResult& r, const std::string& dir);

/// n, fidelity and coverage describe the model state; the reconstructed
/// columns come from the simulated noisy tomography.
struct SweepRow {
  double voltage = 0.0;
  Scenario scenario = Scenario::entangled_nonlocal;
  double n = 0.0;
  double fidelity = 0.0;
  double coverage = 0.0;
  double n_reconstructed = 0.0;
  double fidelity_reconstructed = 0.0;
  std::string status = "ok";
};

/// Rows ordered by (voltage, scenario list order). A failing point keeps its
/// row with the error in `status`.
std::vector<SweepRow> sweep(const RunConfig& c);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Reconstruction from a count file against a projector set.
RunResult run_tomo(const RunConfig& c, const std::string& counts_path, tomography::SetKind kind,
                   hilbert::Photon first, hilbert::Photon second);

/// Stokes field and invariants of a density-matrix JSON file.
RunResult run_stokes(const RunConfig& c, const std::string& rho_path, bool with_field);

}  // namespace qsky::cli
