#include "qsky/tomography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "qsky/error.hpp"

namespace qsky::tomography {

using experiment::CountRecord;
using hilbert::Complex;
using hilbert::DensityMatrix;
using hilbert::Dof;
using hilbert::Ket;
using hilbert::Photon;

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

/// A local measurement outcome on one qubit.
struct LocalSetting {
  std::string id;
  Eigen::Vector2cd v;
  int basis = 0;  // 0: computational, 1 and 2: the two superposition bases
};

std::vector<LocalSetting> pol_settings() {
  using hilbert::PolSetting;
  std::vector<LocalSetting> out;
  const std::pair<PolSetting, int> order[] = {{PolSetting::R, 0}, {PolSetting::L, 0}, {PolSetting::H, 1},
                                              {PolSetting::V, 1}, {PolSetting::D, 2}, {PolSetting::A, 2}};
  for (const auto& [s, b] : order) out.push_back({hilbert::to_string(s), hilbert::pol_vector(s), b});
  return out;
}

std::vector<LocalSetting> oam_settings(const std::string& zero_id, const std::string& one_id) {
  std::vector<LocalSetting> out;
  out.push_back({zero_id, Eigen::Vector2cd(1, 0), 0});
  out.push_back({one_id, Eigen::Vector2cd(0, 1), 0});
  const std::pair<int, int> phases[] = {{0, 1}, {180, 1}, {90, 2}, {270, 2}};
  for (const auto& [deg, b] : phases) {
    const double phi = deg * std::numbers::pi / 180.0;
    Eigen::Vector2cd v(kInvSqrt2, kInvSqrt2 * std::polar(1.0, phi));
    if (deg == 180) v(1) = -kInvSqrt2;
    out.push_back({"s" + std::to_string(deg), v, b});
  }
  return out;
}

Ket slot_ket(const std::vector<QubitSlot>& slots, const std::vector<int>& bits) {
  std::vector<hilbert::BasisLabel> labels;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto it = std::find_if(labels.begin(), labels.end(),
                           [&](const hilbert::BasisLabel& l) { return l.photon == slots[i].photon; });
    if (it == labels.end()) {
      labels.push_back(hilbert::BasisLabel{slots[i].photon, {}, {}, {}});
      it = labels.end() - 1;
    }
    hilbert::set_dof(*it, slots[i].dof, bits[i] ? slots[i].one : slots[i].zero);
  }
  return hilbert::make_ket(std::move(labels));
}

std::string pauli_name(int m) { return std::string(1, "IXYZ"[m]); }

std::array<Eigen::Matrix2cd, 4> paulis() {
  std::array<Eigen::Matrix2cd, 4> s;
  s[0] << 1, 0, 0, 1;
  s[1] << 0, 1, 1, 0;
  s[2] << 0, Complex(0, -1), Complex(0, 1), 0;
  s[3] << 1, 0, 0, -1;
  return s;
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Orthonormal (Tr G_a G_b = delta_ab) traceless Hermitian basis: Pauli
/// strings scaled by 1/sqrt(d).
struct TracelessBasis {
  std::vector<Eigen::MatrixXcd> g;
  std::vector<std::string> names;
};

TracelessBasis traceless_basis(Eigen::Index d) {
  const auto s = paulis();
  TracelessBasis out;
  if (d == 2) {
    for (int m = 1; m < 4; ++m) {
      out.g.push_back(s[static_cast<std::size_t>(m)] / std::sqrt(2.0));
      out.names.push_back(pauli_name(m));
    }
  } else if (d == 4) {
    for (int m = 0; m < 4; ++m)
      for (int n = 0; n < 4; ++n) {
        if (m == 0 && n == 0) continue;
        out.g.push_back(kron(s[static_cast<std::size_t>(m)], s[static_cast<std::size_t>(n)]) / 2.0);
        out.names.push_back(pauli_name(m) + pauli_name(n));
      }
  } else {
    throw ValidationError("tomography supports dimension 2 or 4, got " + std::to_string(d));
  }
  return out;
}

/// Tr(A B) for Hermitian A, B.
double trace_prod(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a.cwiseProduct(b.transpose())).sum().real();
}

Eigen::VectorXd predicted(const ProjectorSet& set, const Eigen::MatrixXcd& rho) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(set.entries.size()));
  for (std::size_t i = 0; i < set.entries.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = trace_prod(set.entries[i].matrix, rho);
  return out;
}

/// Eigenvalues moved onto {x >= 0, sum x = 1}.
Eigen::VectorXd simplex_redistribute(Eigen::VectorXd lam) {
  const auto n = lam.size();
  std::vector<bool> active(static_cast<std::size_t>(n), true);
  while (true) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[static_cast<std::size_t>(i)]) {
        sum += lam(i);
        ++count;
      }
    const double shift = (sum - 1.0) / count;
    bool clipped = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      lam(i) -= shift;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)] && lam(i) < 0.0) {
        lam(i) = 0.0;
        active[static_cast<std::size_t>(i)] = false;
        clipped = true;
      }
    }
    if (!clipped) break;
  }
  return lam;
}

}  // namespace

std::string to_string(SetKind k) {
  switch (k) {
    case SetKind::polarization6: return "polarization6";
    case SetKind::oam6_pm2: return "oam6_pm2";
    case SetKind::oam6_m2m4: return "oam6_m2m4";
    case SetKind::hybrid36: return "hybrid36";
    case SetKind::oam36_pm2: return "oam36_pm2";
  }
  return "?";
}

SetKind parse_set_kind(const std::string& s) {
  for (SetKind k : {SetKind::polarization6, SetKind::oam6_pm2, SetKind::oam6_m2m4, SetKind::hybrid36,
                    SetKind::oam36_pm2})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown projector set '" + s + "'");
}

int ProjectorSet::n_groups() const {
  int g = 0;
  for (const auto& e : entries) g = std::max(g, e.group + 1);
  return g;
}

std::optional<std::size_t> ProjectorSet::find(const std::string& a, const std::string& b) const {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].setting_a == a && entries[i].setting_b == b) return i;
  return std::nullopt;
}

ProjectorSet projector_set(SetKind kind, Photon first, Photon second) {
  ProjectorSet set;
  set.kind = kind;
  const QubitSlot pol{first, Dof::pol, 0, 1};
  std::vector<std::vector<LocalSetting>> local;
  switch (kind) {
    case SetKind::polarization6:
      set.slots = {pol};
      local = {pol_settings()};
      break;
    case SetKind::oam6_pm2:
      set.slots = {{first, Dof::oam, -2, 2}};
      local = {oam_settings("m2", "p2")};
      break;
    case SetKind::oam6_m2m4:
      set.slots = {{first, Dof::oam, -2, -4}};
      local = {oam_settings("m2", "m4")};
      break;
    case SetKind::hybrid36:
      set.slots = {pol, {second, Dof::oam, -2, -4}};
      local = {pol_settings(), oam_settings("m2", "m4")};
      break;
    case SetKind::oam36_pm2:
      if (first == second) throw CompositionError("oam36_pm2 needs two distinct photons");
      set.slots = {{first, Dof::oam, -2, 2}, {second, Dof::oam, -2, 2}};
      local = {oam_settings("m2", "p2"), oam_settings("m2", "p2")};
      break;
  }

  if (set.slots.size() == 1) {
    set.basis = {slot_ket(set.slots, {0}), slot_ket(set.slots, {1})};
    for (const auto& s : local[0]) {
      const Eigen::VectorXcd v = s.v;
      set.entries.push_back({s.id, "", v * v.adjoint(), s.basis});
    }
  } else {
    for (int i1 = 0; i1 < 2; ++i1)
      for (int i2 = 0; i2 < 2; ++i2) set.basis.push_back(slot_ket(set.slots, {i1, i2}));
    for (const auto& s1 : local[0])
      for (const auto& s2 : local[1]) {
        Eigen::VectorXcd v(4);
        for (int i1 = 0; i1 < 2; ++i1)
          for (int i2 = 0; i2 < 2; ++i2) v(2 * i1 + i2) = s1.v(i1) * s2.v(i2);
        set.entries.push_back({s1.id, s2.id, v * v.adjoint(), 3 * s1.basis + s2.basis});
      }
  }
  return set;
}

int gram_rank(const ProjectorSet& set) {
  const auto n = static_cast<Eigen::Index>(set.entries.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      g(i, j) = trace_prod(set.entries[static_cast<std::size_t>(i)].matrix, set.entries[static_cast<std::size_t>(j)].matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  int rank = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (es.eigenvalues()(i) > 1e-10 * top) ++rank;
  return rank;
}

DensityMatrix to_set_basis(const DensityMatrix& rho, const ProjectorSet& set) {
  std::vector<hilbert::DofRef> keep;
  for (const auto& s : set.slots) keep.push_back({s.photon, s.dof});
  const DensityMatrix reduced = hilbert::partial_trace(rho, keep);

  std::vector<Eigen::Index> index;
  for (const auto& k : reduced.basis()) {
    Eigen::Index idx = 0;
    for (const auto& s : set.slots) {
      const auto* l = hilbert::find_photon(k, s.photon);
      const auto v = l ? hilbert::dof_value(*l, s.dof) : std::nullopt;
      int bit = -1;
      if (v && *v == s.zero) bit = 0;
      else if (v && *v == s.one) bit = 1;
      if (bit < 0)
        throw CompositionError("basis ket " + hilbert::to_string(k) + " lies outside the encoded qubits of " +
                               to_string(set.kind));
      idx = 2 * idx + bit;
    }
    index.push_back(idx);
  }
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(set.dim(), set.dim());
  for (std::size_t i = 0; i < index.size(); ++i)
    for (std::size_t j = 0; j < index.size(); ++j)
      m(index[i], index[j]) = reduced.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return DensityMatrix(set.basis, std::move(m));
}

TomoProblem probabilities_from_state(const Eigen::MatrixXcd& rho, const ProjectorSet& set) {
  if (rho.rows() != set.dim() || rho.cols() != set.dim())
    throw ValidationError("state of dimension " + std::to_string(rho.rows()) + " for a " +
                          std::to_string(set.dim()) + "-dimensional projector set");
  TomoProblem t{set, predicted(set, rho), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(set.entries.size()))};
  t.p = t.p.cwiseMax(0.0);
  return t;
}

TomoProblem problem_from_counts(std::span<const CountRecord> counts, const ProjectorSet& set,
                                const ReconstructOptions& opt) {
  const auto n = static_cast<Eigen::Index>(set.entries.size());
  std::vector<std::optional<double>> c(set.entries.size());
  for (const auto& r : counts) {
    const auto i = set.find(r.setting_a, r.setting_b);
    if (!i)
      throw ValidationError("setting (" + r.setting_a + ", " + r.setting_b + ") is not part of " +
                            to_string(set.kind));
    if (c[*i]) throw ValidationError("setting " + set.entries[*i].id() + " appears more than once");
    if (r.counts < 0) throw ValidationError("setting " + set.entries[*i].id() + " has negative counts");
    c[*i] = static_cast<double>(r.counts);
  }
  std::string missing;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!c[i]) missing += (missing.empty() ? "" : ", ") + set.entries[i].id();
  if (!missing.empty()) throw ValidationError("incomplete settings, missing: " + missing);

  const double d = static_cast<double>(set.dim());
  TomoProblem t{set, Eigen::VectorXd(n), Eigen::VectorXd::Ones(n)};
  if (opt.normalization == Normalization::grand_total) {
    double total = 0.0, trace_sum = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      total += *c[i];
      trace_sum += set.entries[i].matrix.trace().real();
    }
    if (!(total > 0)) throw ValidationError("all counts are zero");
    for (Eigen::Index i = 0; i < n; ++i) t.p(i) = (trace_sum / d) * *c[static_cast<std::size_t>(i)] / total;
  } else {
    std::map<int, std::pair<double, double>> groups;  // group -> (counts, trace)
    for (std::size_t i = 0; i < c.size(); ++i) {
      auto& g = groups[set.entries[i].group];
      g.first += *c[i];
      g.second += set.entries[i].matrix.trace().real();
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& g = groups[set.entries[i].group];
      if (!(g.first > 0))
        throw ValidationError("measurement group " + std::to_string(set.entries[i].group) + " has no counts");
      t.p(static_cast<Eigen::Index>(i)) = (g.second / d) * *c[i] / g.first;
    }
  }
  if (opt.variance_weighting) {
    for (Eigen::Index i = 0; i < n; ++i) t.weights(i) = 1.0 / std::max(*c[static_cast<std::size_t>(i)], 1.0);
    t.weights *= static_cast<double>(n) / t.weights.sum();
  }
  return t;
}

LinearInversion linear_inversion(const TomoProblem& problem) {
  const auto& set = problem.set;
  const Eigen::Index d = set.dim();
  const auto basis = traceless_basis(d);
  const auto n = static_cast<Eigen::Index>(set.entries.size());
  const auto m = static_cast<Eigen::Index>(basis.g.size());
  if (problem.p.size() != n || problem.weights.size() != n)
    throw ValidationError("tomography problem has mismatched data and projector counts");

  Eigen::MatrixXd a(n, m);
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& mi = set.entries[static_cast<std::size_t>(i)].matrix;
    const double sw = std::sqrt(problem.weights(i));
    for (Eigen::Index k = 0; k < m; ++k) a(i, k) = sw * trace_prod(mi, basis.g[static_cast<std::size_t>(k)]);
    r(i) = sw * (problem.p(i) - mi.trace().real() / static_cast<double>(d));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double top = sv.size() ? sv(0) : 0.0;
  std::string missing;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > 1e-10 * top && top > 0) continue;
    const Eigen::VectorXd dir = svd.matrixV().col(k);
    Eigen::Index best = 0;
    dir.cwiseAbs().maxCoeff(&best);
    missing += (missing.empty() ? "" : ", ") + basis.names[static_cast<std::size_t>(best)];
  }
  if (!missing.empty())
    throw NumericalError("projector set is not informationally complete; unconstrained directions: " + missing);

  const Eigen::VectorXd x = svd.solve(r);
  LinearInversion out;
  out.h = Eigen::MatrixXcd::Identity(d, d) / static_cast<double>(d);
  for (Eigen::Index k = 0; k < m; ++k) out.h += x(k) * basis.g[static_cast<std::size_t>(k)];
  out.h = (0.5 * (out.h + out.h.adjoint())).eval();
  out.residual = (a * x - r).squaredNorm();
  return out;
}

Eigen::MatrixXcd project_psd(const Eigen::MatrixXcd& h) {
  const Eigen::MatrixXcd herm = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
  const Eigen::VectorXd lam = simplex_redistribute(es.eigenvalues());
  Eigen::MatrixXcd out = es.eigenvectors() * lam.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  return 0.5 * (out + out.adjoint());
}

DensityMatrix project_psd(const Eigen::MatrixXcd& h, std::vector<Ket> basis) {
  return DensityMatrix(std::move(basis), project_psd(h));
}

double chi2(const TomoProblem& problem, const Eigen::MatrixXcd& rho) {
  const Eigen::VectorXd r = problem.p - predicted(problem.set, rho);
  return (problem.weights.array() * r.array().square()).sum();
}

Reconstruction reconstruct(const TomoProblem& problem, const ReconstructOptions& opt) {
  const auto& set = problem.set;
  const LinearInversion li = linear_inversion(problem);
  Eigen::MatrixXcd rho = project_psd(li.h);
  double current = chi2(problem, rho);
  const double initial = current;
  int iterations = 0;

  if (opt.refine) {
    // Lipschitz constant of the gradient: 2 lambda_max of the weighted Gram matrix.
    const auto n = static_cast<Eigen::Index>(set.entries.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        k(i, j) = std::sqrt(problem.weights(i) * problem.weights(j)) *
                  trace_prod(set.entries[static_cast<std::size_t>(i)].matrix, set.entries[static_cast<std::size_t>(j)].matrix);
    const double lip = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    while (iterations < opt.max_iterations && lip > 0) {
      const Eigen::VectorXd r = problem.p - predicted(set, rho);
      Eigen::MatrixXcd grad = Eigen::MatrixXcd::Zero(set.dim(), set.dim());
      for (Eigen::Index i = 0; i < n; ++i)
        grad -= 2.0 * problem.weights(i) * r(i) * set.entries[static_cast<std::size_t>(i)].matrix;
      const Eigen::MatrixXcd next = project_psd(rho - grad / lip);
      const double value = chi2(problem, next);
      if (value > current) break;
      ++iterations;
      const double gain = current - value;
      rho = next;
      current = value;
      if (gain < opt.tolerance) break;
    }
  }

  Reconstruction out{DensityMatrix(set.basis, rho), initial, current, iterations, li.residual, {}};
  out.eigenvalues = out.rho.eigenvalues();
  return out;
}

Reconstruction reconstruct(std::span<const CountRecord> counts, const ProjectorSet& set,
                           const ReconstructOptions& opt) {
  return reconstruct(problem_from_counts(counts, set, opt), opt);
}

PauliCoefficients pauli_coefficients(const Eigen::MatrixXcd& rho) {
  if (rho.rows() != 4 || rho.cols() != 4)
    throw ValidationError("Pauli coefficients need a two-qubit (4x4) matrix, got " + std::to_string(rho.rows()) +
                          "x" + std::to_string(rho.cols()));
  const auto s = paulis();
  PauliCoefficients c;
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n)
      c.t(m, n) = trace_prod(rho, kron(s[static_cast<std::size_t>(m)], s[static_cast<std::size_t>(n)])) / 4.0;
  return c;
}

Eigen::MatrixXcd from_pauli(const PauliCoefficients& c) {
  const auto s = paulis();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(4, 4);
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) out += c.t(m, n) * kron(s[static_cast<std::size_t>(m)], s[static_cast<std::size_t>(n)]);
  return out;
}

std::vector<CountRecord> ingest_counts(std::istream& in, const ProjectorSet& set) {
  std::vector<int> lines;
  auto records = experiment::read_counts_csv(in, &lines);
  std::map<std::size_t, int> seen;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    const auto i = set.find(rec.setting_a, rec.setting_b);
    if (!i)
      throw ValidationError("line " + std::to_string(lines[r]) + ": unknown setting (" + rec.setting_a + ", " +
                            rec.setting_b + ") for " + to_string(set.kind));
    const auto [it, fresh] = seen.emplace(*i, lines[r]);
    if (!fresh)
      throw ValidationError("line " + std::to_string(lines[r]) + ": setting " + set.entries[*i].id() +
                            " duplicates line " + std::to_string(it->second));
  }
  return records;
}

std::vector<CountRecord> ingest_counts(const std::string& path, const ProjectorSet& set) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open count file '" + path + "'");
  try {
    return ingest_counts(in, set);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<CountRecord> simulate_tomography(const Eigen::MatrixXcd& rho, const ProjectorSet& set,
                                             const experiment::CountModel& model, std::uint64_t seed) {
  const Eigen::VectorXd p = predicted(set, rho);
  std::vector<CountRecord> out;
  out.reserve(set.entries.size());
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    const auto& e = set.entries[i];
    out.push_back(experiment::simulate_counts(std::clamp(p(static_cast<Eigen::Index>(i)), 0.0, 1.0), model,
                                              experiment::derive_seed(seed, experiment::hash_string(e.id())),
                                              e.setting_a, e.setting_b));
  }
  return out;
}

}  // namespace qsky::tomography
