#include "qsky/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "qsky/error.hpp"

namespace qsky::hilbert {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
const Complex kI{0.0, 1.0};

std::optional<std::size_t> index_of(const std::vector<int>& values, int v) {
  auto it = std::find(values.begin(), values.end(), v);
  if (it == values.end()) return std::nullopt;
  return static_cast<std::size_t>(it - values.begin());
}

BasisLabel* find_photon_mut(Ket& k, Photon p) {
  for (auto& l : k)
    if (l.photon == p) return &l;
  return nullptr;
}

bool has_any_field(const BasisLabel& l) {
  return l.wavelength.has_value() || l.pol.has_value() || l.oam.has_value();
}

// Splits a ket into the kept part (only the selected fields) and the rest.
std::pair<Ket, Ket> split(const Ket& k, std::span<const DofRef> keep) {
  Ket kept, rest;
  for (const auto& l : k) {
    BasisLabel a{l.photon, {}, {}, {}};
    BasisLabel b = l;
    for (Dof d : {Dof::wavelength, Dof::pol, Dof::oam}) {
      const bool selected =
          std::find(keep.begin(), keep.end(), DofRef{l.photon, d}) != keep.end();
      if (selected) {
        set_dof(a, d, dof_value(l, d));
        set_dof(b, d, std::nullopt);
      }
    }
    if (has_any_field(a)) kept.push_back(a);
    if (has_any_field(b)) rest.push_back(b);
  }
  return {kept, rest};
}

}  // namespace

void WavelengthConfig::validate() const {
  if (pump_nm <= 0 || lambda1_nm <= 0 || lambda2_nm <= 0)
    throw ValidationError("wavelengths must be positive");
  const double mismatch = std::abs(1.0 / lambda1_nm + 1.0 / lambda2_nm - 1.0 / pump_nm);
  if (mismatch >= 1e-6)
    throw ValidationError("wavelengths violate energy conservation: |1/l1 + 1/l2 - 1/l0| = " +
                          std::to_string(mismatch) + " nm^-1");
}

BasisLabel label(Photon photon, std::optional<int> ell, std::optional<Pol> pol,
                 std::optional<Wavelength> wavelength) {
  BasisLabel l;
  l.photon = photon;
  l.wavelength = wavelength;
  l.pol = pol;
  if (ell) l.oam = OamIndex{*ell};
  return l;
}

std::optional<int> dof_value(const BasisLabel& l, Dof dof) {
  switch (dof) {
    case Dof::oam:
      if (l.oam) return l.oam->ell;
      return std::nullopt;
    case Dof::pol:
      if (l.pol) return static_cast<int>(*l.pol);
      return std::nullopt;
    case Dof::wavelength:
      if (l.wavelength) return static_cast<int>(*l.wavelength);
      return std::nullopt;
  }
  return std::nullopt;
}

void set_dof(BasisLabel& l, Dof dof, std::optional<int> value) {
  switch (dof) {
    case Dof::oam:
      l.oam = value ? std::optional<OamIndex>(OamIndex{*value}) : std::nullopt;
      return;
    case Dof::pol:
      if (value && (*value < 0 || *value > 1)) throw ValidationError("polarization index out of range");
      l.pol = value ? std::optional<Pol>(static_cast<Pol>(*value)) : std::nullopt;
      return;
    case Dof::wavelength:
      if (value && (*value < 0 || *value > 1)) throw ValidationError("wavelength index out of range");
      l.wavelength = value ? std::optional<Wavelength>(static_cast<Wavelength>(*value)) : std::nullopt;
      return;
  }
}

Ket make_ket(std::vector<BasisLabel> labels) {
  std::sort(labels.begin(), labels.end());
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i].photon == labels[i - 1].photon)
      throw CompositionError("ket lists photon " + to_string(labels[i].photon) + " twice");
  return labels;
}

const BasisLabel* find_photon(const Ket& k, Photon p) {
  for (const auto& l : k)
    if (l.photon == p) return &l;
  return nullptr;
}

std::string to_string(Photon p) { return p == Photon::A ? "A" : "B"; }
std::string to_string(Pol p) { return p == Pol::R ? "R" : "L"; }
std::string to_string(Wavelength w) { return w == Wavelength::lambda1 ? "lambda1" : "lambda2"; }
std::string to_string(Dof d) {
  switch (d) {
    case Dof::oam: return "oam";
    case Dof::pol: return "pol";
    case Dof::wavelength: return "wavelength";
  }
  return "?";
}

std::string to_string(const BasisLabel& l) {
  std::ostringstream os;
  os << '|';
  bool first = true;
  auto sep = [&] {
    if (!first) os << ',';
    first = false;
  };
  if (l.oam) {
    sep();
    os << l.oam->ell;
  }
  if (l.pol) {
    sep();
    os << to_string(*l.pol);
  }
  if (l.wavelength) {
    sep();
    os << to_string(*l.wavelength);
  }
  os << ">_" << to_string(l.photon);
  return os.str();
}

std::string to_string(const Ket& k) {
  std::string s;
  for (const auto& l : k) s += to_string(l);
  return s.empty() ? "|>" : s;
}

std::string to_string(const DofRef& r) { return to_string(r.photon) + "." + to_string(r.dof); }

// ---------------------------------------------------------------------------

PureState::PureState(Terms terms) {
  for (auto& [k, a] : terms) {
    for (std::size_t i = 1; i < k.size(); ++i)
      if (!(k[i - 1].photon < k[i].photon))
        throw CompositionError("ket " + to_string(k) + " is not sorted by unique photon");
    if (std::abs(a) >= kTol.prune_eps) terms_.emplace(k, a);
  }
}

PureState PureState::from_ket(Ket k, Complex amplitude) {
  Terms t;
  t.emplace(make_ket(std::move(k)), amplitude);
  return PureState(std::move(t));
}

double PureState::norm_squared() const {
  double s = 0.0;
  for (const auto& [k, a] : terms_) s += std::norm(a);
  return s;
}

double PureState::norm() const { return std::sqrt(norm_squared()); }

PureState PureState::normalized() const {
  const double n = norm();
  if (n == 0.0) throw NumericalError("cannot normalize the zero state");
  return scaled(1.0 / n);
}

PureState PureState::scaled(Complex factor) const {
  Terms t;
  for (const auto& [k, a] : terms_) t.emplace(k, a * factor);
  return PureState(std::move(t));
}

Complex PureState::amplitude(const Ket& k) const {
  auto it = terms_.find(k);
  return it == terms_.end() ? Complex{} : it->second;
}

std::vector<Photon> PureState::photons() const {
  std::set<Photon> ps;
  for (const auto& [k, a] : terms_)
    for (const auto& l : k) ps.insert(l.photon);
  return {ps.begin(), ps.end()};
}

PureState operator+(const PureState& a, const PureState& b) {
  PureState::Terms t = a.terms();
  for (const auto& [k, amp] : b.terms()) t[k] += amp;
  return PureState(std::move(t));
}

Complex inner(const PureState& a, const PureState& b) {
  Complex s{};
  for (const auto& [k, amp] : a.terms()) s += std::conj(amp) * b.amplitude(k);
  return s;
}

PureState tensor(const PureState& a, const PureState& b) {
  const auto pa = a.photons();
  const auto pb = b.photons();
  for (Photon p : pa)
    if (std::find(pb.begin(), pb.end(), p) != pb.end())
      throw CompositionError("tensor product of states sharing photon " + to_string(p));
  PureState::Terms t;
  for (const auto& [ka, aa] : a.terms())
    for (const auto& [kb, ab] : b.terms()) {
      Ket k = ka;
      k.insert(k.end(), kb.begin(), kb.end());
      t[make_ket(std::move(k))] += aa * ab;
    }
  return PureState(std::move(t));
}

// ---------------------------------------------------------------------------

Eigen::Vector2cd pol_vector(PolSetting s) {
  const Eigen::Vector2cd r(1.0, 0.0);
  const Eigen::Vector2cd l(0.0, 1.0);
  const Eigen::Vector2cd h = (r + l) * kInvSqrt2;
  const Eigen::Vector2cd v = (r - l) * (kInvSqrt2 / kI);
  switch (s) {
    case PolSetting::R: return r;
    case PolSetting::L: return l;
    case PolSetting::H: return h;
    case PolSetting::V: return v;
    case PolSetting::D: return (h + v) * kInvSqrt2;
    case PolSetting::A: return (h - v) * kInvSqrt2;
  }
  return r;
}

std::string to_string(PolSetting s) {
  static const char* names[] = {"R", "L", "H", "V", "D", "A"};
  return names[static_cast<int>(s)];
}

PolSetting parse_pol_setting(const std::string& s) {
  for (PolSetting p : {PolSetting::R, PolSetting::L, PolSetting::H, PolSetting::V, PolSetting::D,
                       PolSetting::A})
    if (to_string(p) == s) return p;
  throw ValidationError("unknown polarization setting '" + s + "'");
}

Eigen::Matrix2cd basis_matrix(PolBasis b) {
  Eigen::Matrix2cd m;
  switch (b) {
    case PolBasis::circular:
      m.col(0) = pol_vector(PolSetting::R);
      m.col(1) = pol_vector(PolSetting::L);
      break;
    case PolBasis::linear:
      m.col(0) = pol_vector(PolSetting::H);
      m.col(1) = pol_vector(PolSetting::V);
      break;
    case PolBasis::diagonal:
      m.col(0) = pol_vector(PolSetting::D);
      m.col(1) = pol_vector(PolSetting::A);
      break;
  }
  return m;
}

Eigen::Vector2cd convert_amplitudes(const Eigen::Vector2cd& amps, PolBasis from, PolBasis to) {
  return basis_matrix(to).adjoint() * (basis_matrix(from) * amps);
}

// ---------------------------------------------------------------------------

void ProjectorOp::validate() const {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0)
    throw ValidationError("projector '" + id + "' is not a square matrix");
  if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > kTol.hermiticity)
    throw ValidationError("projector '" + id + "' is not Hermitian");
  if ((matrix * matrix - matrix).cwiseAbs().maxCoeff() > kTol.hermiticity)
    throw ValidationError("projector '" + id + "' is not idempotent");
  if (support && static_cast<Eigen::Index>(support->values.size()) != matrix.rows())
    throw ValidationError("projector '" + id + "' support size does not match its matrix");
}

ProjectorOp rank_one(std::string id, std::string descriptor, const Eigen::VectorXcd& v,
                     std::optional<LocalSupport> support) {
  const double n = v.norm();
  if (n == 0.0) throw ValidationError("projector '" + id + "' built from the zero vector");
  const Eigen::VectorXcd u = v / n;
  ProjectorOp p{std::move(id), std::move(descriptor), u * u.adjoint(), std::move(support)};
  p.validate();
  return p;
}

ProjectorOp pol_projector(Photon photon, PolSetting s) {
  return rank_one(to_string(s), "photon " + to_string(photon) + " polarization " + to_string(s),
                  pol_vector(s), LocalSupport{photon, Dof::pol, {0, 1}});
}

ProjectorOp oam_projector(Photon photon, std::vector<int> ells, const Eigen::VectorXcd& v,
                          std::string id) {
  std::string desc = "photon " + to_string(photon) + " OAM superposition over {";
  for (std::size_t i = 0; i < ells.size(); ++i) desc += (i ? "," : "") + std::to_string(ells[i]);
  desc += "}";
  return rank_one(std::move(id), desc, v, LocalSupport{photon, Dof::oam, std::move(ells)});
}

ProjectorOp wavelength_projector(Photon photon, const Eigen::Vector2cd& v, std::string id) {
  return rank_one(std::move(id), "photon " + to_string(photon) + " wavelength superposition", v,
                  LocalSupport{photon, Dof::wavelength, {0, 1}});
}

PureState apply_local(const PureState& s, const LocalSupport& support, const Eigen::MatrixXcd& m) {
  const auto n = static_cast<Eigen::Index>(support.values.size());
  if (m.rows() != n || m.cols() != n)
    throw ValidationError("local operator does not match its declared support");
  PureState::Terms out;
  for (const auto& [k, a] : s.terms()) {
    const BasisLabel* l = find_photon(k, support.photon);
    if (!l)
      throw CompositionError("operator addresses photon " + to_string(support.photon) +
                             " absent from ket " + to_string(k));
    const auto v = dof_value(*l, support.dof);
    if (!v)
      throw CompositionError("operator addresses " + to_string(support.dof) + " of photon " +
                             to_string(support.photon) + " absent from ket " + to_string(k));
    const auto col = index_of(support.values, *v);
    if (!col) continue;
    for (Eigen::Index row = 0; row < n; ++row) {
      const Complex c = m(row, static_cast<Eigen::Index>(*col));
      if (c == Complex{}) continue;
      Ket nk = k;
      set_dof(*find_photon_mut(nk, support.photon), support.dof,
              support.values[static_cast<std::size_t>(row)]);
      out[nk] += c * a;
    }
  }
  return PureState(std::move(out));
}

Projected project(const PureState& s, const ProjectorOp& p, double p_floor) {
  if (!p.support) throw ValidationError("projector '" + p.id + "' has no declared support");
  const double n2 = s.norm_squared();
  if (n2 == 0.0) throw NumericalError("cannot project the zero state");
  PureState out = apply_local(s, *p.support, p.matrix);
  const double prob = out.norm_squared() / n2;
  if (prob < p_floor) return {std::nullopt, prob};
  return {out.normalized(), prob};
}

Projected contract(const PureState& s, const LocalSupport& support, const Eigen::VectorXcd& v,
                   double p_floor) {
  if (static_cast<std::size_t>(v.size()) != support.values.size())
    throw ValidationError("contraction vector does not match its declared support");
  const double n2 = s.norm_squared();
  if (n2 == 0.0) throw NumericalError("cannot contract the zero state");
  const double vn = v.norm();
  if (vn == 0.0) throw ValidationError("contraction with the zero vector");
  const Eigen::VectorXcd u = v / vn;
  PureState::Terms out;
  for (const auto& [k, a] : s.terms()) {
    const BasisLabel* l = find_photon(k, support.photon);
    if (!l || !dof_value(*l, support.dof))
      throw CompositionError("contraction addresses " + to_string(support.dof) + " of photon " +
                             to_string(support.photon) + " absent from ket " + to_string(k));
    const auto idx = index_of(support.values, *dof_value(*l, support.dof));
    if (!idx) continue;
    Ket nk = k;
    BasisLabel* nl = find_photon_mut(nk, support.photon);
    set_dof(*nl, support.dof, std::nullopt);
    if (!has_any_field(*nl)) nk.erase(nk.begin() + (nl - nk.data()));
    out[nk] += std::conj(u(static_cast<Eigen::Index>(*idx))) * a;
  }
  PureState r(std::move(out));
  const double prob = r.norm_squared() / n2;
  if (prob < p_floor) return {std::nullopt, prob};
  return {r.normalized(), prob};
}

// ---------------------------------------------------------------------------

void check_density(const Eigen::MatrixXcd& m, const Tolerances& tol) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ValidationError("density matrix must be square");
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm > tol.hermiticity)
    throw ValidationError("density matrix not Hermitian (max deviation " + std::to_string(herm) + ")");
  const double tr = m.trace().real();
  if (std::abs(tr - 1.0) > tol.trace)
    throw ValidationError("density matrix trace " + std::to_string(tr) + " != 1");
  const Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < tol.psd_floor)
    throw ValidationError("density matrix has negative eigenvalue " +
                          std::to_string(es.eigenvalues().minCoeff()));
}

bool is_density(const Eigen::MatrixXcd& m, const Tolerances& tol) {
  try {
    check_density(m, tol);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

DensityMatrix::DensityMatrix(std::vector<Ket> basis, Eigen::MatrixXcd matrix)
    : basis_(std::move(basis)), matrix_(std::move(matrix)) {
  if (static_cast<Eigen::Index>(basis_.size()) != matrix_.rows())
    throw ValidationError("density matrix basis has " + std::to_string(basis_.size()) +
                          " kets for dimension " + std::to_string(matrix_.rows()));
  check_density(matrix_);
  std::set<Ket> unique(basis_.begin(), basis_.end());
  if (unique.size() != basis_.size()) throw ValidationError("density matrix basis has duplicate kets");
}

Eigen::VectorXd DensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(matrix_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double DensityMatrix::purity() const { return (matrix_ * matrix_).trace().real(); }

DensityMatrix density_from_pure(const PureState& s) {
  if (s.empty()) throw ValidationError("density of the empty state");
  if (std::abs(s.norm_squared() - 1.0) > 2 * kTol.norm)
    throw ValidationError("density_from_pure requires a normalized state (norm^2 = " +
                          std::to_string(s.norm_squared()) + ")");

  // Shape: which fields each photon carries; must agree across the support.
  const Ket& first = s.terms().begin()->first;
  std::vector<DofRef> refs;
  for (const auto& l : first)
    for (Dof d : {Dof::wavelength, Dof::pol, Dof::oam})
      if (dof_value(l, d)) refs.push_back({l.photon, d});
  std::vector<std::set<int>> values(refs.size());
  for (const auto& [k, a] : s.terms()) {
    if (k.size() != first.size())
      throw CompositionError("state mixes kets with different photon content");
    std::size_t count = 0;
    for (const auto& l : k)
      for (Dof d : {Dof::wavelength, Dof::pol, Dof::oam})
        if (dof_value(l, d)) ++count;
    if (count != refs.size()) throw CompositionError("state mixes kets with different label shapes");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const BasisLabel* l = find_photon(k, refs[i].photon);
      if (!l || !dof_value(*l, refs[i].dof))
        throw CompositionError("state mixes kets with different label shapes");
      values[i].insert(*dof_value(*l, refs[i].dof));
    }
  }

  std::vector<Ket> basis{first};
  for (auto& l : basis.front())
    for (Dof d : {Dof::wavelength, Dof::pol, Dof::oam})
      if (dof_value(l, d)) set_dof(l, d, 0);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::vector<Ket> next;
    for (const auto& k : basis)
      for (int v : values[i]) {
        Ket nk = k;
        set_dof(*find_photon_mut(nk, refs[i].photon), refs[i].dof, v);
        next.push_back(std::move(nk));
      }
    basis = std::move(next);
  }
  std::sort(basis.begin(), basis.end());

  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) psi(static_cast<Eigen::Index>(i)) = s.amplitude(basis[i]);
  Eigen::MatrixXcd m = psi * psi.adjoint();
  return DensityMatrix(std::move(basis), std::move(m));
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const DofRef> keep) {
  for (const auto& r : keep)
    for (const auto& k : rho.basis()) {
      const BasisLabel* l = find_photon(k, r.photon);
      if (!l || !dof_value(*l, r.dof))
        throw CompositionError("partial trace keeps " + to_string(r) + " which basis ket " +
                               to_string(k) + " does not carry");
    }

  std::map<Ket, Eigen::Index> kept_index, rest_index;
  std::vector<std::pair<Ket, Ket>> parts;
  parts.reserve(rho.basis().size());
  for (const auto& k : rho.basis()) {
    auto p = split(k, keep);
    kept_index.emplace(p.first, 0);
    rest_index.emplace(p.second, 0);
    parts.push_back(std::move(p));
  }
  if (kept_index.size() * rest_index.size() != rho.basis().size())
    throw CompositionError("basis does not factorize over the requested subsystems (" +
                           std::to_string(kept_index.size()) + " x " +
                           std::to_string(rest_index.size()) + " != " +
                           std::to_string(rho.basis().size()) + ")");
  Eigen::Index n = 0;
  for (auto& [k, i] : kept_index) i = n++;
  n = 0;
  for (auto& [k, i] : rest_index) i = n++;

  const auto dk = static_cast<Eigen::Index>(kept_index.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dk, dk);
  const auto& m = rho.matrix();
  for (Eigen::Index i = 0; i < rho.dim(); ++i)
    for (Eigen::Index j = 0; j < rho.dim(); ++j) {
      const auto& [ki, ri] = parts[static_cast<std::size_t>(i)];
      const auto& [kj, rj] = parts[static_cast<std::size_t>(j)];
      if (ri != rj) continue;
      out(kept_index.at(ki), kept_index.at(kj)) += m(i, j);
    }
  std::vector<Ket> basis;
  for (const auto& [k, i] : kept_index) basis.push_back(k);
  out = 0.5 * (out + out.adjoint()).eval();
  return DensityMatrix(std::move(basis), std::move(out));
}

Eigen::MatrixXcd embed(const std::vector<Ket>& basis, std::span<const ProjectorOp> ops) {
  std::vector<DofRef> refs;
  for (const auto& op : ops) {
    if (!op.support) throw ValidationError("projector '" + op.id + "' has no declared support");
    const DofRef r{op.support->photon, op.support->dof};
    if (std::find(refs.begin(), refs.end(), r) != refs.end())
      throw CompositionError("projectors overlap on subsystem " + to_string(r));
    refs.push_back(r);
  }
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
  std::vector<Ket> rests;
  std::vector<std::vector<std::optional<std::size_t>>> idx(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    rests.push_back(split(basis[i], refs).second);
    for (const auto& op : ops) {
      const BasisLabel* l = find_photon(basis[i], op.support->photon);
      const auto v = l ? dof_value(*l, op.support->dof) : std::nullopt;
      if (!v)
        throw CompositionError("projector '" + op.id + "' addresses a field missing from " +
                               to_string(basis[i]));
      idx[i].push_back(index_of(op.support->values, *v));
    }
  }
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = 0; j < basis.size(); ++j) {
      if (rests[i] != rests[j]) continue;
      Complex c = 1.0;
      for (std::size_t o = 0; o < ops.size() && c != Complex{}; ++o) {
        if (!idx[i][o] || !idx[j][o]) {
          c = 0.0;
          break;
        }
        c *= ops[o].matrix(static_cast<Eigen::Index>(*idx[i][o]), static_cast<Eigen::Index>(*idx[j][o]));
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
    }
  return out;
}

double expectation(const DensityMatrix& rho, std::span<const ProjectorOp> ops) {
  return (embed(rho.basis(), ops) * rho.matrix()).trace().real();
}

Eigen::MatrixXcd sqrtm_psd(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

double fidelity(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& target) {
  if (rho.rows() != target.rows() || rho.cols() != target.cols())
    throw CompositionError("fidelity of matrices with different dimensions");
  const Eigen::MatrixXcd st = sqrtm_psd(target);
  const Eigen::MatrixXcd inner = st * rho * st;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (inner + inner.adjoint()),
                                                      Eigen::EigenvaluesOnly);
  const double t = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::clamp(t * t, 0.0, 1.0);
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& target) {
  if (rho.basis() != target.basis())
    throw CompositionError("fidelity requires identical basis ordering");
  return fidelity(rho.matrix(), target.matrix());
}

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw CompositionError("trace distance of matrices with different dimensions");
  const Eigen::MatrixXcd d = a - b;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace qsky::hilbert
