#include "qsky/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qsky/error.hpp"

namespace qsky::io {

using hilbert::BasisLabel;
using hilbert::Ket;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
    std::size_t i = 0;
    while (i < f.size() && (f[i] == ' ' || f[i] == '\t')) ++i;
    f.erase(0, i);
  }
  return out;
}

json to_json(const BasisLabel& l) {
  json j;
  j["photon"] = hilbert::to_string(l.photon);
  if (l.wavelength) j["wavelength"] = hilbert::to_string(*l.wavelength);
  if (l.pol) j["pol"] = hilbert::to_string(*l.pol);
  if (l.oam) j["oam"] = l.oam->ell;
  return j;
}

json to_json(const Ket& k) {
  json j = json::array();
  for (const auto& l : k) j.push_back(to_json(l));
  return j;
}

BasisLabel label_from_json(const json& j) {
  if (!j.is_object() || !j.contains("photon")) throw ValidationError("basis label needs a \"photon\" field");
  BasisLabel l;
  const auto photon = j.at("photon").get<std::string>();
  if (photon == "A") l.photon = hilbert::Photon::A;
  else if (photon == "B") l.photon = hilbert::Photon::B;
  else throw ValidationError("unknown photon '" + photon + "'");
  if (j.contains("wavelength")) {
    const auto w = j.at("wavelength").get<std::string>();
    if (w == "lambda1") l.wavelength = hilbert::Wavelength::lambda1;
    else if (w == "lambda2") l.wavelength = hilbert::Wavelength::lambda2;
    else throw ValidationError("unknown wavelength '" + w + "'");
  }
  if (j.contains("pol")) {
    const auto p = j.at("pol").get<std::string>();
    if (p == "R") l.pol = hilbert::Pol::R;
    else if (p == "L") l.pol = hilbert::Pol::L;
    else throw ValidationError("unknown polarization '" + p + "'");
  }
  if (j.contains("oam")) l.oam = hilbert::OamIndex{j.at("oam").get<int>()};
  return l;
}

Ket ket_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("ket must be a JSON array of labels");
  std::vector<BasisLabel> labels;
  for (const auto& e : j) labels.push_back(label_from_json(e));
  return hilbert::make_ket(std::move(labels));
}

json to_json(const hilbert::DensityMatrix& rho) {
  json j;
  j["dim"] = rho.dim();
  json basis = json::array();
  for (const auto& k : rho.basis()) basis.push_back(to_json(k));
  j["basis"] = std::move(basis);
  json entries = json::array();
  const auto& m = rho.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) entries.push_back({m(r, c).real(), m(r, c).imag()});
  j["entries"] = std::move(entries);
  return j;
}

hilbert::DensityMatrix density_from_json(const json& j) {
  try {
    const auto dim = j.at("dim").get<Eigen::Index>();
    if (dim <= 0) throw ValidationError("density matrix dim must be positive");
    const auto& entries = j.at("entries");
    if (static_cast<Eigen::Index>(entries.size()) != dim * dim)
      throw ValidationError("density matrix has " + std::to_string(entries.size()) + " entries for dim " +
                            std::to_string(dim));
    std::vector<Ket> basis;
    for (const auto& k : j.at("basis")) basis.push_back(ket_from_json(k));
    Eigen::MatrixXcd m(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) {
        const auto& e = entries.at(static_cast<std::size_t>(r * dim + c));
        m(r, c) = {e.at(0).get<double>(), e.at(1).get<double>()};
      }
    return hilbert::DensityMatrix(std::move(basis), std::move(m));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed density matrix JSON: ") + e.what());
  }
}

json to_json(const Eigen::VectorXd& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace qsky::io
