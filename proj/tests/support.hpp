#pragma once

// Random states and small helpers shared by the unit tests.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>

namespace qsky::testing {

using Complex = std::complex<double>;

inline Eigen::VectorXcd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v.normalized();
}

/// Ginibre-distributed density matrix of full rank.
inline Eigen::MatrixXcd random_density(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
  Eigen::MatrixXcd r = a * a.adjoint();
  return r / r.trace().real();
}

inline double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

/// Global-phase-insensitive distance between two vectors.
inline double phase_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const Complex ov = b.dot(a);
  const Complex ph = std::abs(ov) > 0 ? ov / std::abs(ov) : Complex(1.0);
  return (a - ph * b).cwiseAbs().maxCoeff();
}

}  // namespace qsky::testing
