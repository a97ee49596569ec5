#pragma once

namespace qsky {

struct Tolerances {
  double hermiticity = 1e-10;
  double psd_floor = -1e-9;
  double trace = 1e-10;
  double norm = 1e-12;
  double prune_eps = 1e-14;
  double p_floor = 1e-12;
};

inline constexpr Tolerances kTol{};

inline constexpr int kDefaultEllMax = 6;

}  // namespace qsky
