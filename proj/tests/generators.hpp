#pragma once

// Small deterministic generators for property tests.

#include <cstdint>
#include <vector>

#include "latdiff/model.hpp"
#include "latdiff/sampler.hpp"

namespace gen {

inline latdiff::SpinConfiguration random_config(const latdiff::LatticeTorus& torus, latdiff::Rng& rng) {
  std::vector<std::int8_t> s(torus.sites());
  for (auto& v : s)
    v = rng.coin() ? 1 : -1;
  return latdiff::SpinConfiguration(torus, std::move(s));
}

/// Couplings with integer-over-8 values (exact in binary) on displacements
/// with max-norm <= range.
inline latdiff::CouplingMap random_coupling(int d, int range, latdiff::Rng& rng, bool ferro = false) {
  std::vector<latdiff::CouplingMap::Entry> e;
  std::vector<int> r(static_cast<std::size_t>(d), -range);
  while (true) {
    bool positive = false;
    for (int c : r) {
      if (c != 0) {
        positive = c > 0;
        break;
      }
    }
    if (positive && rng.below(2) == 0) {
      double v = static_cast<double>(rng.below(17)) / 8.0;
      if (!ferro && rng.coin())
        v = -v;
      e.push_back({r, v});
    }
    std::size_t i = r.size();
    while (i > 0 && r[i - 1] == range) {
      r[i - 1] = -range;
      --i;
    }
    if (i == 0)
      break;
    ++r[i - 1];
  }
  return latdiff::CouplingMap(d, e);
}

} // namespace gen
