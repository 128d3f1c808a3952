#pragma once

#include <algorithm>
#include <vector>

namespace mgcn {

// Per-node sorted neighbor id lists for one hop size. Symmetric and
// self-inclusive: j in sets[i] iff i in sets[j], and i is always in sets[i].
struct NeighborhoodSets {
  std::vector<std::vector<int>> sets;

  int n() const { return static_cast<int>(sets.size()); }

  bool contains(int i, int j) const {
    const auto& s = sets[i];
    return std::binary_search(s.begin(), s.end(), j);
  }
};

}  // namespace mgcn
