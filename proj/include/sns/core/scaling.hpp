#pragma once

#include <string>
#include <vector>

namespace sns {

// Anisotropic scaling (s0, 1, ..., 1) on R^{1+d}; axis 0 is time.
struct Scaling {
    int s0 = 2;
    int d = 3;

    Scaling() = default;
    Scaling(int time_weight, int dim);

    int weight(int axis) const { return axis == 0 ? s0 : 1; }
    int dimension() const { return s0 + d; }  // |s|
};

// Multi-index over time + space (length d+1) or space only (length d).
using MultiIndex = std::vector<int>;

MultiIndex zero_index(int d);
MultiIndex unit_index(int d, int axis);
bool is_zero(const MultiIndex& k);
MultiIndex add(const MultiIndex& a, const MultiIndex& b);

// |k|_s; a length-d index is treated as purely spatial.
int index_weight(const MultiIndex& k, const Scaling& s);

std::string to_string(const MultiIndex& k);

}  // namespace sns
