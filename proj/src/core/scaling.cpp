#include "sns/core/scaling.hpp"

#include <stdexcept>

namespace sns {

Scaling::Scaling(int time_weight, int dim) : s0(time_weight), d(dim) {
    if (time_weight < 1) throw std::invalid_argument("scaling: time weight must be >= 1");
    if (dim < 1) throw std::invalid_argument("scaling: dimension must be >= 1");
}

MultiIndex zero_index(int d) { return MultiIndex(static_cast<std::size_t>(d) + 1, 0); }

MultiIndex unit_index(int d, int axis) {
    MultiIndex k = zero_index(d);
    k.at(static_cast<std::size_t>(axis)) = 1;
    return k;
}

bool is_zero(const MultiIndex& k) {
    for (int v : k)
        if (v != 0) return false;
    return true;
}

MultiIndex add(const MultiIndex& a, const MultiIndex& b) {
    if (a.size() != b.size()) throw std::invalid_argument("multi-index length mismatch");
    MultiIndex r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

int index_weight(const MultiIndex& k, const Scaling& s) {
    const auto n = k.size();
    int w = 0;
    if (n == static_cast<std::size_t>(s.d) + 1) {
        for (std::size_t i = 0; i < n; ++i) {
            if (k[i] < 0) throw std::invalid_argument("multi-index entries must be >= 0");
            w += s.weight(static_cast<int>(i)) * k[i];
        }
    } else if (n == static_cast<std::size_t>(s.d)) {
        for (int v : k) {
            if (v < 0) throw std::invalid_argument("multi-index entries must be >= 0");
            w += v;
        }
    } else {
        throw std::invalid_argument("multi-index length does not match the scaling");
    }
    return w;
}

std::string to_string(const MultiIndex& k) {
    std::string out = "(";
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(k[i]);
    }
    return out + ")";
}

}  // namespace sns
