#pragma once

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <initializer_list>

namespace sns {

std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic seed for a sub-stream, e.g. derive_seed(master, {stream, step}).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// mt19937_64 with Boost's ziggurat normal: the algorithm is fixed by the
// library source, so draws are reproducible for a given seed.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }  // (0,1)
    double normal() { return normal_(engine_); }

private:
    boost::random::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_;
};

}  // namespace sns
