#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace sns {

using Rational = boost::rational<std::int64_t>;

// Always "p/q" with q >= 1.
std::string to_string(const Rational& r);

// Accepts "p/q", "p", or a terminating decimal such as "-2.55".
Rational parse_rational(std::string_view text);

double to_double(const Rational& r);

}  // namespace sns
