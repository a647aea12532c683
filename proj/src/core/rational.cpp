#include "sns/core/rational.hpp"

#include <charconv>
#include <stdexcept>

namespace sns {

std::string to_string(const Rational& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

namespace {

std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw std::invalid_argument("bad rational: '" + std::string(s) + "'");
    return v;
}

}  // namespace

Rational parse_rational(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (text.empty()) throw std::invalid_argument("bad rational: empty");
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        auto q = parse_int(text.substr(slash + 1));
        if (q == 0) throw std::invalid_argument("bad rational: zero denominator");
        return Rational(parse_int(text.substr(0, slash)), q);
    }
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
        bool neg = text.front() == '-';
        std::string digits(text.substr(0, dot));
        std::string frac(text.substr(dot + 1));
        if (frac.size() > 15) throw std::invalid_argument("bad rational: too many decimals");
        std::int64_t scale = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
        std::int64_t whole = (digits.empty() || digits == "-" || digits == "+") ? 0 : parse_int(digits);
        std::int64_t f = frac.empty() ? 0 : parse_int(frac);
        if (f < 0) throw std::invalid_argument("bad rational: '" + std::string(text) + "'");
        std::int64_t mag = (whole < 0 ? -whole : whole) * scale + f;
        return Rational(neg ? -mag : mag, scale);
    }
    return Rational(parse_int(text));
}

double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

}  // namespace sns
