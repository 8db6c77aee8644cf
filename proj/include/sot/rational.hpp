#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <string>

#include "sot/common.hpp"

namespace sot {

using Rational = boost::multiprecision::cpp_rational;

/// Parse a decimal literal ("-1.25e-3", "0.75", "3") into an exact rational.
inline Rational parse_rational(const std::string& text) {
    using boost::multiprecision::cpp_int;
    std::size_t i = 0;
    const std::size_t n = text.size();
    if (n == 0) throw ParseError("empty number");
    bool neg = false;
    if (text[i] == '+' || text[i] == '-') {
        neg = text[i] == '-';
        ++i;
    }
    cpp_int mantissa = 0;
    long frac_digits = 0;
    bool any_digit = false;
    for (; i < n && text[i] >= '0' && text[i] <= '9'; ++i) {
        mantissa = mantissa * 10 + (text[i] - '0');
        any_digit = true;
    }
    if (i < n && text[i] == '.') {
        ++i;
        for (; i < n && text[i] >= '0' && text[i] <= '9'; ++i) {
            mantissa = mantissa * 10 + (text[i] - '0');
            ++frac_digits;
            any_digit = true;
        }
    }
    if (i < n && text[i] == '/') {
        // rational literal p/q
        if (frac_digits != 0) throw ParseError("bad rational literal: " + text);
        Rational denom = parse_rational(text.substr(i + 1));
        if (denom == 0) throw ParseError("zero denominator: " + text);
        Rational r = Rational(mantissa) / denom;
        return neg ? -r : r;
    }
    long exp10 = 0;
    if (i < n && (text[i] == 'e' || text[i] == 'E')) {
        ++i;
        bool eneg = false;
        if (i < n && (text[i] == '+' || text[i] == '-')) {
            eneg = text[i] == '-';
            ++i;
        }
        if (i >= n) throw ParseError("bad exponent: " + text);
        for (; i < n && text[i] >= '0' && text[i] <= '9'; ++i) exp10 = exp10 * 10 + (text[i] - '0');
        if (eneg) exp10 = -exp10;
    }
    if (i != n || !any_digit) throw ParseError("bad number: " + text);
    long shift = exp10 - frac_digits;
    cpp_int num = mantissa, den = 1;
    if (shift > 0)
        for (long k = 0; k < shift; ++k) num *= 10;
    else
        for (long k = 0; k < -shift; ++k) den *= 10;
    Rational r(num, den);
    return neg ? -r : r;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline double to_double(double x) { return x; }

}  // namespace sot
