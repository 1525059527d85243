#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <string>

#include "dosefind/error.hpp"

namespace dosefind {

__extension__ using int128 = __int128;

/// Exact ratio of two 64-bit integers, always stored reduced with a positive
/// denominator. Used for toxicity frequencies and the decimal thresholds they
/// are compared against, so that boundary membership (closed vs open
/// intervals) is decided without rounding.
class Rational {
public:
    /// Denominator used when snapping a decimal input such as 0.3 or 0.05.
    static constexpr std::int64_t kDecimalScale = 1'000'000'000'000;

    constexpr Rational() = default;
    constexpr Rational(std::int64_t integer) : num_(integer), den_(1) {}  // NOLINT(google-explicit-constructor)
    Rational(std::int64_t num, std::int64_t den) { assign(num, den); }

    /// Nearest multiple of 1e-12. Exact for any decimal with at most twelve
    /// fractional digits, which covers every threshold a user types.
    static Rational from_decimal(double x) {
        DOSEFIND_REQUIRE(std::isfinite(x) && std::fabs(x) < 1e6, ErrorCode::InvalidInput,
                         "value not representable as a rational: " + std::to_string(x));
        return Rational(std::llround(x * static_cast<double>(kDecimalScale)), kDecimalScale);
    }

    constexpr std::int64_t num() const { return num_; }
    constexpr std::int64_t den() const { return den_; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string str() const { return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return from_wide(int128{a.num_} * b.den_ + int128{b.num_} * a.den_, int128{a.den_} * b.den_);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return from_wide(int128{a.num_} * b.den_ - int128{b.num_} * a.den_, int128{a.den_} * b.den_);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return from_wide(int128{a.num_} * b.num_, int128{a.den_} * b.den_);
    }
    friend Rational abs(const Rational& a) { return a.num_ < 0 ? Rational(-a.num_, a.den_) : a; }

    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
        return int128{a.num_} * b.den_ <=> int128{b.num_} * a.den_;
    }
    friend bool operator==(const Rational& a, const Rational& b) = default;

private:
    void assign(std::int64_t num, std::int64_t den) {
        DOSEFIND_REQUIRE(den != 0, ErrorCode::InvalidInput, "rational with zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const std::int64_t g = std::gcd(num, den);
        num_ = g > 1 ? num / g : num;
        den_ = g > 1 ? den / g : den;
    }

    static int128 gcd_wide(int128 a, int128 b) {
        if (a < 0) a = -a;
        if (b < 0) b = -b;
        while (b != 0) {
            const int128 t = a % b;
            a = b;
            b = t;
        }
        return a;
    }

    static Rational from_wide(int128 num, int128 den) {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const int128 g = gcd_wide(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
        constexpr int128 limit = INT64_MAX;
        DOSEFIND_REQUIRE(num <= limit && -num <= limit && den <= limit, ErrorCode::InvalidInput,
                         "rational arithmetic overflow");
        Rational r;
        r.num_ = static_cast<std::int64_t>(num);
        r.den_ = static_cast<std::int64_t>(den);
        return r;
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

}  // namespace dosefind
