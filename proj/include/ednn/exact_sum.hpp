#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace ednn {

/// Fixed-point superaccumulator covering the full double range.
/// Addition is exact, so the final result does not depend on the order in
/// which values are accumulated. Used for every count/region summation so
/// that reductions over permuted tile sets are bit-identical.
class ExactAccumulator {
    // LSB of the accumulator sits at 2^-kBias; MSB headroom allows ~2^80
    // addends of the largest magnitude.
    static constexpr int kBias = 1074;          // |min subnormal double| = 2^-1074
    static constexpr int kTopExp = 1024;        // max double < 2^1024
    static constexpr int kHeadroom = 128;
    static constexpr int kBits = kBias + kTopExp + kHeadroom;
    static constexpr int kLimbs = (kBits + 63) / 64;

public:
    ExactAccumulator() { for (auto& l : limbs_) l = 0; }

    void add(double x) {
        if (x == 0.0) return;
        if (!std::isfinite(x)) {
            non_finite_ += x;
            has_non_finite_ = true;
            return;
        }
        int e;
        double f = std::frexp(x, &e);  // x = f * 2^e, |f| in [0.5, 1)
        auto m = static_cast<std::int64_t>(std::ldexp(f, 53));  // exact, 53 bits
        int offset = e - 53 + kBias;
        if (m >= 0)
            add_magnitude(static_cast<std::uint64_t>(m), offset);
        else
            sub_magnitude(static_cast<std::uint64_t>(-m), offset);
    }

    double result() const {
        if (has_non_finite_) return non_finite_;
        // Two's-complement sign in the top limb.
        bool negative = (limbs_[kLimbs - 1] >> 63) != 0;
        std::uint64_t mag[kLimbs];
        if (negative) {
            std::uint64_t carry = 1;
            for (int i = 0; i < kLimbs; ++i) {
                mag[i] = ~limbs_[i] + carry;
                carry = (carry != 0 && mag[i] == 0) ? 1 : 0;
            }
        } else {
            for (int i = 0; i < kLimbs; ++i) mag[i] = limbs_[i];
        }
        long double acc = 0.0L;
        for (int i = kLimbs - 1; i >= 0; --i) {
            if (mag[i] == 0 && acc == 0.0L) continue;
            acc = acc * 18446744073709551616.0L + static_cast<long double>(mag[i]);
            // Early out once further limbs cannot affect the 64-bit mantissa.
            if (i > 0 && acc >= 0x1p150L) {
                acc = std::ldexp(acc, 64 * i);
                return finalize(acc, negative);
            }
        }
        return finalize(acc, negative);
    }

private:
    static double finalize(long double acc, bool negative) {
        long double v = std::ldexp(acc, -kBias);
        return static_cast<double>(negative ? -v : v);
    }

    void add_magnitude(std::uint64_t m, int offset) {
        int limb = offset / 64, sh = offset % 64;
        unsigned __int128 wide = static_cast<unsigned __int128>(m) << sh;
        std::uint64_t lo = static_cast<std::uint64_t>(wide);
        std::uint64_t hi = static_cast<std::uint64_t>(wide >> 64);
        std::uint64_t carry = add_limb(limb, lo);
        carry += hi;
        for (int i = limb + 1; carry != 0 && i < kLimbs; ++i) {
            std::uint64_t c = add_limb(i, carry);
            carry = c;
        }
    }

    void sub_magnitude(std::uint64_t m, int offset) {
        int limb = offset / 64, sh = offset % 64;
        unsigned __int128 wide = static_cast<unsigned __int128>(m) << sh;
        std::uint64_t lo = static_cast<std::uint64_t>(wide);
        std::uint64_t hi = static_cast<std::uint64_t>(wide >> 64);
        std::uint64_t borrow = sub_limb(limb, lo);
        // Combined borrow and high part for the next limb.
        unsigned __int128 due = static_cast<unsigned __int128>(hi) + borrow;
        for (int i = limb + 1; due != 0 && i < kLimbs; ++i) {
            std::uint64_t d = static_cast<std::uint64_t>(due);
            std::uint64_t b = sub_limb(i, d);
            due = (due >> 64) + b;
        }
    }

    std::uint64_t add_limb(int i, std::uint64_t v) {
        std::uint64_t old = limbs_[i];
        limbs_[i] = old + v;
        return limbs_[i] < old ? 1u : 0u;
    }

    std::uint64_t sub_limb(int i, std::uint64_t v) {
        std::uint64_t old = limbs_[i];
        limbs_[i] = old - v;
        return old < v ? 1u : 0u;
    }

    std::uint64_t limbs_[kLimbs];
    double non_finite_ = 0.0;
    bool has_non_finite_ = false;
};

/// Order-invariant sum of a range of values.
template <typename T>
double exact_sum(std::span<const T> values) {
    ExactAccumulator acc;
    for (T v : values) acc.add(static_cast<double>(v));
    return acc.result();
}

}  // namespace ednn
