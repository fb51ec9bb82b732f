#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rangepc {

inline constexpr const char* kVersion = "rangepc 1.0.0";

// Precondition violation: caller passed something the contract forbids.
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Internal invariant / postcondition violation: a bug signal, not user error.
inline void ensure(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

// Compensated (Kahan) accumulator for long sums of mixed-sign terms.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

inline double sq(double x) { return x * x; }

// Floor division for possibly negative numerators.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return -floor_div(-a, b);
}

// Regularized lower incomplete gamma P(a,x), series + continued fraction.
double gamma_p(double a, double x);

// S(alpha, r) = sum_{k>=1} k^{-1-alpha} exp(-r/k), evaluated to near machine
// precision by direct summation plus a midpoint-rule tail integral.
double inverse_power_exp_series(double alpha, double r);

}  // namespace rangepc
