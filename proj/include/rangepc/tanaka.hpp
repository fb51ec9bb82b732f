#pragma once

#include <cstdint>

#include "rangepc/brw.hpp"
#include "rangepc/randwalk.hpp"

namespace rangepc {

// Pathwise verification of the martingale-problem identity and of the Tanaka
// local-time decompositions. The kernels are truncated at finite depth m and
// the exact leftover transition term is added back, so both identities hold
// to floating-point precision on every realization.

// Local time: sum_{n<N} Z_n(N(a)).
std::int64_t local_time(const Trajectory& traj, const ScaledSite& a, std::int64_t N);

// Residual of
//   Z_N(phi) = Z_0(phi) + (1+theta/R^{d-1}) sum_{n<N} Z_n(L phi)
//            + M_N(phi) + (theta/R^{d-1}) sum_{n<N} Z_n(phi)
// with M_N in increment form; returns |residual| / (1 + |Z_N(phi)|).
double verify_mp(const Trajectory& traj, const SupportFun& phi, std::int64_t N);

struct TanakaReport {
    double lhs = 0.0;                // (1+theta/R^{d-1}) [R] sum Z_n(N(a))
    double initial_kernel = 0.0;     // Z_0(kernel)
    double terminal_kernel = 0.0;    // -Z_N(kernel)
    double martingale = 0.0;         // M_N(kernel)
    double drift = 0.0;              // drift coefficient * sum Z_n(kernel)
    double correction = 0.0;         // exact truncation leftover
    double residual = 0.0;           // lhs - sum of parts
    double relative_residual = 0.0;  // |residual| / (1 + |lhs|)
    std::int64_t m = 0;
    std::int64_t N = 0;

    double rhs_total() const {
        return initial_kernel + terminal_kernel + martingale + drift + correction;
    }
};

// Evaluate both sides of the Tanaka identity on one trajectory with the
// depth-m truncated kernel (phi_a in d=3, g_a in d=2) plus its correction:
//   d=3: (1+theta/R^2) R V sum_{n<N} Z_n(p_{m+1}(.-a))
//   d=2: (1+theta/R)  V e^{-m theta/R} sum_{n<N} Z_n(p_{m+1}(.-a))
TanakaReport verify_tanaka(const Trajectory& traj, const ScaledSite& a,
                           std::int64_t N, std::int64_t m);

struct SupLocalTime {
    std::int64_t sup = 0;
    ScaledSite argmax{};  // integer anchor, stored scaled (k = a*R)
};

// max over integer anchors a in the window of local_time(traj, a, N), via the
// occupation measure and the prefix-sum neighborhood counter.
SupLocalTime sup_local_time(const Trajectory& traj, const BoxSpec& window,
                            std::int64_t N);

}  // namespace rangepc
