#include "rangepc/tanaka.hpp"

#include <algorithm>

namespace rangepc {

std::int64_t local_time(const Trajectory& traj, const ScaledSite& a, std::int64_t N) {
    require(N >= 0 && N <= traj.length() + 1, "local_time: N out of range");
    const auto& lat = traj.params.lat;
    std::int64_t total = 0;
    for (std::int64_t n = 0; n < N; ++n) {
        for (const auto& [site, c] : traj.at(n).map())
            if (is_neighbor(site, a, lat)) total += c;
    }
    return total;
}

double verify_mp(const Trajectory& traj, const SupportFun& phi, std::int64_t N) {
    require(N >= 0 && N <= traj.length(), "verify_mp: N out of range");
    const auto& params = traj.params;
    const auto& lat = params.lat;
    double growth = params.growth();
    double drift_rate = params.theta / params.r_pow_dm1();

    double z_N = measure_apply(traj.at(N), phi);
    double z_0 = measure_apply(traj.at(0), phi);
    KahanSum gen_term;   // sum_n Z_n(L phi)
    KahanSum mass_term;  // sum_n Z_n(phi)
    for (std::int64_t n = 0; n < N; ++n) {
        gen_term.add(measure_apply(traj.at(n), [&](const ScaledSite& y) {
            return neighborhood_average(phi, y, lat) - phi(y);
        }));
        mass_term.add(measure_apply(traj.at(n), phi));
    }
    double m_N = martingale_term(traj, phi, N);
    double rhs = z_0 + growth * gen_term.value() + m_N + drift_rate * mass_term.value();
    return std::fabs(z_N - rhs) / (1.0 + std::fabs(z_N));
}

namespace {

// Bounding box of the trajectory support through generation N, dilated.
void support_bbox(const Trajectory& traj, std::int64_t N, std::int64_t pad,
                  std::array<std::int64_t, 3>& lo, std::array<std::int64_t, 3>& hi) {
    const auto& lat = traj.params.lat;
    bool first = true;
    for (std::int64_t n = 0; n <= N && n <= traj.length(); ++n) {
        for (const auto& [s, c] : traj.at(n).map()) {
            for (int i = 0; i < lat.d; ++i) {
                if (first || s.k[i] < lo[i]) lo[i] = s.k[i];
                if (first || s.k[i] > hi[i]) hi[i] = s.k[i];
            }
            first = false;
        }
    }
    if (first) {
        lo = {0, 0, 0};
        hi = {0, 0, 0};
    }
    for (int i = 0; i < lat.d; ++i) {
        lo[i] -= pad;
        hi[i] += pad;
    }
    for (int i = lat.d; i < 3; ++i) {
        lo[i] = 0;
        hi[i] = 0;
    }
}

}  // namespace

TanakaReport verify_tanaka(const Trajectory& traj, const ScaledSite& a,
                           std::int64_t N, std::int64_t m) {
    const auto& params = traj.params;
    params.validate();
    require(N >= 0 && N <= traj.length(), "verify_tanaka: N out of range");
    require(m >= 1, "verify_tanaka: m must be >= 1");
    const auto& lat = params.lat;
    double growth = params.growth();
    double theta_rate = params.theta / params.r_pow_dm1();

    TanakaReport rep;
    rep.m = m;
    rep.N = N;

    // Kernel window: trajectory support dilated by R (for the neighborhood
    // averages inside the martingale term).
    std::array<std::int64_t, 3> lo{}, hi{};
    support_bbox(traj, N, lat.R, lo, hi);

    KernelTable kernel = (lat.d == 3) ? kernel_phi(a, m, lo, hi, params)
                                      : kernel_g(a, m, lo, hi, params);
    auto kfun = [&](const ScaledSite& x) { return kernel.value(x); };

    // LHS: (1+theta/R^{d-1}) * [R in d=3] * sum_{n<N} Z_n(N(a)).
    double local = static_cast<double>(local_time(traj, a, N));
    double lhs_scale = (lat.d == 3) ? growth * static_cast<double>(lat.R) : growth;
    rep.lhs = lhs_scale * local;

    rep.initial_kernel = measure_apply(traj.at(0), kfun);
    rep.terminal_kernel = -measure_apply(traj.at(N), kfun);
    rep.martingale = martingale_term(traj, kfun, N);

    // Drift coefficient: theta/R^2 in d=3; (e^{theta/R}-1)(1+theta/R)+theta/R in d=2.
    double drift_coef;
    if (lat.d == 3) {
        drift_coef = theta_rate;
    } else {
        double e_rate = std::expm1(params.theta / static_cast<double>(lat.R));
        drift_coef = e_rate * growth + theta_rate;
    }
    KahanSum kernel_sum;
    for (std::int64_t n = 0; n < N; ++n)
        kernel_sum.add(measure_apply(traj.at(n), kfun));
    rep.drift = drift_coef * kernel_sum.value();

    // Exact truncation correction: the kernel's stored leftover term already
    // carries R V p_{m+1} (d=3) or V e^{-m theta/R} p_{m+1} (d=2); the
    // identity needs it multiplied by the growth factor.
    KahanSum corr_sum;
    for (std::int64_t n = 0; n < N; ++n)
        corr_sum.add(measure_apply(
            traj.at(n), [&](const ScaledSite& x) { return kernel.correction_at(x); }));
    rep.correction = growth * corr_sum.value();

    rep.residual = rep.lhs - rep.rhs_total();
    rep.relative_residual = std::fabs(rep.residual) / (1.0 + std::fabs(rep.lhs));
    return rep;
}

SupLocalTime sup_local_time(const Trajectory& traj, const BoxSpec& window,
                            std::int64_t N) {
    const auto& lat = traj.params.lat;
    require(N >= 0 && N <= traj.length() + 1, "sup_local_time: N out of range");

    // Occupation measure sum_{n<N} Z_n fed to the neighborhood counter with
    // integer-anchor stride R.
    SparseCounts occupation;
    for (std::int64_t n = 0; n < N && n <= traj.length(); ++n)
        for (const auto& [s, c] : traj.at(n).map()) occupation.add(s, c);

    SupLocalTime out;
    if (occupation.empty()) {
        auto res = neighborhood_sup_count(occupation, lat, window, lat.R);
        out.argmax = res.argmax;
        return out;
    }
    auto res = neighborhood_sup_count(occupation, lat, window, lat.R);
    out.sup = res.sup;
    out.argmax = res.argmax;
    return out;
}

}  // namespace rangepc
