#pragma once

#include <map>
#include <vector>

#include "rangepc/brw.hpp"
#include "rangepc/lattice.hpp"
#include "rangepc/randwalk.hpp"
#include "rangepc/rng.hpp"

namespace rangepc::testing {

// Literal n-step path enumeration of the uniform-neighborhood walk:
// probabilities accumulated over all V(R)^n step sequences.
inline std::map<std::array<std::int64_t, 3>, double> enumerate_paths(
    std::int64_t n, const LatticeParams& lat) {
    std::vector<ScaledSite> offsets;
    for_each_neighbor(ScaledSite{}, lat, [&](const ScaledSite& e) { offsets.push_back(e); });
    double step_p = 1.0 / static_cast<double>(lat.volume());

    std::map<std::array<std::int64_t, 3>, double> dist;
    ScaledSite pos{};
    auto walk = [&](auto&& self, std::int64_t depth, double prob) -> void {
        if (depth == n) {
            dist[pos.k] += prob;
            return;
        }
        for (const auto& e : offsets) {
            for (int i = 0; i < lat.d; ++i) pos.k[i] += e.k[i];
            self(self, depth + 1, prob * step_p);
            for (int i = 0; i < lat.d; ++i) pos.k[i] -= e.k[i];
        }
    };
    walk(walk, 0, 1.0);
    return dist;
}

// Brute-force sup over window centers of the neighborhood point count.
inline std::int64_t brute_sup_count(const SparseCounts& points, const LatticeParams& lat,
                                    const BoxSpec& window, std::int64_t stride = 1) {
    std::array<std::int64_t, 3> lo{}, hi{};
    double r = static_cast<double>(lat.R);
    for (int i = 0; i < lat.d; ++i) {
        lo[i] = ceil_div(static_cast<std::int64_t>(
                             std::ceil((window.center[i] - window.radius) * r - 1e-9)),
                         stride) *
                stride;
        hi[i] = floor_div(static_cast<std::int64_t>(
                              std::floor((window.center[i] + window.radius) * r + 1e-9)),
                          stride) *
                stride;
    }
    std::int64_t best = 0;
    ScaledSite x;
    auto scan = [&](auto&& self, int axis) -> void {
        if (axis == lat.d) {
            std::int64_t count = 0;
            for (const auto& [s, c] : points.map())
                if (is_neighbor(s, x, lat)) count += c;
            if (count > best) best = count;
            return;
        }
        for (x.k[axis] = lo[axis]; x.k[axis] <= hi[axis]; x.k[axis] += stride)
            self(self, axis + 1);
    };
    scan(scan, 0);
    return best;
}

inline SparseCounts random_cloud(const LatticeParams& lat, std::int64_t n_points,
                                 std::int64_t span, Rng& rng) {
    SparseCounts out;
    for (std::int64_t i = 0; i < n_points; ++i) {
        ScaledSite s;
        for (int j = 0; j < lat.d; ++j)
            s.k[j] = static_cast<std::int64_t>(rng.below(2 * span + 1)) - span;
        out.add(s, 1);
    }
    return out;
}

// Martingale term recomputed from the per-birth log, direction by direction:
//   M_N = sum_n [ sum_births phi(child) - p(R) sum_x Z_n(x) V phi_bar(x) ].
template <typename Fn>
double martingale_from_birth_log(const Trajectory& traj, Fn&& phi, std::int64_t N) {
    const auto& lat = traj.params.lat;
    double p = traj.params.p();
    KahanSum m;
    for (std::int64_t n = 0; n < N; ++n) {
        KahanSum inner;
        for (const auto& ev : (*traj.births)[static_cast<std::size_t>(n)])
            inner.add(phi(ev.child));
        for (const auto& [site, c] : traj.at(n).map()) {
            KahanSum dir;
            for_each_neighbor(site, lat, [&](const ScaledSite& y) { dir.add(phi(y)); });
            inner.add(-p * static_cast<double>(c) * dir.value());
        }
        m.add(inner.value());
    }
    return m.value();
}

}  // namespace rangepc::testing
