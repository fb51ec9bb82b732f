#include "rangepc/lattice.hpp"

#include <algorithm>
#include <cmath>

namespace rangepc {

ScaledSite neighbor_offset(const LatticeParams& p, std::int64_t index) {
    std::int64_t side = 2 * p.R + 1;
    std::int64_t cells = 1;
    for (int i = 0; i < p.d; ++i) cells *= side;
    std::int64_t center = (cells - 1) / 2;  // offset (0,..,0)
    require(index >= 0 && index < cells - 1, "neighbor_offset: index out of range");
    std::int64_t j = index < center ? index : index + 1;
    ScaledSite s;
    for (int i = p.d - 1; i >= 0; --i) {
        s.k[i] = (j % side) - p.R;
        j /= side;
    }
    return s;
}

std::vector<ScaledSite> sample_distinct_neighbors(const ScaledSite& a,
                                                  std::int64_t m,
                                                  const LatticeParams& p,
                                                  Rng& rng) {
    p.validate();
    std::int64_t v = p.volume();
    require(m >= 0 && m <= v, "sample_distinct_neighbors: m out of [0, V(R)]");
    // Floyd's subset sampling over the index space: uniform over m-subsets.
    std::unordered_set<std::int64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(m) * 2 + 1);
    for (std::int64_t j = v - m; j < v; ++j) {
        std::int64_t t = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(j) + 1));
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<ScaledSite> out;
    out.reserve(static_cast<std::size_t>(m));
    for (std::int64_t idx : chosen) {
        ScaledSite s = neighbor_offset(p, idx);
        for (int i = 0; i < p.d; ++i) s.k[i] += a.k[i];
        out.push_back(s);
    }
    // Deterministic output order regardless of set iteration order.
    std::sort(out.begin(), out.end(), site_less);
    return out;
}

SupCountResult neighborhood_sup_count(const SparseCounts& points,
                                      const LatticeParams& p,
                                      const BoxSpec& window,
                                      std::int64_t stride) {
    p.validate();
    window.validate();
    require(stride >= 1, "neighborhood_sup_count: stride must be >= 1");

    // Lattice centers inside the window: k in [R(c-M), R(c+M)], k = 0 mod stride.
    std::array<std::int64_t, 3> wlo{}, whi{};
    double r = static_cast<double>(p.R);
    bool empty = false;
    for (int i = 0; i < p.d; ++i) {
        double lo_real = (window.center[i] - window.radius) * r;
        double hi_real = (window.center[i] + window.radius) * r;
        std::int64_t lo = static_cast<std::int64_t>(std::ceil(lo_real - 1e-9));
        std::int64_t hi = static_cast<std::int64_t>(std::floor(hi_real + 1e-9));
        // Snap to the stride grid.
        lo = ceil_div(lo, stride) * stride;
        hi = floor_div(hi, stride) * stride;
        if (lo > hi) empty = true;
        wlo[i] = lo;
        whi[i] = hi;
    }
    require(!empty, "neighborhood_sup_count: window contains no lattice centers");

    SupCountResult res;
    res.window_nonempty = true;
    res.argmax = ScaledSite{{wlo[0], wlo[1], wlo[2]}};
    if (points.empty()) return res;

    // Points' bounding box; candidates outside bbox (+R) see zero mass.
    std::array<std::int64_t, 3> plo{}, phi{};
    bool first = true;
    for (const auto& [s, c] : points.map()) {
        for (int i = 0; i < p.d; ++i) {
            if (first || s.k[i] < plo[i]) plo[i] = s.k[i];
            if (first || s.k[i] > phi[i]) phi[i] = s.k[i];
        }
        first = false;
    }

    DenseGrid<std::int64_t> grid(p.d, plo, phi);
    for (const auto& [s, c] : points.map()) grid.at(s) += c;
    DenseGrid<std::int64_t> cells = grid;  // keep point counts for the center cell
    grid.build_prefix();

    std::array<std::int64_t, 3> clo{}, chi{};
    for (int i = 0; i < p.d; ++i) {
        clo[i] = std::max(wlo[i], ceil_div(plo[i] - p.R, stride) * stride);
        chi[i] = std::min(whi[i], floor_div(phi[i] + p.R, stride) * stride);
        if (clo[i] > chi[i]) return res;  // no candidate can see any point
    }

    ScaledSite x;
    x.k = {clo[0], clo[1], clo[2]};
    auto scan = [&](auto&& self, int axis) -> void {
        if (axis == p.d) {
            std::array<std::int64_t, 3> blo{}, bhi{};
            for (int i = 0; i < p.d; ++i) {
                blo[i] = x.k[i] - p.R;
                bhi[i] = x.k[i] + p.R;
            }
            std::int64_t count = grid.box_sum(blo, bhi) - cells.value_or_zero(x);
            if (count > res.sup) {
                res.sup = count;
                res.argmax = x;
            }
            return;
        }
        for (x.k[axis] = clo[axis]; x.k[axis] <= chi[axis]; x.k[axis] += stride)
            self(self, axis + 1);
    };
    scan(scan, 0);
    return res;
}

}  // namespace rangepc
