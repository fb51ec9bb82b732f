#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rangepc/common.hpp"
#include "rangepc/rng.hpp"

namespace rangepc {

// Geometry of Z^d_R. Sites are stored in scaled integer coordinates k, the
// lattice point being x = k/R; all neighborhood logic is exact integer
// arithmetic. Real-valued box centers are compared in double precision.

struct LatticeParams {
    int d = 2;           // dimension, 2 or 3
    std::int64_t R = 1;  // range

    void validate() const {
        require(d == 2 || d == 3, "LatticeParams: d must be 2 or 3");
        require(R >= 1, "LatticeParams: R must be >= 1");
    }

    // V(R) = (2R+1)^d - 1, the neighborhood size.
    std::int64_t volume() const {
        std::int64_t side = 2 * R + 1;
        std::int64_t v = 1;
        for (int i = 0; i < d; ++i) v *= side;
        return v - 1;
    }
};

struct ScaledSite {
    std::array<std::int64_t, 3> k{0, 0, 0};

    bool operator==(const ScaledSite&) const = default;
};

inline ScaledSite site2(std::int64_t a, std::int64_t b) { return {{a, b, 0}}; }
inline ScaledSite site3(std::int64_t a, std::int64_t b, std::int64_t c) {
    return {{a, b, c}};
}

struct SiteHash {
    std::size_t operator()(const ScaledSite& s) const {
        std::uint64_t h = 0x8f3b6a1dc09e77f1ull;
        h = hash_combine(h, static_cast<std::uint64_t>(s.k[0]));
        h = hash_combine(h, static_cast<std::uint64_t>(s.k[1]));
        h = hash_combine(h, static_cast<std::uint64_t>(s.k[2]));
        return static_cast<std::size_t>(h);
    }
};

using SiteSet = std::unordered_set<ScaledSite, SiteHash>;

inline bool site_less(const ScaledSite& a, const ScaledSite& b) {
    return a.k < b.k;
}

// Rectangle Q_M(x) = {y : ||y - x||_inf <= M}; center in unscaled units.
struct BoxSpec {
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double radius = 1.0;

    void validate() const { require(radius > 0.0, "BoxSpec: radius must be > 0"); }
};

inline BoxSpec box2(double cx, double cy, double m) { return {{cx, cy, 0.0}, m}; }
inline BoxSpec box3(double cx, double cy, double cz, double m) {
    return {{cx, cy, cz}, m};
}

// Unordered lattice edge; canonical storage order makes B(x,y) = B(y,x)
// structural for the keyed-hash environment.
struct Edge {
    ScaledSite a, b;

    Edge(const ScaledSite& u, const ScaledSite& v) {
        if (site_less(u, v)) {
            a = u;
            b = v;
        } else {
            a = v;
            b = u;
        }
    }
};

inline bool is_neighbor(const ScaledSite& a, const ScaledSite& b,
                        const LatticeParams& p) {
    std::int64_t sup = 0;
    for (int i = 0; i < p.d; ++i) {
        std::int64_t diff = a.k[i] - b.k[i];
        if (diff < 0) diff = -diff;
        if (diff > sup) sup = diff;
    }
    return sup > 0 && sup <= p.R;
}

inline bool box_contains(const BoxSpec& box, const ScaledSite& a,
                         const LatticeParams& p) {
    double r = static_cast<double>(p.R);
    for (int i = 0; i < p.d; ++i) {
        double x = static_cast<double>(a.k[i]) / r;
        if (std::fabs(x - box.center[i]) > box.radius) return false;
    }
    return true;
}

// Neighbor offsets indexed 0..V(R)-1 via the (2R+1)^d mixed-radix box with
// the center removed. decode is O(1); used by the distinct-subset sampler
// and the stepping kernels.
ScaledSite neighbor_offset(const LatticeParams& p, std::int64_t index);

template <typename Fn>
void for_each_neighbor(const ScaledSite& a, const LatticeParams& p, Fn&& fn) {
    std::array<std::int64_t, 3> off{0, 0, 0};
    if (p.d == 2) {
        for (off[0] = -p.R; off[0] <= p.R; ++off[0])
            for (off[1] = -p.R; off[1] <= p.R; ++off[1]) {
                if (off[0] == 0 && off[1] == 0) continue;
                fn(ScaledSite{{a.k[0] + off[0], a.k[1] + off[1], 0}});
            }
    } else {
        for (off[0] = -p.R; off[0] <= p.R; ++off[0])
            for (off[1] = -p.R; off[1] <= p.R; ++off[1])
                for (off[2] = -p.R; off[2] <= p.R; ++off[2]) {
                    if (off[0] == 0 && off[1] == 0 && off[2] == 0) continue;
                    fn(ScaledSite{{a.k[0] + off[0], a.k[1] + off[1], a.k[2] + off[2]}});
                }
    }
}

// m distinct uniform neighbors of a, uniform over all m-subsets of N(a).
std::vector<ScaledSite> sample_distinct_neighbors(const ScaledSite& a,
                                                  std::int64_t m,
                                                  const LatticeParams& p,
                                                  Rng& rng);

// Finite nonnegative-integer measure on sites (eta as 0/1, Z as counts).
class SparseCounts {
  public:
    using Map = std::unordered_map<ScaledSite, std::int64_t, SiteHash>;

    void add(const ScaledSite& s, std::int64_t c) {
        if (c == 0) return;
        auto [it, inserted] = counts_.try_emplace(s, 0);
        it->second += c;
        ensure(it->second >= 0, "SparseCounts: count went negative");
        if (it->second == 0) counts_.erase(it);
    }

    std::int64_t at(const ScaledSite& s) const {
        auto it = counts_.find(s);
        return it == counts_.end() ? 0 : it->second;
    }

    std::int64_t total_mass() const {
        std::int64_t m = 0;
        for (const auto& [s, c] : counts_) m += c;
        return m;
    }

    bool empty() const { return counts_.empty(); }
    std::size_t support_size() const { return counts_.size(); }
    const Map& map() const { return counts_; }
    Map& map() { return counts_; }

    static SparseCounts from_set(const SiteSet& set) {
        SparseCounts out;
        for (const auto& s : set) out.add(s, 1);
        return out;
    }

  private:
    Map counts_;
};

// Dense d-dimensional grid over an integer window, with prefix sums for
// O(2^d) box-count queries.
template <typename T>
class DenseGrid {
  public:
    DenseGrid() = default;

    DenseGrid(int d, std::array<std::int64_t, 3> lo, std::array<std::int64_t, 3> hi)
        : d_(d), lo_(lo), hi_(hi) {
        std::size_t n = 1;
        for (int i = 0; i < d_; ++i) {
            require(hi_[i] >= lo_[i], "DenseGrid: empty extent");
            ext_[i] = static_cast<std::size_t>(hi_[i] - lo_[i] + 1);
            n *= ext_[i];
        }
        require(n <= 400'000'000ull, "DenseGrid: window budget exceeded");
        data_.assign(n, T{});
    }

    int dim() const { return d_; }
    std::int64_t lo(int i) const { return lo_[i]; }
    std::int64_t hi(int i) const { return hi_[i]; }

    bool inside(const ScaledSite& s) const {
        for (int i = 0; i < d_; ++i)
            if (s.k[i] < lo_[i] || s.k[i] > hi_[i]) return false;
        return true;
    }

    T& at(const ScaledSite& s) { return data_[index(s)]; }
    const T& at(const ScaledSite& s) const { return data_[index(s)]; }

    T value_or_zero(const ScaledSite& s) const {
        return inside(s) ? data_[index(s)] : T{};
    }

    const std::vector<T>& raw() const { return data_; }
    std::vector<T>& raw() { return data_; }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        ScaledSite s;
        for (s.k[0] = lo_[0]; s.k[0] <= hi_[0]; ++s.k[0])
            for (s.k[1] = lo_[1]; s.k[1] <= ((d_ > 1) ? hi_[1] : lo_[1]); ++s.k[1])
                for (s.k[2] = lo_[2]; s.k[2] <= ((d_ > 2) ? hi_[2] : lo_[2]); ++s.k[2])
                    fn(s, data_[index(s)]);
    }

    // In-place prefix sums along every axis; afterwards box_sum() is valid.
    void build_prefix() {
        for (int axis = 0; axis < d_; ++axis) {
            std::size_t stride = stride_of(axis);
            std::size_t n = data_.size();
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t coord = (i / stride) % ext_[axis];
                if (coord > 0) data_[i] += data_[i - stride];
            }
        }
    }

    // Sum over the clamped box [blo, bhi] (inclusive, grid coordinates).
    // Requires build_prefix() to have run.
    T box_sum(std::array<std::int64_t, 3> blo, std::array<std::int64_t, 3> bhi) const {
        std::array<std::int64_t, 3> a{}, b{};
        for (int i = 0; i < d_; ++i) {
            a[i] = std::max(blo[i], lo_[i]);
            b[i] = std::min(bhi[i], hi_[i]);
            if (a[i] > b[i]) return T{};
        }
        T total{};
        int corners = 1 << d_;
        for (int mask = 0; mask < corners; ++mask) {
            std::array<std::int64_t, 3> c{};
            int sign = 1;
            bool valid = true;
            for (int i = 0; i < d_; ++i) {
                if (mask & (1 << i)) {
                    c[i] = a[i] - 1;
                    sign = -sign;
                    if (c[i] < lo_[i]) {
                        valid = false;
                        break;
                    }
                } else {
                    c[i] = b[i];
                }
            }
            if (!valid) continue;
            ScaledSite s{{c[0], c[1], c[2]}};
            total += sign > 0 ? data_[index(s)] : -data_[index(s)];
        }
        return total;
    }

  private:
    std::size_t stride_of(int axis) const {
        // Layout: axis 0 slowest (k[0] outermost), last axis contiguous.
        std::size_t s = 1;
        for (int i = d_ - 1; i > axis; --i) s *= ext_[i];
        return s;
    }

    std::size_t index(const ScaledSite& s) const {
        std::size_t idx = 0;
        for (int i = 0; i < d_; ++i) {
            ensure(s.k[i] >= lo_[i] && s.k[i] <= hi_[i], "DenseGrid: out of window");
            idx = idx * ext_[i] + static_cast<std::size_t>(s.k[i] - lo_[i]);
        }
        return idx;
    }

    int d_ = 0;
    std::array<std::int64_t, 3> lo_{}, hi_{};
    std::array<std::size_t, 3> ext_{1, 1, 1};
    std::vector<T> data_;
};

struct SupCountResult {
    std::int64_t sup = 0;
    ScaledSite argmax{};
    bool window_nonempty = false;
};

// sup over lattice centers x in `window` (k = 0 mod stride per coordinate) of
// the point mass inside N(x). Prefix sums over the points' bounding box, one
// O(2^d) query per candidate center, center cell subtracted.
SupCountResult neighborhood_sup_count(const SparseCounts& points,
                                      const LatticeParams& p,
                                      const BoxSpec& window,
                                      std::int64_t stride = 1);

}  // namespace rangepc
