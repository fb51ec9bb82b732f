#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rangepc/lattice.hpp"
#include "rangepc/randwalk.hpp"
#include "rangepc/rng.hpp"

namespace rangepc {

// Branching random walk on Z^d_R: each particle dies and gives birth toward
// each of its V(R) neighboring positions independently with probability p(R).
// Only site counts are materialized; particle labels exist in the proofs, not
// in any computed functional. A per-birth log can be recorded on tiny runs so
// tests can replay the martingale term direction by direction.

struct Population {
    SparseCounts counts;
    std::int64_t generation = 0;

    std::int64_t mass() const { return counts.total_mass(); }
};

struct BirthEvent {
    ScaledSite parent;
    ScaledSite child;
};

using BirthLog = std::vector<std::vector<BirthEvent>>;  // [generation] -> births

struct Trajectory {
    std::vector<SparseCounts> gens;
    RunParams params;
    std::uint64_t stream = 0;
    std::optional<BirthLog> births;

    std::int64_t length() const { return static_cast<std::int64_t>(gens.size()) - 1; }
    const SparseCounts& at(std::int64_t n) const {
        require(n >= 0 && n < static_cast<std::int64_t>(gens.size()),
                "Trajectory: generation out of range");
        return gens[static_cast<std::size_t>(n)];
    }
};

// One branching step. Offspring placement draws B ~ Bin(V,p) and then a
// uniform B-subset of N(x), which is equal in law to V independent
// Bernoulli(p) birth indicators.
Population brw_step(const Population& pop, const RunParams& params, Rng& rng,
                    std::vector<BirthEvent>* log = nullptr);

Trajectory simulate_brw(const SparseCounts& z0, const RunParams& params,
                        std::int64_t generations, Rng& rng,
                        bool record_births = false);

// Z_n(phi) = sum_x counts(x) phi(x); phi may throw if undefined on support.
template <typename Fn>
double measure_apply(const SparseCounts& counts, Fn&& phi) {
    KahanSum s;
    for (const auto& [site, c] : counts.map())
        s.add(static_cast<double>(c) * phi(site));
    return s.value();
}

// phi_bar(y) = (1/V) sum_{e in N(0)} phi(y+e).
template <typename Fn>
double neighborhood_average(Fn&& phi, const ScaledSite& y, const LatticeParams& lat) {
    KahanSum s;
    for_each_neighbor(y, lat, [&](const ScaledSite& z) { s.add(phi(z)); });
    return s.value() / static_cast<double>(lat.volume());
}

// Martingale term M_N(phi) via the increment identity
//   M_{n+1} - M_n = Z_{n+1}(phi) - (1 + theta/R^{d-1}) Z_n(phi_bar),
// which equals the per-direction sum over birth indicators.
template <typename Fn>
double martingale_term(const Trajectory& traj, Fn&& phi, std::int64_t N) {
    require(N >= 0 && N <= traj.length(), "martingale_term: N out of range");
    const auto& lat = traj.params.lat;
    double growth = traj.params.growth();
    KahanSum m;
    for (std::int64_t n = 0; n < N; ++n) {
        double z_next = measure_apply(traj.at(n + 1), phi);
        double z_bar = measure_apply(traj.at(n), [&](const ScaledSite& y) {
            return neighborhood_average(phi, y, lat);
        });
        m.add(z_next - growth * z_bar);
    }
    return m.value();
}

// Conditional quadratic variation
//   <M(phi)>_N = p(1-p) V sum_{n<N} Z_n(phi^2_bar).
template <typename Fn>
double quadratic_variation(const Trajectory& traj, Fn&& phi, std::int64_t N) {
    require(N >= 0 && N <= traj.length(), "quadratic_variation: N out of range");
    const auto& lat = traj.params.lat;
    double p = traj.params.p();
    double factor = p * (1.0 - p) * static_cast<double>(lat.volume());
    KahanSum q;
    for (std::int64_t n = 0; n < N; ++n) {
        q.add(measure_apply(traj.at(n), [&](const ScaledSite& y) {
            return neighborhood_average(
                [&](const ScaledSite& z) { return sq(phi(z)); }, y, lat);
        }));
    }
    return factor * q.value();
}

struct GwStats {
    std::vector<std::int64_t> mass;        // per-generation total mass
    std::vector<double> theoretical_mean;  // (1 + theta/R^{d-1})^n * mass_0
};

GwStats gw_stats(const Trajectory& traj);

// Galton-Watson variance of Z_n(1) from mass0 ancestors, offspring Bin(V,p).
double gw_variance(const RunParams& params, std::int64_t n, std::int64_t mass0);

struct RescaledAtom {
    std::array<double, 3> position{0.0, 0.0, 0.0};
    double weight = 0.0;
};

// Atoms of W^R: x / sqrt(sigma^2 R^{d-1}) with sigma^2 = 1/3, each particle
// carrying weight 1/R^{d-1}.
std::vector<RescaledAtom> rescaled_measure(const Population& pop,
                                           const RunParams& params);

// Generation index [t R^{d-1}] corresponding to rescaled time t.
std::int64_t rescaled_time_index(double t, const RunParams& params);

// Unit box label: component-wise nearest integer to x = k/R, ties toward -inf.
std::array<std::int64_t, 3> unit_box_of(const ScaledSite& s, const LatticeParams& lat);

// Delete all particles in any unit box whose count exceeds K beta_d(R).
Population thin(const Population& pop, double K, const RunParams& params);

}  // namespace rangepc
