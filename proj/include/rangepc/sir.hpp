#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rangepc/brw.hpp"
#include "rangepc/lattice.hpp"
#include "rangepc/randwalk.hpp"
#include "rangepc/rng.hpp"

namespace rangepc {

// Shared percolation environment: B(e) realized as a pure keyed hash of
// (seed, canonical edge). Nothing is stored; every process coupled through
// the same oracle sees the same edge variables, which is what makes the
// pathwise monotonicity couplings exact.
//
// The key folds each endpoint coordinate through a distinct odd multiplier
// and finishes with two mixing rounds; the canonical endpoint order makes
// B(x,y) = B(y,x) structural.
inline double edge_uniform(std::uint64_t seed, const ScaledSite& a,
                           const ScaledSite& b) {
    const ScaledSite* lo = &a;
    const ScaledSite* hi = &b;
    if (site_less(b, a)) {
        lo = &b;
        hi = &a;
    }
    std::uint64_t h0 = static_cast<std::uint64_t>(lo->k[0]) * 0x9E3779B185EBCA87ull +
                       static_cast<std::uint64_t>(lo->k[1]) * 0xC2B2AE3D27D4EB4Full +
                       static_cast<std::uint64_t>(lo->k[2]) * 0x165667B19E3779F9ull;
    std::uint64_t h1 = static_cast<std::uint64_t>(hi->k[0]) * 0x27D4EB2F165667C5ull +
                       static_cast<std::uint64_t>(hi->k[1]) * 0x85EBCA77C2B2AE63ull +
                       static_cast<std::uint64_t>(hi->k[2]) * 0xD6E8FEB86659FD93ull;
    std::uint64_t u = mix64(seed ^ 0xa2c39e71d5bf0643ull ^ h0 ^
                            ((h1 << 32) | (h1 >> 32)));
    return static_cast<double>(mix64(u) >> 11) * 0x1.0p-53;
}

struct EdgeOracle {
    std::uint64_t seed = 0;
    double p = 0.0;

    double uniform(const Edge& e) const { return edge_uniform(seed, e.a, e.b); }
    bool open(const Edge& e) const { return uniform(e) < p; }
    bool open(const ScaledSite& x, const ScaledSite& y) const {
        return edge_uniform(seed, x, y) < p;
    }
};

struct EpidemicState {
    SiteSet infected;
    SiteSet recovered;
    std::int64_t generation = 0;

    void validate() const {
        for (const auto& s : infected)
            require(!recovered.contains(s), "EpidemicState: infected and recovered overlap");
    }
};

enum class Verdict { Extinct, SurvivedHorizon, RuleFired };

// Stop-rule vocabulary: max generation is the horizon argument; the optional
// clauses mirror the segment stopping rule of the block construction
// (escape from a box, cumulative neighborhood occupation above a level).
struct StopRule {
    std::optional<std::int64_t> population_threshold;  // |eta_n| >= threshold
    std::optional<BoxSpec> support_box;      // cumulative support leaves box
    std::optional<double> sup_count_limit;   // sup_y |cum cap N(y)| > limit
};

using AttemptCounts = std::unordered_map<ScaledSite, std::int64_t, SiteHash>;

struct SirRun {
    std::vector<SiteSet> infected_by_gen;  // index 0 = eta_0
    SiteSet rho0;
    Verdict verdict = Verdict::SurvivedHorizon;
    std::int64_t verdict_at = 0;
    std::vector<AttemptCounts> attempts_by_gen;  // only if recording enabled

    SiteSet cumulative() const {
        SiteSet out;
        for (const auto& gen : infected_by_gen) out.insert(gen.begin(), gen.end());
        return out;
    }
    SiteSet recovered_final() const {
        SiteSet out = rho0;
        for (const auto& gen : infected_by_gen) out.insert(gen.begin(), gen.end());
        return out;
    }
};

// One SIR generation: eta' = open susceptible neighbors of eta, rho' = rho + eta.
// Edges are evaluated lazily through the oracle the first time they matter.
EpidemicState sir_step(const EpidemicState& state, const LatticeParams& lat,
                       const EdgeOracle& oracle, AttemptCounts* attempts = nullptr);

SirRun run_sir(const SiteSet& eta0, const SiteSet& rho0, const LatticeParams& lat,
               const EdgeOracle& oracle, std::int64_t horizon,
               const StopRule& stop = {}, bool record_attempts = false);

// Independent check of the graph-distance representation: the set
// {x : d_{G(rho0)}(eta0, x) <= n} computed by plain BFS on the same oracle.
SiteSet bfs_ball(const SiteSet& eta0, const SiteSet& rho0, const LatticeParams& lat,
                 const EdgeOracle& oracle, std::int64_t n);

// --- Couplings -------------------------------------------------------------

struct CoupledRun {
    std::vector<SiteSet> eta;                 // plain SIR generations
    std::vector<SparseCounts> eta_bar;        // modified SIR (multiplicities)
    Trajectory brw;                           // dominating envelope
    SiteSet rho0;
    std::int64_t domination_violations = 0;   // must stay 0
};

// Joint realization of (eta, eta_bar, Z): every infected site designates its
// first resident particle; the epidemic's infection attempts are exactly that
// particle's realized births restricted to susceptible targets. The modified
// epidemic places every resident particle's births on targets not yet
// recovered in the plain epidemic, with multiple occupancy. Pathwise
// eta <= eta_bar <= Z. Layers are optional: pass with_etabar/with_brw.
CoupledRun coupled_step_run(const SiteSet& eta0, const SiteSet& rho0,
                            const SparseCounts& z0, const RunParams& params,
                            Rng& rng, std::int64_t horizon, bool with_etabar,
                            bool with_brw);

// Lemma-style epidemic/envelope pair (eta, Z).
CoupledRun coupled_run(const SiteSet& eta0, const SiteSet& rho0,
                       const SparseCounts& z0, const RunParams& params, Rng& rng,
                       std::int64_t horizon);

// Modified SIR with the embedded plain epidemic it dominates.
CoupledRun run_modified_sir(const SiteSet& eta0, const SiteSet& rho0,
                            const RunParams& params, Rng& rng, std::int64_t horizon);

// --- Immigration -----------------------------------------------------------

// Immigration event: at its time, choose (mu_i, nu_i) from the current
// infected set and the carried immigrant set; the epidemic restarts from
// mu_i while nu_i is carried forward, and the non-selected infected sites are
// forgotten. A freeze event pins the process for the rest of the run.
struct ImmigrationEvent {
    std::int64_t time = 0;
    bool freeze = false;
    std::function<std::pair<SiteSet, SiteSet>(const SiteSet& eta_star,
                                              const SiteSet& nu_prev)>
        choose;
};

struct ImmigrationSchedule {
    SiteSet mu0;
    SiteSet nu0;
    std::vector<ImmigrationEvent> events;  // times nondecreasing

    void validate() const {
        std::int64_t prev = 0;
        for (const auto& e : events) {
            require(e.time >= prev, "ImmigrationSchedule: times must be nondecreasing");
            prev = e.time;
        }
    }
};

struct ImmigrationRun {
    std::vector<SiteSet> eta_star_by_gen;
    SiteSet cumulative() const {
        SiteSet out;
        for (const auto& g : eta_star_by_gen) out.insert(g.begin(), g.end());
        return out;
    }
};

ImmigrationRun run_with_immigration(const ImmigrationSchedule& schedule,
                                    const SiteSet& rho0, const LatticeParams& lat,
                                    const EdgeOracle& oracle, std::int64_t horizon);

// --- Collisions ------------------------------------------------------------

struct CollisionCount {
    SparseCounts per_site;  // Gamma_n(x) = C(k_x, 2)
    std::int64_t total = 0;
};

// k simultaneous attempts on one susceptible target count C(k,2) collisions.
CollisionCount count_collisions(const AttemptCounts& attempts);

struct NKappaResult {
    bool holds = false;
    std::int64_t sup = 0;
    ScaledSite argmax{};
};

// N(kappa): sup_x |rho cap N(x)| <= kappa R over lattice centers in window.
NKappaResult event_N_kappa(const SiteSet& recovered, double kappa,
                           const LatticeParams& lat, const BoxSpec& window);

// --- Survival probe (hot path) ----------------------------------------------

struct SurvivalProxy {
    std::int64_t g_max = 200;
    // Early exit: population at or above this count is recorded as survival.
    std::int64_t population_exit = 0;  // 0 -> derived default
    std::optional<double> escape_radius;  // alternative proxy
};

// True iff the epidemic from ({0}, empty) satisfies the survival proxy.
// Dense-state implementation of exactly the run_sir dynamics on the same
// oracle; the two must agree realization by realization.
bool survival_probe(double p, const LatticeParams& lat, std::uint64_t oracle_seed,
                    const SurvivalProxy& proxy);

}  // namespace rangepc
