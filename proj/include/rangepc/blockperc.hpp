#pragma once

#include <cstdint>
#include <vector>

#include "rangepc/brw.hpp"
#include "rangepc/sir.hpp"

namespace rangepc {

// Renormalization machinery: the ordered grid Gamma on Z^2_+, offspring
// pairs, the F1-F4 good events for one epidemic segment, m-admissibility,
// and the comparison with oriented site percolation.

struct GridSite {
    std::int64_t x1 = 0;
    std::int64_t x2 = 0;

    bool operator==(const GridSite&) const = default;
};

struct GridSiteHash {
    std::size_t operator()(const GridSite& g) const {
        return static_cast<std::size_t>(
            hash_combine(hash_combine(0x5bd1ull, static_cast<std::uint64_t>(g.x1)),
                         static_cast<std::uint64_t>(g.x2)));
    }
};

// Total order: by l1 norm, ties by smaller first coordinate first.
bool grid_precedes(const GridSite& a, const GridSite& b);

// i-th element of Gamma under the order, 1-based: gamma_order(1) = (0,0).
GridSite gamma_order(std::int64_t i);

// Inverse: the 1-based index of g in the order.
std::int64_t gamma_index(const GridSite& g);

// Immediate offspring {(x1, x2+1), (x1+1, x2)}.
std::array<GridSite, 2> offspring(const GridSite& g);

struct BlockConfig {
    RunParams run;       // d, R, theta, T
    double M = 3.0;      // support-box scale before the log inflation
    double K = 100.0;    // thinning constant
    double chi = 10.0;   // local-time level
    double m_admiss = 1.0;

    void validate() const {
        run.validate();
        require(run.theta > 0.0, "BlockConfig: theta must be positive");
        require(std::log(run.f_d()) > 0.0,
                "BlockConfig: need log f_d(theta) > 0 (theta > 1 in d=2, > e in d=3)");
        require(M > 0.0 && K > 0.0 && chi > 0.0 && m_admiss > 0.0,
                "BlockConfig: constants must be positive");
    }

    // M_tilde = floor(M sqrt(log f_d(theta))) + 1.
    std::int64_t M_tilde() const {
        return static_cast<std::int64_t>(
                   std::floor(M * std::sqrt(std::log(run.f_d())))) +
               1;
    }

    // kappa = (4 M_tilde + 4)^2 chi.
    double kappa() const {
        double mt = static_cast<double>(M_tilde());
        return sq(4.0 * mt + 4.0) * chi;
    }
};

// Measure position u for a grid site: x R_theta embedded in R^d.
std::array<double, 3> grid_center(const GridSite& g, const BlockConfig& cfg);

struct AdmissibilityResult {
    bool admissible = false;
    double worst_value = 0.0;
    std::array<double, 3> worst_u{0.0, 0.0, 0.0};
    double threshold = 0.0;
};

// Grid surrogate for "mu(g_{u,d}) <= m R^{d-1}/theta^{1/4} for all u":
// checked on the unit-spacing grid covering the support dilated by 2, plus
// one far anchor point. A surrogate, not a proof over all of R^d.
AdmissibilityResult admissibility_check(const SparseCounts& mu, double m,
                                        const RunParams& params);

// Initial-condition recipe: |eta0| in [R^{d-1} f_d/theta, 1 + same], support
// in Q_{R_theta}(center), per-unit-box counts at most K beta_d(R).
SiteSet build_initial_condition(const RunParams& run, double K,
                                const std::array<double, 3>& center, Rng& rng);

struct GoodEventFlags {
    bool f1_support = false;      // cumulative support stays in Q_{Mt R_theta}(x R_theta)
    bool f2_local_time = false;   // sup_y cumulative N(y)-count <= chi R
    bool f3_thinned_mass = false; // thinned terminal mass >= |eta0| in both offspring boxes
    bool f4_admissible = false;   // terminal restriction m-admissible in both boxes
    bool n_kappa = false;         // |rho_T cap N(x)| <= kappa R
    std::int64_t sup_neighborhood = 0;

    bool good() const { return f1_support && f2_local_time && f3_thinned_mass && f4_admissible; }
};

// Run one SIR segment from eta0 to T_theta_R and evaluate the good events
// relative to grid site x.
GoodEventFlags good_event_probe(const SiteSet& eta0, const SiteSet& rho0,
                                const BlockConfig& cfg, const GridSite& x,
                                const EdgeOracle& oracle);

// --- Oriented site percolation ----------------------------------------------

struct OrientedResult {
    bool percolates = false;
    std::int64_t open_cluster_size = 0;  // sites reachable from the origin
    std::int64_t frontier_reached = 0;   // largest l1 level reached
};

// Site percolation on Gamma with oriented steps along offspring(x);
// percolation = an open oriented path from (0,0) to l1 level N.
// dependence_range 0 gives i.i.d. sites; a positive range uses a
// block-correlated field whose sites are independent beyond that l1 distance.
OrientedResult oriented_percolation(double density, std::int64_t dependence_range,
                                    std::int64_t level_n, std::uint64_t seed);

// Exposes the site field itself for coupling tests (open iff u(site) < q).
double oriented_site_uniform(const GridSite& g, std::int64_t dependence_range,
                             std::uint64_t seed);

// --- Block construction -------------------------------------------------------

struct BlockSiteRecord {
    GridSite site;
    bool visited = false;
    bool case_one = false;  // ran an epidemic segment
    bool occupied = false;
    GoodEventFlags flags;
    std::int64_t tau = 0;  // absolute event time after this site
};

struct BlockResult {
    std::vector<BlockSiteRecord> records;  // in grid order
    std::vector<GridSite> omega;           // occupied sites
    std::int64_t bookkeeping_violations = 0;
    std::int64_t kappa_violations = 0;
};

// The occupied-set algorithm: visit grid sites in order, run epidemic
// segments with the stopping rule tau(Y, x), mark occupied on the good
// event, carry (mu_i, nu_i, w_i) forward, and return Omega.
BlockResult block_iteration(const BlockConfig& cfg, const EdgeOracle& oracle,
                            Rng& rng, std::int64_t grid_l1_budget);

// Occupied/vacant mixing field: xi(x) = 1 iff both offspring occupied when x
// is occupied; independent Bernoulli(1 - 14 eps0) when vacant.
std::vector<std::pair<GridSite, int>> xi_field(const BlockResult& result,
                                               double eps0, Rng& rng);

}  // namespace rangepc
