#include "rangepc/blockperc.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rangepc {

bool grid_precedes(const GridSite& a, const GridSite& b) {
    std::int64_t na = a.x1 + a.x2, nb = b.x1 + b.x2;
    if (na != nb) return na < nb;
    return a.x1 < b.x1;
}

GridSite gamma_order(std::int64_t i) {
    require(i >= 1, "gamma_order: index is 1-based");
    // Level s holds s+1 sites; find the level containing index i.
    std::int64_t remaining = i - 1;
    std::int64_t level = 0;
    while (remaining > level) {
        remaining -= level + 1;
        ++level;
    }
    // Within level: x1 = 0..level ascending.
    return GridSite{remaining, level - remaining};
}

std::int64_t gamma_index(const GridSite& g) {
    require(g.x1 >= 0 && g.x2 >= 0, "gamma_index: site must be in Z^2_+");
    std::int64_t level = g.x1 + g.x2;
    return level * (level + 1) / 2 + g.x1 + 1;
}

std::array<GridSite, 2> offspring(const GridSite& g) {
    return {GridSite{g.x1, g.x2 + 1}, GridSite{g.x1 + 1, g.x2}};
}

std::array<double, 3> grid_center(const GridSite& g, const BlockConfig& cfg) {
    double rt = cfg.run.R_theta();
    return {static_cast<double>(g.x1) * rt, static_cast<double>(g.x2) * rt, 0.0};
}

AdmissibilityResult admissibility_check(const SparseCounts& mu, double m,
                                        const RunParams& params) {
    params.validate();
    require(m > 0.0, "admissibility_check: m must be positive");
    AdmissibilityResult res;
    res.threshold = m * params.r_pow_dm1() / std::pow(params.theta, 0.25);
    if (mu.empty()) {
        res.admissible = true;
        return res;
    }

    // Unit-spacing u grid covering the support dilated by 2, plus a far anchor.
    const auto& lat = params.lat;
    double R = static_cast<double>(lat.R);
    std::array<double, 3> lo{}, hi{};
    bool first = true;
    for (const auto& [s, c] : mu.map()) {
        for (int i = 0; i < lat.d; ++i) {
            double x = static_cast<double>(s.k[i]) / R;
            if (first || x < lo[i]) lo[i] = x;
            if (first || x > hi[i]) hi[i] = x;
        }
        first = false;
    }

    std::vector<std::array<double, 3>> grid;
    std::array<std::int64_t, 3> glo{}, ghi{};
    for (int i = 0; i < lat.d; ++i) {
        glo[i] = static_cast<std::int64_t>(std::floor(lo[i])) - 2;
        ghi[i] = static_cast<std::int64_t>(std::ceil(hi[i])) + 2;
    }
    std::array<std::int64_t, 3> it{glo[0], glo[1], 0};
    for (it[0] = glo[0]; it[0] <= ghi[0]; ++it[0])
        for (it[1] = glo[1]; it[1] <= ghi[1]; ++it[1]) {
            if (lat.d == 2) {
                grid.push_back({static_cast<double>(it[0]), static_cast<double>(it[1]), 0.0});
            } else {
                for (it[2] = glo[2]; it[2] <= ghi[2]; ++it[2])
                    grid.push_back({static_cast<double>(it[0]), static_cast<double>(it[1]),
                                    static_cast<double>(it[2])});
            }
        }
    grid.push_back({hi[0] + 50.0, hi[1] + 37.0, lat.d == 3 ? hi[2] + 41.0 : 0.0});

    res.admissible = true;
    for (const auto& u : grid) {
        KahanSum val;
        for (const auto& [s, c] : mu.map())
            val.add(static_cast<double>(c) * majorant_g(u, s, params));
        if (val.value() > res.worst_value) {
            res.worst_value = val.value();
            res.worst_u = u;
        }
    }
    res.admissible = res.worst_value <= res.threshold;
    return res;
}

SiteSet build_initial_condition(const RunParams& run, double K,
                                const std::array<double, 3>& center, Rng& rng) {
    run.validate();
    require(run.theta > 0.0, "build_initial_condition: theta must be positive");
    require(K > 0.0, "build_initial_condition: K must be positive");
    const auto& lat = run.lat;
    double lower = run.r_pow_dm1() * run.f_d() / run.theta;
    std::int64_t count = static_cast<std::int64_t>(std::ceil(lower));
    if (count < 1) count = 1;
    ensure(static_cast<double>(count) <= lower + 1.0 + 1e-9,
           "build_initial_condition: count outside the recipe bracket");

    double box_cap = K * run.beta_d();
    require(box_cap >= 1.0,
            "build_initial_condition: K beta_d(R) < 1 admits no site at all");

    double rt = run.R_theta();
    std::array<std::int64_t, 3> klo{}, khi{};
    double capacity = 1.0;
    for (int i = 0; i < lat.d; ++i) {
        klo[i] = static_cast<std::int64_t>(
            std::ceil((center[i] - rt) * static_cast<double>(lat.R) - 1e-9));
        khi[i] = static_cast<std::int64_t>(
            std::floor((center[i] + rt) * static_cast<double>(lat.R) + 1e-9));
        require(klo[i] <= khi[i], "build_initial_condition: box holds no lattice site");
        capacity *= static_cast<double>(khi[i] - klo[i] + 1);
    }
    require(capacity >= 2.0 * static_cast<double>(count),
            "build_initial_condition: box too small for the required mass");

    SiteSet out;
    std::unordered_map<std::array<std::int64_t, 3>, std::int64_t,
                       decltype([](const std::array<std::int64_t, 3>& a) {
                           return static_cast<std::size_t>(hash_combine(
                               hash_combine(hash_combine(0x9eull, a[0]), a[1]), a[2]));
                       })>
        box_counts;
    std::int64_t attempts = 0;
    while (static_cast<std::int64_t>(out.size()) < count) {
        ensure(++attempts < 1000 * count + 10000,
               "build_initial_condition: sampling failed to place the mass");
        ScaledSite s;
        for (int i = 0; i < lat.d; ++i)
            s.k[i] = klo[i] + static_cast<std::int64_t>(rng.below(
                                  static_cast<std::uint64_t>(khi[i] - klo[i] + 1)));
        if (out.contains(s)) continue;
        auto box = unit_box_of(s, lat);
        if (static_cast<double>(box_counts[box] + 1) > box_cap) continue;
        ++box_counts[box];
        out.insert(s);
    }
    return out;
}

namespace {

// Total order on Z_R: 0, 1/R, -1/R, 2/R, -2/R, ...; lexicographic across
// coordinates. Used for the deterministic thinned-set sub-selection.
std::int64_t spiral_key(std::int64_t v) { return v > 0 ? 2 * v - 1 : -2 * v; }

bool spiral_less(const ScaledSite& a, const ScaledSite& b, int d) {
    for (int i = 0; i < d; ++i) {
        std::int64_t ka = spiral_key(a.k[i]), kb = spiral_key(b.k[i]);
        if (ka != kb) return ka < kb;
    }
    return false;
}

BoxSpec grid_box(const GridSite& g, const BlockConfig& cfg, double radius_factor) {
    auto c = grid_center(g, cfg);
    return BoxSpec{{c[0], c[1], c[2]}, radius_factor * cfg.run.R_theta()};
}

BoxSpec recovered_window(const SiteSet& recovered, const LatticeParams& lat) {
    double R = static_cast<double>(lat.R);
    std::array<double, 3> lo{}, hi{};
    bool first = true;
    for (const auto& s : recovered) {
        for (int i = 0; i < lat.d; ++i) {
            double x = static_cast<double>(s.k[i]) / R;
            if (first || x < lo[i]) lo[i] = x;
            if (first || x > hi[i]) hi[i] = x;
        }
        first = false;
    }
    BoxSpec w;
    double radius = 1.0;
    for (int i = 0; i < lat.d; ++i) {
        w.center[i] = 0.5 * (lo[i] + hi[i]);
        radius = std::max(radius, 0.5 * (hi[i] - lo[i]) + 1.5);
    }
    w.radius = radius;
    return w;
}

struct SegmentOutcome {
    SirRun run;
    std::int64_t tau = 0;         // stopping time
    bool rule_violated = false;   // F1 or F2 failed inside [0, T]
    SiteSet terminal;             // Y_tau (candidate eta*)
    SiteSet swept;                // Y_0 .. Y_{tau-1} (joins rho*)
    std::int64_t sup_neighborhood = 0;
};

SegmentOutcome run_segment(const SiteSet& eta0, const SiteSet& rho_star,
                           const BlockConfig& cfg, const GridSite& x,
                           const EdgeOracle& oracle) {
    const auto& run_params = cfg.run;
    std::int64_t T = run_params.T_theta_R();
    StopRule stop;
    stop.support_box = grid_box(x, cfg, static_cast<double>(cfg.M_tilde()));
    stop.sup_count_limit = cfg.chi * static_cast<double>(run_params.lat.R);

    SegmentOutcome seg;
    seg.run = run_sir(eta0, rho_star, run_params.lat, oracle, T, stop);
    std::int64_t generations =
        static_cast<std::int64_t>(seg.run.infected_by_gen.size()) - 1;
    if (seg.run.verdict == Verdict::RuleFired) {
        seg.rule_violated = true;
        seg.tau = seg.run.verdict_at;
    } else {
        seg.tau = T;
    }
    // Terminal = Y_tau when the run got that far, else empty (extinction).
    if (seg.tau <= generations)
        seg.terminal = seg.run.infected_by_gen[static_cast<std::size_t>(seg.tau)];
    for (std::int64_t n = 0; n < seg.tau && n <= generations; ++n)
        for (const auto& s : seg.run.infected_by_gen[static_cast<std::size_t>(n)])
            seg.swept.insert(s);
    return seg;
}

}  // namespace

GoodEventFlags good_event_probe(const SiteSet& eta0, const SiteSet& rho0,
                                const BlockConfig& cfg, const GridSite& x,
                                const EdgeOracle& oracle) {
    cfg.validate();
    require(!eta0.empty(), "good_event_probe: eta0 must be nonempty");
    const auto& run_params = cfg.run;
    const auto& lat = run_params.lat;
    std::int64_t T = run_params.T_theta_R();

    // Plain run to T (no stopping); events evaluated afterwards.
    SirRun run = run_sir(eta0, rho0, lat, oracle, T);

    GoodEventFlags flags;
    SiteSet cumulative = run.cumulative();

    // F1: cumulative support inside Q_{Mt R_theta}(x R_theta).
    BoxSpec support_box = grid_box(x, cfg, static_cast<double>(cfg.M_tilde()));
    flags.f1_support = true;
    for (const auto& s : cumulative)
        if (!box_contains(support_box, s, lat)) {
            flags.f1_support = false;
            break;
        }

    // F2: sup_y |cumulative cap N(y)| <= chi R.
    if (!cumulative.empty()) {
        auto sup = neighborhood_sup_count(SparseCounts::from_set(cumulative), lat,
                                          recovered_window(cumulative, lat));
        flags.sup_neighborhood = sup.sup;
        flags.f2_local_time =
            static_cast<double>(sup.sup) <=
            cfg.chi * static_cast<double>(lat.R);
    } else {
        flags.f2_local_time = true;
    }

    // Terminal state and its thinned version.
    std::int64_t generations = static_cast<std::int64_t>(run.infected_by_gen.size()) - 1;
    SiteSet terminal = generations >= T
                           ? run.infected_by_gen[static_cast<std::size_t>(T)]
                           : SiteSet{};
    Population thinned = thin(Population{SparseCounts::from_set(terminal), T},
                              cfg.K, run_params);

    std::int64_t need = static_cast<std::int64_t>(eta0.size());
    flags.f3_thinned_mass = true;
    flags.f4_admissible = true;
    for (const auto& z : offspring(x)) {
        BoxSpec zbox = grid_box(z, cfg, 1.0);
        std::int64_t in_box = 0;
        SparseCounts restricted;
        for (const auto& [s, c] : thinned.counts.map())
            if (box_contains(zbox, s, lat)) in_box += c;
        for (const auto& s : terminal)
            if (box_contains(zbox, s, lat)) restricted.add(s, 1);
        if (in_box < need) flags.f3_thinned_mass = false;
        if (!admissibility_check(restricted, cfg.m_admiss, run_params).admissible)
            flags.f4_admissible = false;
    }

    // N(kappa) on the final recovered set rho_T = rho0 + generations < T.
    SiteSet rho_T = rho0;
    for (std::int64_t n = 0; n < T && n <= generations; ++n)
        for (const auto& s : run.infected_by_gen[static_cast<std::size_t>(n)])
            rho_T.insert(s);
    if (rho_T.empty()) {
        flags.n_kappa = true;
    } else {
        auto res = event_N_kappa(rho_T, cfg.kappa(), lat, recovered_window(rho_T, lat));
        flags.n_kappa = res.holds;
    }
    return flags;
}

double oriented_site_uniform(const GridSite& g, std::int64_t dependence_range,
                             std::uint64_t seed) {
    require(g.x1 >= 0 && g.x2 >= 0, "oriented_site_uniform: site must be in Z^2_+");
    require(dependence_range >= 0, "oriented_site_uniform: range must be >= 0");
    // Shared block value: sites in one block are fully dependent, sites in
    // different blocks independent. Block side floor(M/2)+1 keeps intra-block
    // l1 distances at most M.
    std::int64_t side = dependence_range / 2 + 1;
    std::uint64_t h = mix64(seed ^ 0x17de9f3ull);
    h = hash_combine(h, static_cast<std::uint64_t>(g.x1 / side));
    h = hash_combine(h, static_cast<std::uint64_t>(g.x2 / side));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

OrientedResult oriented_percolation(double density, std::int64_t dependence_range,
                                    std::int64_t level_n, std::uint64_t seed) {
    require(density >= 0.0 && density <= 1.0, "oriented_percolation: density in [0,1]");
    require(level_n >= 0, "oriented_percolation: level must be >= 0");

    OrientedResult res;
    auto open = [&](const GridSite& g) {
        return oriented_site_uniform(g, dependence_range, seed) < density;
    };

    // Reachability level by level; parents of (x1,x2) are (x1-1,x2), (x1,x2-1).
    std::vector<char> reach;
    GridSite origin{0, 0};
    if (!open(origin)) return res;
    reach = {1};
    res.open_cluster_size = 1;
    res.frontier_reached = 0;
    for (std::int64_t level = 1; level <= level_n; ++level) {
        std::vector<char> next(static_cast<std::size_t>(level) + 1, 0);
        bool any = false;
        for (std::int64_t x1 = 0; x1 <= level; ++x1) {
            bool from_left = x1 >= 1 && reach[static_cast<std::size_t>(x1 - 1)];
            bool from_below =
                x1 < level && reach[static_cast<std::size_t>(x1)];
            if (!(from_left || from_below)) continue;
            GridSite g{x1, level - x1};
            if (!open(g)) continue;
            next[static_cast<std::size_t>(x1)] = 1;
            any = true;
            ++res.open_cluster_size;
        }
        if (!any) return res;
        res.frontier_reached = level;
        reach = std::move(next);
    }
    res.percolates = true;
    return res;
}

BlockResult block_iteration(const BlockConfig& cfg, const EdgeOracle& oracle,
                            Rng& rng, std::int64_t grid_l1_budget) {
    cfg.validate();
    require(grid_l1_budget >= 0 && grid_l1_budget <= 64,
            "block_iteration: grid budget out of desk range");
    const auto& run_params = cfg.run;
    const auto& lat = run_params.lat;
    double kappa_R = cfg.kappa() * static_cast<double>(lat.R);

    // w_i is carried as per-box stocks: the selection made for each offspring
    // box keeps its box label, so the restart set mu = stock[y] is exact even
    // when adjacent boxes share boundary sites (the per-box selections are
    // independent).
    auto box_less = [](const GridSite& a, const GridSite& b) {
        return std::pair{a.x1, a.x2} < std::pair{b.x1, b.x2};
    };
    std::map<GridSite, SiteSet, decltype(box_less)> stock(box_less);

    BlockResult result;
    SiteSet rho_star;
    std::unordered_map<GridSite, bool, GridSiteHash> occupied;

    SiteSet eta0 = build_initial_condition(cfg.run, cfg.K, {0.0, 0.0, 0.0}, rng);
    std::int64_t eta0_count = static_cast<std::int64_t>(eta0.size());

    std::int64_t index = 0;
    for (;;) {
        ++index;
        GridSite y = gamma_order(index);
        if (y.x1 + y.x2 > grid_l1_budget) break;

        BlockSiteRecord rec;
        rec.site = y;
        rec.visited = true;

        SiteSet mu;
        bool run_case;
        if (index == 1) {
            mu = eta0;
            run_case = true;
        } else {
            // Case I iff y is an immediate offspring of an occupied site;
            // its box must then carry a stocked selection.
            bool has_parent = false;
            if (y.x1 >= 1 && occupied[GridSite{y.x1 - 1, y.x2}]) has_parent = true;
            if (y.x2 >= 1 && occupied[GridSite{y.x1, y.x2 - 1}]) has_parent = true;
            run_case = has_parent;
            if (has_parent) {
                auto it = stock.find(y);
                if (it == stock.end() ||
                    static_cast<std::int64_t>(it->second.size()) != eta0_count) {
                    ++result.bookkeeping_violations;
                }
                if (it != stock.end()) {
                    mu = it->second;
                    stock.erase(it);
                }
            }
            // Case II: stocks carry forward untouched.
        }

        if (run_case && !mu.empty()) {
            rec.case_one = true;
            // nu_prev for the event constraint: everything still stocked.
            SiteSet nu_prev;
            for (const auto& [box, sites] : stock)
                for (const auto& s : sites) nu_prev.insert(s);

            // Sources already recovered cannot spread; run from the live part.
            SiteSet live;
            for (const auto& s : mu)
                if (!rho_star.contains(s)) live.insert(s);

            SegmentOutcome seg = run_segment(live, rho_star, cfg, y, oracle);
            rec.flags.f1_support = !seg.rule_violated;
            rec.flags.f2_local_time = !seg.rule_violated;
            rec.tau = seg.tau;

            // Good event on the full segment: F1/F2 survived to T, then F3/F4.
            bool good = !seg.rule_violated;
            std::vector<std::pair<GridSite, SiteSet>> new_stocks;
            if (good) {
                Population thinned = thin(
                    Population{SparseCounts::from_set(seg.terminal), seg.tau}, cfg.K,
                    run_params);
                rec.flags.f3_thinned_mass = true;
                rec.flags.f4_admissible = true;
                for (const auto& z : offspring(y)) {
                    BoxSpec zbox = grid_box(z, cfg, 1.0);
                    std::vector<ScaledSite> in_box;
                    for (const auto& [s, c] : thinned.counts.map())
                        if (box_contains(zbox, s, lat)) in_box.push_back(s);
                    if (static_cast<std::int64_t>(in_box.size()) < eta0_count) {
                        rec.flags.f3_thinned_mass = false;
                        good = false;
                        continue;
                    }
                    // Sub-select exactly |eta0| sites in the fixed total order.
                    std::sort(in_box.begin(), in_box.end(),
                              [&](const ScaledSite& a, const ScaledSite& b) {
                                  return spiral_less(a, b, lat.d);
                              });
                    in_box.resize(static_cast<std::size_t>(eta0_count));
                    SparseCounts restricted;
                    for (const auto& s : in_box) restricted.add(s, 1);
                    if (!admissibility_check(restricted, cfg.m_admiss, run_params)
                             .admissible) {
                        rec.flags.f4_admissible = false;
                        good = false;
                        continue;
                    }
                    // Skip boxes already stocked by an earlier occupied site
                    // (the restricted offspring set of the construction).
                    if (stock.find(z) == stock.end()) {
                        SiteSet sel(in_box.begin(), in_box.end());
                        new_stocks.emplace_back(z, std::move(sel));
                    }
                }
            }

            // rho* absorbs the swept generations (Y_0 .. Y_{tau-1}).
            for (const auto& s : seg.swept) rho_star.insert(s);

            // kappa invariant on the accumulated recovered set.
            if (!rho_star.empty()) {
                auto sup = neighborhood_sup_count(SparseCounts::from_set(rho_star),
                                                  lat, recovered_window(rho_star, lat));
                if (static_cast<double>(sup.sup) > kappa_R) ++result.kappa_violations;
            }

            if (good) {
                rec.occupied = true;
                occupied[y] = true;
                // The event constraint: (mu_i cup nu_i) inside (eta* cup nu_prev).
                for (const auto& [z, sites] : new_stocks) {
                    for (const auto& s : sites)
                        if (!seg.terminal.contains(s) && !nu_prev.contains(s))
                            ++result.bookkeeping_violations;
                    stock[z] = sites;
                }
            }
        }

        if (rec.occupied) result.omega.push_back(y);
        result.records.push_back(rec);
    }
    return result;
}

std::vector<std::pair<GridSite, int>> xi_field(const BlockResult& result,
                                               double eps0, Rng& rng) {
    require(eps0 > 0.0 && eps0 < 1.0 / 14.0, "xi_field: need eps0 in (0, 1/14)");
    std::unordered_map<GridSite, bool, GridSiteHash> occupied;
    for (const auto& g : result.omega) occupied[g] = true;
    std::vector<std::pair<GridSite, int>> field;
    for (const auto& rec : result.records) {
        int xi;
        if (occupied[rec.site]) {
            auto kids = offspring(rec.site);
            xi = (occupied[kids[0]] && occupied[kids[1]]) ? 1 : 0;
        } else {
            xi = rng.bernoulli(1.0 - 14.0 * eps0) ? 1 : 0;
        }
        field.emplace_back(rec.site, xi);
    }
    return field;
}

}  // namespace rangepc
