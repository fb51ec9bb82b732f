#include "rangepc/sir.hpp"

#include <algorithm>
#include <deque>

namespace rangepc {

namespace {

std::vector<ScaledSite> sorted_sites(const SiteSet& set) {
    std::vector<ScaledSite> v(set.begin(), set.end());
    std::sort(v.begin(), v.end(), site_less);
    return v;
}

// Incremental sup of cumulative neighborhood counts for the stop rule.
class NeighborhoodCounter {
  public:
    explicit NeighborhoodCounter(const LatticeParams& lat) : lat_(lat) {}

    void add(const ScaledSite& s) {
        for_each_neighbor(s, lat_, [&](const ScaledSite& center) {
            std::int64_t c = ++counts_[center];
            if (c > max_) max_ = c;
        });
    }

    std::int64_t max_count() const { return max_; }

  private:
    LatticeParams lat_;
    std::unordered_map<ScaledSite, std::int64_t, SiteHash> counts_;
    std::int64_t max_ = 0;
};

}  // namespace

EpidemicState sir_step(const EpidemicState& state, const LatticeParams& lat,
                       const EdgeOracle& oracle, AttemptCounts* attempts) {
    lat.validate();
    EpidemicState next;
    next.generation = state.generation + 1;
    next.recovered = state.recovered;
    for (const auto& s : state.infected) next.recovered.insert(s);

    for (const auto& x : sorted_sites(state.infected)) {
        for_each_neighbor(x, lat, [&](const ScaledSite& y) {
            if (state.infected.contains(y) || state.recovered.contains(y)) return;
            if (!oracle.open(x, y)) return;
            next.infected.insert(y);
            if (attempts) ++(*attempts)[y];
        });
    }
    return next;
}

SirRun run_sir(const SiteSet& eta0, const SiteSet& rho0, const LatticeParams& lat,
               const EdgeOracle& oracle, std::int64_t horizon,
               const StopRule& stop, bool record_attempts) {
    lat.validate();
    require(horizon >= 0, "run_sir: horizon must be >= 0");
    for (const auto& s : eta0)
        require(!rho0.contains(s), "run_sir: eta0 and rho0 must be disjoint");

    SirRun run;
    run.rho0 = rho0;
    run.infected_by_gen.push_back(eta0);

    std::optional<NeighborhoodCounter> counter;
    if (stop.sup_count_limit) {
        counter.emplace(lat);
        for (const auto& s : eta0) counter->add(s);
    }

    auto rule_fired = [&](const SiteSet& newly) -> bool {
        if (stop.population_threshold &&
            static_cast<std::int64_t>(newly.size()) >= *stop.population_threshold)
            return true;
        if (stop.support_box) {
            for (const auto& s : newly)
                if (!box_contains(*stop.support_box, s, lat)) return true;
        }
        if (counter) {
            for (const auto& s : newly) counter->add(s);
            if (static_cast<double>(counter->max_count()) > *stop.sup_count_limit)
                return true;
        }
        return false;
    };

    // The rule also inspects the initial condition (escape / sup-count only).
    {
        bool fired0 = false;
        if (stop.support_box)
            for (const auto& s : eta0)
                if (!box_contains(*stop.support_box, s, lat)) fired0 = true;
        if (counter &&
            static_cast<double>(counter->max_count()) > *stop.sup_count_limit)
            fired0 = true;
        if (stop.population_threshold &&
            static_cast<std::int64_t>(eta0.size()) >= *stop.population_threshold)
            fired0 = true;
        if (fired0) {
            run.verdict = Verdict::RuleFired;
            run.verdict_at = 0;
            return run;
        }
    }

    EpidemicState state{eta0, rho0, 0};
    for (std::int64_t n = 1; n <= horizon; ++n) {
        AttemptCounts attempts;
        EpidemicState next =
            sir_step(state, lat, oracle, record_attempts ? &attempts : nullptr);
        if (record_attempts) run.attempts_by_gen.push_back(std::move(attempts));
        run.infected_by_gen.push_back(next.infected);
        if (next.infected.empty()) {
            run.verdict = Verdict::Extinct;
            run.verdict_at = n;
            return run;
        }
        if (rule_fired(next.infected)) {
            run.verdict = Verdict::RuleFired;
            run.verdict_at = n;
            return run;
        }
        state = std::move(next);
    }
    run.verdict = Verdict::SurvivedHorizon;
    run.verdict_at = horizon;
    return run;
}

SiteSet bfs_ball(const SiteSet& eta0, const SiteSet& rho0, const LatticeParams& lat,
                 const EdgeOracle& oracle, std::int64_t n) {
    lat.validate();
    require(n >= 0, "bfs_ball: n must be >= 0");
    SiteSet visited;
    std::deque<std::pair<ScaledSite, std::int64_t>> queue;
    for (const auto& s : sorted_sites(eta0)) {
        if (rho0.contains(s)) continue;  // edges at rho0 are deleted anyway
        visited.insert(s);
        queue.emplace_back(s, 0);
    }
    while (!queue.empty()) {
        auto [x, dist] = queue.front();
        queue.pop_front();
        if (dist == n) continue;
        for_each_neighbor(x, lat, [&](const ScaledSite& y) {
            if (visited.contains(y) || rho0.contains(y)) return;
            if (!oracle.open(x, y)) return;
            visited.insert(y);
            queue.emplace_back(y, dist + 1);
        });
    }
    return visited;
}

CoupledRun coupled_step_run(const SiteSet& eta0, const SiteSet& rho0,
                            const SparseCounts& z0, const RunParams& params,
                            Rng& rng, std::int64_t horizon, bool with_etabar,
                            bool with_brw) {
    params.validate();
    require(horizon >= 0, "coupled_step_run: horizon must be >= 0");
    const auto& lat = params.lat;
    std::int64_t V = lat.volume();
    double p = params.p();

    // Domination at construction: Z_0 >= eta_bar_0 = eta_0.
    SparseCounts etabar0 = SparseCounts::from_set(eta0);
    for (const auto& s : eta0) {
        require(!rho0.contains(s), "coupled_step_run: eta0 and rho0 must be disjoint");
        if (with_brw)
            require(z0.at(s) >= 1, "coupled_step_run: Z0 does not dominate eta0");
    }

    CoupledRun out;
    out.rho0 = rho0;
    out.eta.push_back(eta0);
    if (with_etabar) out.eta_bar.push_back(etabar0);
    if (with_brw) {
        out.brw.params = params;
        out.brw.gens.push_back(z0);
    }

    SiteSet eta = eta0;
    SiteSet rho = rho0;
    SparseCounts etabar = etabar0;
    SparseCounts z = with_brw ? z0 : etabar0;

    for (std::int64_t n = 1; n <= horizon; ++n) {
        // Particle source: the envelope when present, else the modified SIR.
        const SparseCounts& source = with_brw ? z : etabar;
        std::vector<const std::pair<const ScaledSite, std::int64_t>*> order;
        order.reserve(source.support_size());
        for (const auto& e : source.map()) order.push_back(&e);
        std::sort(order.begin(), order.end(),
                  [](auto* a, auto* b) { return site_less(a->first, b->first); });

        SiteSet eta_next;
        SparseCounts etabar_next;
        SparseCounts z_next;

        for (const auto* entry : order) {
            const ScaledSite& x = entry->first;
            std::int64_t particles = entry->second;
            std::int64_t bar_here = with_etabar ? etabar.at(x) : 0;
            bool infected_here = eta.contains(x);
            for (std::int64_t j = 0; j < particles; ++j) {
                std::int64_t births = rng.binomial(V, p);
                std::vector<ScaledSite> targets;
                if (births > 0)
                    targets = sample_distinct_neighbors(x, births, lat, rng);
                if (with_brw)
                    for (const auto& y : targets) z_next.add(y, 1);
                // Modified SIR: resident particles birth onto targets not yet
                // recovered in the plain epidemic; multiple occupancy allowed,
                // so per particle the offspring count is Bin(V - |rho cap N|, p).
                if (with_etabar && j < bar_here) {
                    for (const auto& y : targets)
                        if (!rho.contains(y)) etabar_next.add(y, 1);
                }
                // Plain epidemic: the designated (first) particle's births,
                // restricted to susceptible targets, first come first served.
                if (infected_here && j == 0) {
                    for (const auto& y : targets)
                        if (!rho.contains(y) && !eta.contains(y)) eta_next.insert(y);
                }
            }
        }

        // Pathwise domination check: eta <= eta_bar <= Z.
        for (const auto& s : eta_next) {
            if (with_etabar && etabar_next.at(s) < 1) ++out.domination_violations;
            if (with_brw && z_next.at(s) < 1) ++out.domination_violations;
        }
        if (with_etabar && with_brw)
            for (const auto& [s, c] : etabar_next.map())
                if (z_next.at(s) < c) ++out.domination_violations;

        for (const auto& s : eta) rho.insert(s);
        eta = std::move(eta_next);
        out.eta.push_back(eta);
        if (with_etabar) {
            etabar = etabar_next;
            out.eta_bar.push_back(std::move(etabar_next));
        }
        if (with_brw) {
            z = z_next;
            out.brw.gens.push_back(std::move(z_next));
        }
        if (eta.empty() && (!with_brw || z.empty()) && (!with_etabar || etabar.empty()))
            break;
    }
    return out;
}

CoupledRun coupled_run(const SiteSet& eta0, const SiteSet& rho0,
                       const SparseCounts& z0, const RunParams& params, Rng& rng,
                       std::int64_t horizon) {
    return coupled_step_run(eta0, rho0, z0, params, rng, horizon,
                            /*with_etabar=*/false, /*with_brw=*/true);
}

CoupledRun run_modified_sir(const SiteSet& eta0, const SiteSet& rho0,
                            const RunParams& params, Rng& rng, std::int64_t horizon) {
    return coupled_step_run(eta0, rho0, SparseCounts::from_set(eta0), params, rng,
                            horizon, /*with_etabar=*/true, /*with_brw=*/false);
}

ImmigrationRun run_with_immigration(const ImmigrationSchedule& schedule,
                                    const SiteSet& rho0, const LatticeParams& lat,
                                    const EdgeOracle& oracle, std::int64_t horizon) {
    lat.validate();
    schedule.validate();
    require(horizon >= 0, "run_with_immigration: horizon must be >= 0");
    for (const auto& s : schedule.mu0)
        require(!rho0.contains(s), "run_with_immigration: mu0 meets rho0");
    for (const auto& s : schedule.nu0)
        require(!rho0.contains(s), "run_with_immigration: nu0 meets rho0");

    ImmigrationRun run;
    SiteSet mu = schedule.mu0;     // current restart set (sources at tau_i)
    SiteSet nu = schedule.nu0;     // carried immigrant set
    SiteSet rho = rho0;            // rho*_{tau_i} at segment start
    SiteSet eta = mu;              // current infected
    SiteSet segment_prev;          // infected accumulated inside the segment
    bool frozen = false;

    run.eta_star_by_gen.push_back(eta);
    std::size_t next_event = 0;

    for (std::int64_t n = 0; n <= horizon; ++n) {
        // Apply events scheduled at time n (several may coincide).
        while (next_event < schedule.events.size() &&
               schedule.events[next_event].time == n) {
            const auto& ev = schedule.events[next_event];
            ++next_event;
            if (ev.freeze) {
                frozen = true;
                continue;
            }
            auto [mu_i, nu_i] = ev.choose(eta, nu);
            // Constraint (mu_i cup nu_i) subseteq (eta* cup nu_prev).
            for (const auto& s : mu_i)
                ensure(eta.contains(s) || nu.contains(s),
                       "immigration: mu_i outside eta* cup nu_prev");
            for (const auto& s : nu_i)
                ensure(eta.contains(s) || nu.contains(s),
                       "immigration: nu_i outside eta* cup nu_prev");
            // Forgetting: only mu_i joins the recovered set (next step); the
            // rest of eta* is dropped. rho already holds past segments.
            for (const auto& s : segment_prev) rho.insert(s);
            segment_prev.clear();
            mu = mu_i;
            nu = nu_i;
            // Recovered members of mu cannot spread; drop them as sources.
            SiteSet live;
            for (const auto& s : mu)
                if (!rho.contains(s)) live.insert(s);
            eta = live;
        }
        if (n == horizon) break;

        if (frozen) {
            run.eta_star_by_gen.push_back(eta);
            continue;
        }

        // One SIR generation from (eta, rho cup mu cup segment_prev).
        SiteSet blocked = rho;
        for (const auto& s : segment_prev) blocked.insert(s);
        for (const auto& s : eta) blocked.insert(s);

        SiteSet next;
        for (const auto& x : sorted_sites(eta)) {
            for_each_neighbor(x, lat, [&](const ScaledSite& y) {
                if (blocked.contains(y) || next.contains(y)) return;
                if (!oracle.open(x, y)) return;
                next.insert(y);
            });
        }
        for (const auto& s : eta) segment_prev.insert(s);
        eta = std::move(next);
        run.eta_star_by_gen.push_back(eta);
    }
    return run;
}

CollisionCount count_collisions(const AttemptCounts& attempts) {
    CollisionCount out;
    for (const auto& [site, k] : attempts) {
        if (k >= 2) {
            std::int64_t gamma = k * (k - 1) / 2;
            out.per_site.add(site, gamma);
            out.total += gamma;
        }
    }
    return out;
}

NKappaResult event_N_kappa(const SiteSet& recovered, double kappa,
                           const LatticeParams& lat, const BoxSpec& window) {
    lat.validate();
    NKappaResult res;
    if (recovered.empty()) {
        res.holds = true;
        return res;
    }
    auto sup = neighborhood_sup_count(SparseCounts::from_set(recovered), lat, window);
    res.sup = sup.sup;
    res.argmax = sup.argmax;
    res.holds = static_cast<double>(sup.sup) <= kappa * static_cast<double>(lat.R);
    return res;
}

// --- Survival probe ----------------------------------------------------------

namespace {

// Dense byte-state board for the hot probe loop.
class Board {
  public:
    Board(int d, std::int64_t radius) : d_(d), radius_(radius) {
        side_ = 2 * radius_ + 1;
        double cells = std::pow(static_cast<double>(side_), d_);
        require(cells <= 1.0e9, "survival_probe: board budget exceeded");
        cells_.assign(static_cast<std::size_t>(cells), 0);
    }

    std::int64_t radius() const { return radius_; }

    bool inside(const ScaledSite& s) const {
        for (int i = 0; i < d_; ++i)
            if (s.k[i] < -radius_ || s.k[i] > radius_) return false;
        return true;
    }

    std::uint8_t& at(const ScaledSite& s) {
        std::size_t idx = 0;
        for (int i = 0; i < d_; ++i)
            idx = idx * static_cast<std::size_t>(side_) +
                  static_cast<std::size_t>(s.k[i] + radius_);
        return cells_[idx];
    }

  private:
    int d_;
    std::int64_t radius_;
    std::int64_t side_;
    std::vector<std::uint8_t> cells_;
};

}  // namespace

bool survival_probe(double p, const LatticeParams& lat, std::uint64_t oracle_seed,
                    const SurvivalProxy& proxy) {
    lat.validate();
    require(p >= 0.0 && p <= 1.0, "survival_probe: p must be in [0,1]");
    require(proxy.g_max >= 1, "survival_probe: g_max must be >= 1");

    // Supercritical-certainty shortcut: populations this large essentially
    // never go extinct before the horizon (the 500 cap keeps large-R probes
    // affordable; the misclassification probability is astronomically small).
    std::int64_t pop_exit = proxy.population_exit > 0
                                ? proxy.population_exit
                                : std::min<std::int64_t>(10 * lat.volume(), 500);

    std::vector<ScaledSite> offsets;
    offsets.reserve(static_cast<std::size_t>(lat.volume()));
    for_each_neighbor(ScaledSite{}, lat, [&](const ScaledSite& e) {
        offsets.push_back(e);
    });

    constexpr std::uint8_t kSusceptible = 0, kInfected = 1, kRemoved = 2;
    Board board(lat.d, 32 * lat.R);
    std::vector<ScaledSite> frontier{ScaledSite{}};
    std::vector<ScaledSite> removed;  // append-only, for board regrowth
    board.at(ScaledSite{}) = kInfected;
    std::vector<ScaledSite> next;

    for (std::int64_t n = 1; n <= proxy.g_max; ++n) {
        // Grow the board up front if this generation could step off it.
        std::int64_t needed = 0;
        for (const auto& x : frontier)
            for (int i = 0; i < lat.d; ++i) {
                std::int64_t reach = (x.k[i] < 0 ? -x.k[i] : x.k[i]) + lat.R;
                if (reach > needed) needed = reach;
            }
        if (needed > board.radius()) {
            Board bigger(lat.d, std::max(needed, 2 * board.radius()));
            for (const auto& s : removed) bigger.at(s) = kRemoved;
            for (const auto& s : frontier) bigger.at(s) = kInfected;
            board = std::move(bigger);
        }

        next.clear();
        for (const auto& x : frontier) {
            for (const auto& e : offsets) {
                ScaledSite y{{x.k[0] + e.k[0], x.k[1] + e.k[1], x.k[2] + e.k[2]}};
                std::uint8_t& cell = board.at(y);
                if (cell != kSusceptible) continue;
                if (edge_uniform(oracle_seed, x, y) >= p) continue;
                cell = kInfected;
                next.push_back(y);
            }
        }
        for (const auto& x : frontier) {
            board.at(x) = kRemoved;
            removed.push_back(x);
        }
        frontier.swap(next);
        if (frontier.empty()) return false;
        if (static_cast<std::int64_t>(frontier.size()) >= pop_exit) return true;
        if (proxy.escape_radius) {
            for (const auto& s : frontier) {
                for (int i = 0; i < lat.d; ++i) {
                    double x = static_cast<double>(s.k[i]) / static_cast<double>(lat.R);
                    if (std::fabs(x) > *proxy.escape_radius) return true;
                }
            }
        }
    }
    return true;
}

}  // namespace rangepc
