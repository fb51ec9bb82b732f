#include <doctest.h>

#include "helpers.hpp"
#include "rangepc/sir.hpp"

using namespace rangepc;

namespace {

SiteSet origin_set() { return SiteSet{ScaledSite{}}; }

}  // namespace

TEST_SUITE("sir") {

TEST_CASE("edge oracle is symmetric and consistent") {
    EdgeOracle oracle{42, 0.5};
    Rng rng(1);
    for (int i = 0; i < 300; ++i) {
        ScaledSite a = site2(static_cast<std::int64_t>(rng.below(9)) - 4,
                             static_cast<std::int64_t>(rng.below(9)) - 4);
        ScaledSite b = site2(a.k[0] + static_cast<std::int64_t>(rng.below(5)) - 2,
                             a.k[1] + static_cast<std::int64_t>(rng.below(5)) - 2);
        if (a == b) continue;
        CHECK(oracle.uniform(Edge(a, b)) == oracle.uniform(Edge(b, a)));
        CHECK(oracle.uniform(Edge(a, b)) == oracle.uniform(Edge(a, b)));
    }
    // roughly uniform marginals
    int opens = 0;
    for (int i = 0; i < 20000; ++i) {
        ScaledSite a = site2(i, 0), b = site2(i, 1);
        if (oracle.open(a, b)) ++opens;
    }
    CHECK(std::abs(opens - 10000) < 4 * 71);  // 4 sigma of Bin(20000, 1/2)
}

TEST_CASE("sir_step degenerate environments") {
    LatticeParams lat{2, 1};
    EpidemicState state{origin_set(), {}, 0};

    EdgeOracle all_open{7, 1.0};
    auto next = sir_step(state, lat, all_open);
    CHECK(next.infected.size() == 8);  // exactly N(0)
    CHECK(next.recovered.size() == 1);

    EdgeOracle all_closed{7, 0.0};
    next = sir_step(state, lat, all_closed);
    CHECK(next.infected.empty());
    CHECK(next.recovered.contains(ScaledSite{}));

    EpidemicState empty{{}, origin_set(), 3};
    next = sir_step(empty, lat, all_open);
    CHECK(next.infected.empty());
    CHECK(next.recovered == origin_set());
}

TEST_CASE("run_sir verdicts") {
    LatticeParams lat{2, 1};
    EdgeOracle closed{3, 0.0};
    auto run = run_sir(origin_set(), {}, lat, closed, 50);
    CHECK(run.verdict == Verdict::Extinct);
    CHECK(run.verdict_at == 1);

    EdgeOracle open{3, 1.0};
    auto grow = run_sir(origin_set(), {}, lat, open, 5);
    CHECK(grow.verdict == Verdict::SurvivedHorizon);

    StopRule pop_rule;
    pop_rule.population_threshold = 5;
    auto fired = run_sir(origin_set(), {}, lat, open, 50, pop_rule);
    CHECK(fired.verdict == Verdict::RuleFired);
    CHECK(fired.verdict_at == 1);
}

TEST_CASE("epidemic invariants along runs") {
    LatticeParams lat{2, 2};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EdgeOracle oracle{seed, 1.8 / static_cast<double>(lat.volume())};
        auto run = run_sir(origin_set(), {}, lat, oracle, 30);
        // eta_n disjoint from rho_n, rho nondecreasing along the run
        SiteSet rho = run.rho0;
        for (std::size_t n = 0; n < run.infected_by_gen.size(); ++n) {
            for (const auto& s : run.infected_by_gen[n]) CHECK_FALSE(rho.contains(s));
            for (const auto& s : run.infected_by_gen[n]) rho.insert(s);
        }
    }
}

TEST_CASE("determinism: same oracle, same run") {
    LatticeParams lat{2, 2};
    EdgeOracle oracle{99, 0.06};
    auto a = run_sir(origin_set(), {}, lat, oracle, 25);
    auto b = run_sir(origin_set(), {}, lat, oracle, 25);
    REQUIRE(a.infected_by_gen.size() == b.infected_by_gen.size());
    for (std::size_t i = 0; i < a.infected_by_gen.size(); ++i)
        CHECK(a.infected_by_gen[i] == b.infected_by_gen[i]);
}

TEST_CASE("cumulative infection set equals the BFS ball (every run)") {
    LatticeParams lat{2, 2};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        EdgeOracle oracle{derive_stream(1000, seed), 0.055};
        SiteSet eta0 = origin_set();
        eta0.insert(site2(3, 1));
        SiteSet rho0{site2(1, 0), site2(-2, 2)};
        std::int64_t n = 12;
        auto run = run_sir(eta0, rho0, lat, oracle, n);
        auto ball = bfs_ball(eta0, rho0, lat, oracle, n);
        CHECK(run.cumulative() == ball);
    }
}

TEST_CASE("shrinking eta0 shrinks the cumulative set (same oracle)") {
    LatticeParams lat{2, 2};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        EdgeOracle oracle{derive_stream(2000, seed), 0.06};
        SiteSet big{ScaledSite{}, site2(2, 2), site2(-3, 1)};
        SiteSet small{ScaledSite{}, site2(2, 2)};
        SiteSet rho0{site2(0, 2)};
        auto run_big = run_sir(big, rho0, lat, oracle, 10);
        auto run_small = run_sir(small, rho0, lat, oracle, 10);
        auto cum_big = run_big.cumulative();
        for (const auto& s : run_small.cumulative()) CHECK(cum_big.contains(s));
    }
}

TEST_CASE("coupled run: envelope dominates the epidemic") {
    RunParams params{{2, 2}, 1.0, 100.0};
    int violations = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(derive_stream(3000, seed));
        SparseCounts z0 = SparseCounts::from_set(origin_set());
        auto run = coupled_run(origin_set(), {}, z0, params, rng, 8);
        violations += run.domination_violations;
        // |eta_n| <= Z_n(1) for every n
        for (std::size_t n = 0; n < run.eta.size(); ++n)
            CHECK(static_cast<std::int64_t>(run.eta[n].size()) <=
                  run.brw.gens[n].total_mass());
    }
    CHECK(violations == 0);
}

TEST_CASE("coupled run rejects non-dominating Z0") {
    RunParams params{{2, 1}, 1.0, 100.0};
    Rng rng(1);
    SparseCounts z0;  // empty: does not dominate eta0
    CHECK_THROWS_AS(coupled_run(origin_set(), {}, z0, params, rng, 3),
                    std::invalid_argument);
}

TEST_CASE("modified SIR dominates plain SIR; triple chain holds") {
    RunParams params{{2, 2}, 1.0, 100.0};
    int violations = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        Rng rng(derive_stream(4000, seed));
        SiteSet eta0 = origin_set();
        eta0.insert(site2(1, 1));
        SparseCounts z0 = SparseCounts::from_set(eta0);
        auto run = coupled_step_run(eta0, {}, z0, params, rng, 6, /*with_etabar=*/true,
                                    /*with_brw=*/true);
        violations += run.domination_violations;
        for (std::size_t n = 0; n < run.eta.size(); ++n) {
            for (const auto& s : run.eta[n]) {
                CHECK(run.eta_bar[n].at(s) >= 1);
                CHECK(run.brw.gens[n].at(s) >= run.eta_bar[n].at(s));
            }
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("modified SIR: blocked neighborhood gives zero births") {
    RunParams params{{2, 1}, 1.0, 100.0};
    Rng rng(8);
    SiteSet rho0;
    for_each_neighbor(ScaledSite{}, params.lat, [&](const ScaledSite& s) {
        rho0.insert(s);
    });
    auto run = run_modified_sir(origin_set(), rho0, params, rng, 3);
    CHECK(run.eta_bar[1].total_mass() == 0);
}

TEST_CASE("modified SIR single-source mean offspring = V p") {
    RunParams params{{2, 2}, 1.0, 100.0};
    const int reps = 20000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < reps; ++i) {
        Rng rng(derive_stream(5000, static_cast<std::uint64_t>(i)));
        auto run = run_modified_sir(origin_set(), {}, params, rng, 1);
        double m = static_cast<double>(run.eta_bar[1].total_mass());
        sum += m;
        sum_sq += m * m;
    }
    double mean = sum / reps;
    double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
    CHECK(std::fabs(mean - params.growth()) <= 4.0 * se);  // V p = 1 + theta/R
}

TEST_CASE("immigration: empty schedule equals plain SIR") {
    LatticeParams lat{2, 2};
    EdgeOracle oracle{31337, 0.05};
    ImmigrationSchedule sched;
    sched.mu0 = origin_set();
    auto imm = run_with_immigration(sched, {}, lat, oracle, 15);
    auto plain = run_sir(origin_set(), {}, lat, oracle, 15);
    for (std::size_t n = 0; n < imm.eta_star_by_gen.size() &&
                            n < plain.infected_by_gen.size();
         ++n)
        CHECK(imm.eta_star_by_gen[n] == plain.infected_by_gen[n]);
}

TEST_CASE("immigration: cumulative sets nested inside the big epidemic") {
    LatticeParams lat{2, 2};
    int bad = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        EdgeOracle oracle{derive_stream(6000, seed), 0.06};
        SiteSet mu0 = origin_set();
        SiteSet nu0{site2(2, -1)};
        SiteSet eta0 = mu0;
        for (const auto& s : nu0) eta0.insert(s);

        ImmigrationSchedule sched;
        sched.mu0 = mu0;
        sched.nu0 = nu0;
        Rng pick(seed * 7 + 1);
        for (std::int64_t t : {3, 7}) {
            ImmigrationEvent ev;
            ev.time = t;
            ev.choose = [&pick](const SiteSet& eta_star, const SiteSet& nu_prev) {
                // random split of eta* cup nu_prev into (mu, nu)
                SiteSet mu, nu;
                for (const auto& s : eta_star)
                    (pick.bernoulli(0.7) ? mu : nu).insert(s);
                for (const auto& s : nu_prev)
                    (pick.bernoulli(0.5) ? mu : nu).insert(s);
                return std::make_pair(mu, nu);
            };
            sched.events.push_back(ev);
        }
        auto imm = run_with_immigration(sched, {}, lat, oracle, 14);
        auto plain = run_sir(eta0, {}, lat, oracle, 14);

        SiteSet cum_star, cum;
        for (const auto& g : plain.infected_by_gen) cum.insert(g.begin(), g.end());
        for (const auto& g : imm.eta_star_by_gen) cum_star.insert(g.begin(), g.end());
        for (const auto& s : cum_star)
            if (!cum.contains(s)) ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("immigration at a single fixed time: inclusion holds") {
    // One event at k*: everything current plus the carried immigrants
    // restarts together (nothing forgotten). Cumulative sets stay inside the
    // epidemic started from mu0 cup nu0.
    LatticeParams lat{2, 2};
    int bad = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        EdgeOracle oracle{derive_stream(6500, seed), 0.06};
        SiteSet mu0{ScaledSite{}};
        SiteSet nu0{site2(3, 0), site2(-1, 2)};
        SiteSet eta0 = mu0;
        for (const auto& s : nu0) eta0.insert(s);

        ImmigrationSchedule sched;
        sched.mu0 = mu0;
        sched.nu0 = nu0;
        ImmigrationEvent ev;
        ev.time = 3 + static_cast<std::int64_t>(seed % 4);
        ev.choose = [](const SiteSet& eta_star, const SiteSet& nu_prev) {
            SiteSet mu = eta_star;
            for (const auto& s : nu_prev) mu.insert(s);
            return std::make_pair(mu, SiteSet{});
        };
        sched.events.push_back(ev);

        auto imm = run_with_immigration(sched, {}, lat, oracle, 12);
        auto plain = run_sir(eta0, {}, lat, oracle, 12);
        SiteSet cum;
        for (const auto& g : plain.infected_by_gen) cum.insert(g.begin(), g.end());
        for (const auto& g : imm.eta_star_by_gen)
            for (const auto& s : g)
                if (!cum.contains(s)) ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("immigration at a stopping time: inclusion holds") {
    // Event fires at the first generation with at least 3 infected sites
    // (computed from the run itself, a stopping-time rule).
    LatticeParams lat{2, 2};
    int bad = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        EdgeOracle oracle{derive_stream(6600, seed), 0.07};
        SiteSet mu0{ScaledSite{}};
        SiteSet nu0{site2(2, 2)};
        SiteSet eta0 = mu0;
        for (const auto& s : nu0) eta0.insert(s);

        // Realize the stopping time by a pre-pass on the same oracle.
        auto pre = run_sir(mu0, {}, lat, oracle, 10);
        std::int64_t tau = 10;
        for (std::size_t n = 0; n < pre.infected_by_gen.size(); ++n)
            if (static_cast<std::int64_t>(pre.infected_by_gen[n].size()) >= 3) {
                tau = static_cast<std::int64_t>(n);
                break;
            }

        ImmigrationSchedule sched;
        sched.mu0 = mu0;
        sched.nu0 = nu0;
        ImmigrationEvent ev;
        ev.time = tau;
        ev.choose = [](const SiteSet& eta_star, const SiteSet& nu_prev) {
            SiteSet mu = eta_star;
            for (const auto& s : nu_prev) mu.insert(s);
            return std::make_pair(mu, SiteSet{});
        };
        sched.events.push_back(ev);

        auto imm = run_with_immigration(sched, {}, lat, oracle, 12);
        auto plain = run_sir(eta0, {}, lat, oracle, 12);
        SiteSet cum;
        for (const auto& g : plain.infected_by_gen) cum.insert(g.begin(), g.end());
        for (const auto& g : imm.eta_star_by_gen)
            for (const auto& s : g)
                if (!cum.contains(s)) ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("immigration: freeze keeps eta* constant") {
    LatticeParams lat{2, 1};
    EdgeOracle oracle{5, 0.4};
    ImmigrationSchedule sched;
    sched.mu0 = origin_set();
    ImmigrationEvent freeze;
    freeze.time = 4;
    freeze.freeze = true;
    sched.events.push_back(freeze);
    auto imm = run_with_immigration(sched, {}, lat, oracle, 10);
    REQUIRE(imm.eta_star_by_gen.size() == 11);
    for (std::size_t n = 4; n < 10; ++n)
        CHECK(imm.eta_star_by_gen[n] == imm.eta_star_by_gen[n + 1]);
}

TEST_CASE("immigration: schedule constraint violations throw") {
    LatticeParams lat{2, 1};
    EdgeOracle oracle{5, 0.4};
    ImmigrationSchedule sched;
    sched.mu0 = origin_set();
    ImmigrationEvent ev;
    ev.time = 2;
    ev.choose = [](const SiteSet&, const SiteSet&) {
        return std::make_pair(SiteSet{site2(50, 50)}, SiteSet{});
    };
    sched.events.push_back(ev);
    CHECK_THROWS_AS(run_with_immigration(sched, {}, lat, oracle, 6),
                    std::runtime_error);
}

TEST_CASE("collision counting") {
    AttemptCounts attempts;
    attempts[site2(0, 0)] = 1;
    attempts[site2(1, 0)] = 3;
    attempts[site2(2, 0)] = 2;
    auto cc = count_collisions(attempts);
    CHECK(cc.per_site.at(site2(0, 0)) == 0);
    CHECK(cc.per_site.at(site2(1, 0)) == 3);  // C(3,2)
    CHECK(cc.per_site.at(site2(2, 0)) == 1);
    CHECK(cc.total == 4);
}

TEST_CASE("collision conditional mean matches C(N0,2) p^2") {
    // N0 infected neighbors of the origin attempt simultaneously.
    LatticeParams lat{2, 2};
    const std::int64_t N0 = 6;
    const double p = 0.35;
    const int reps = 20000;
    SiteSet eta0;
    eta0.insert(site2(1, 0));
    eta0.insert(site2(-1, 0));
    eta0.insert(site2(0, 1));
    eta0.insert(site2(0, -1));
    eta0.insert(site2(1, 1));
    eta0.insert(site2(-1, -1));
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < reps; ++i) {
        EdgeOracle oracle{derive_stream(7000, static_cast<std::uint64_t>(i)), p};
        auto run = run_sir(eta0, {}, lat, oracle, 1, {}, /*record_attempts=*/true);
        auto it = run.attempts_by_gen[0].find(ScaledSite{});
        std::int64_t k = it == run.attempts_by_gen[0].end() ? 0 : it->second;
        double gamma = static_cast<double>(k * (k - 1) / 2);
        sum += gamma;
        sum_sq += gamma * gamma;
    }
    double mean = sum / reps;
    double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
    double expect = static_cast<double>(N0 * (N0 - 1) / 2) * p * p;
    CHECK(std::fabs(mean - expect) <= 4.0 * se);
}

TEST_CASE("event_N_kappa basics and brute force") {
    LatticeParams lat{2, 2};
    BoxSpec window = box2(0, 0, 4.0);
    CHECK(event_N_kappa({}, 0.5, lat, window).holds);

    SiteSet single{site2(1, 1)};
    auto res = event_N_kappa(single, 10.0, lat, window);
    CHECK(res.sup == 1);
    CHECK(res.holds);

    Rng rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        auto cloud = testing::random_cloud(lat, 40, 6, rng);
        SiteSet rho;
        for (const auto& [s, c] : cloud.map()) rho.insert(s);
        auto fast = event_N_kappa(rho, 2.0, lat, window);
        auto brute = testing::brute_sup_count(SparseCounts::from_set(rho), lat, window);
        CHECK(fast.sup == brute);
        CHECK(fast.holds == (static_cast<double>(brute) <= 2.0 * 2.0));
    }
}

TEST_CASE("survival probe agrees with run_sir on shared oracles") {
    LatticeParams lat{2, 2};
    SurvivalProxy proxy;
    proxy.g_max = 40;
    proxy.population_exit = 60;
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
        double p = 0.03 + 0.002 * static_cast<double>(seed % 20);
        std::uint64_t oracle_seed = derive_stream(8000, seed);
        bool probe = survival_probe(p, lat, oracle_seed, proxy);

        EdgeOracle oracle{oracle_seed, p};
        StopRule rule;
        rule.population_threshold = 60;
        auto run = run_sir(origin_set(), {}, lat, oracle, 40, rule);
        bool reference = run.verdict != Verdict::Extinct;
        CHECK(probe == reference);
    }
}

TEST_CASE("survival probe monotone in p under the shared environment") {
    LatticeParams lat{2, 1};
    SurvivalProxy proxy;
    proxy.g_max = 60;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::uint64_t oracle_seed = derive_stream(9000, seed);
        bool lo = survival_probe(0.14, lat, oracle_seed, proxy);
        bool hi = survival_probe(0.20, lat, oracle_seed, proxy);
        if (lo) CHECK(hi);  // opening edges cannot kill survival
    }
}

TEST_CASE("survival probe degenerate p") {
    LatticeParams lat{2, 1};
    SurvivalProxy proxy;
    proxy.g_max = 10;
    CHECK_FALSE(survival_probe(0.0, lat, 5, proxy));
    CHECK(survival_probe(1.0, lat, 5, proxy));
}

}  // TEST_SUITE
