// Acceptance suite: runs every top-level criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code = number of failed
// criteria.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "rangepc/blockperc.hpp"
#include "rangepc/brw.hpp"
#include "rangepc/estimator.hpp"
#include "rangepc/randwalk.hpp"
#include "rangepc/sir.hpp"
#include "rangepc/tanaka.hpp"

namespace fs = std::filesystem;
using namespace rangepc;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::function<bool(std::string&)> run;
};

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ---- 1. martingale-problem identity ----------------------------------------

bool crit_mp(std::string& detail) {
    double t0 = now_s();
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        Rng setup(derive_stream(42, i));
        std::int64_t R = 1 + static_cast<std::int64_t>(setup.below(8));
        std::int64_t N = 5 + static_cast<std::int64_t>(setup.below(46));
        double theta = 0.02 * static_cast<double>(R) * (0.5 + setup.next_unit());
        RunParams params{{2, R}, theta, 100.0};
        SparseCounts z0;
        std::int64_t mass0 = 1 + static_cast<std::int64_t>(setup.below(10));
        for (std::int64_t j = 0; j < mass0; ++j)
            z0.add(site2(static_cast<std::int64_t>(setup.below(2 * R + 1)) - R,
                         static_cast<std::int64_t>(setup.below(2 * R + 1)) - R),
                   1);
        Rng rng(derive_stream(43, i));
        auto traj = simulate_brw(z0, params, N, rng);

        std::int64_t span = 4 * R + N * R / 2;
        DenseGrid<double> phig(2, {-span, -span, 0}, {span, span, 0});
        Rng phi_rng(derive_stream(44, i));
        phig.for_each([&](const ScaledSite& s, const double&) {
            phig.at(s) = phi_rng.next_unit() * 2.0 - 0.5;
        });
        worst = std::max(worst, verify_mp(traj, SupportFun{std::move(phig)}, N));
    }
    double dt = now_s() - t0;
    std::ostringstream ss;
    ss << "max relative residual " << worst << " (tol 1e-9), " << dt << " s";
    detail = ss.str();
    return worst <= 1e-9 && dt < 10.0;
}

// ---- 2. Tanaka identities ---------------------------------------------------

bool crit_tanaka(std::string& detail) {
    double t0 = now_s();
    double worst2 = 0.0, worst3 = 0.0;
    // d=2: m chosen so the stored geometric tail is below 1e-10.
    for (std::uint64_t i = 0; i < 20; ++i) {
        std::int64_t R = (i % 2 == 0) ? 4 : 3;
        RunParams params{{2, R}, 1.0, 100.0};
        std::int64_t m = g_truncation_depth(params, 1e-10);
        std::int64_t N = 12 + static_cast<std::int64_t>(i % 9);
        SparseCounts z0;
        z0.add(ScaledSite{}, 3);
        Rng rng(derive_stream(1200, i));
        auto traj = simulate_brw(z0, params, N, rng);
        ScaledSite a = site2(static_cast<std::int64_t>(i % 3) - 1, 1);
        auto rep = verify_tanaka(traj, a, N, m);
        worst2 = std::max(worst2, rep.relative_residual);
    }
    // d=3 at depth 60 (the correction keeps the identity exact at any m).
    for (std::uint64_t i = 0; i < 20; ++i) {
        std::int64_t R = (i % 2 == 0) ? 2 : 4;
        RunParams params{{3, R}, 1.0, 100.0};
        std::int64_t N = 10 + static_cast<std::int64_t>(i % 11);
        SparseCounts z0;
        z0.add(ScaledSite{}, 2);
        Rng rng(derive_stream(1300, i));
        auto traj = simulate_brw(z0, params, N, rng);
        ScaledSite a = site3(1, 0, static_cast<std::int64_t>(i % 2));
        auto rep = verify_tanaka(traj, a, N, 60);
        worst3 = std::max(worst3, rep.relative_residual);
    }
    double dt = now_s() - t0;
    std::ostringstream ss;
    ss << "max relative residual d=2 " << worst2 << ", d=3 " << worst3
       << " (tol 1e-8), " << dt << " s";
    detail = ss.str();
    return worst2 <= 1e-8 && worst3 <= 1e-8 && dt < 60.0;
}

// ---- 3. transition kernel oracle + invariants -------------------------------

bool crit_transition(std::string& detail) {
    double worst = 0.0;
    for (int d : {2, 3}) {
        for (std::int64_t R : {1, 2}) {
            LatticeParams lat{d, R};
            for (std::int64_t n = 1; n <= 3; ++n) {
                auto table = transition_exact(n, lat);
                auto brute = testing::enumerate_paths(n, lat);
                table.values.for_each([&](const ScaledSite& s, const double& v) {
                    auto it = brute.find(s.k);
                    double expect = it == brute.end() ? 0.0 : it->second;
                    worst = std::max(worst, std::fabs(v - expect));
                });
            }
        }
    }
    if (worst > 1e-12) {
        detail = "path-enumeration mismatch " + std::to_string(worst);
        return false;
    }

    // mass, symmetry, nonnegativity, semigroup over n <= 12 (d=2)
    LatticeParams lat{2, 2};
    for (std::int64_t n = 1; n <= 12; ++n) {
        auto t = transition_exact(n, lat);
        if (std::fabs(t.mass() - 1.0) > 1e-12) {
            detail = "mass defect at n=" + std::to_string(n);
            return false;
        }
        bool sym = true, nonneg = true;
        t.values.for_each([&](const ScaledSite& s, const double& v) {
            if (v < 0.0) nonneg = false;
            ScaledSite neg = site2(-s.k[0], -s.k[1]);
            if (t.value(neg) != v) sym = false;
        });
        if (!sym || !nonneg) {
            detail = "symmetry/nonnegativity defect at n=" + std::to_string(n);
            return false;
        }
    }
    auto t5 = transition_exact(5, lat);
    auto t7 = transition_exact(7, lat);
    auto t12 = transition_exact(12, lat);
    double conv_worst = 0.0;
    t12.values.for_each([&](const ScaledSite& x, const double& v) {
        KahanSum conv;
        t5.values.for_each([&](const ScaledSite& y, const double& py) {
            if (py == 0.0) return;
            conv.add(py * t7.value(site2(x.k[0] - y.k[0], x.k[1] - y.k[1])));
        });
        conv_worst = std::max(conv_worst, std::fabs(conv.value() - v));
    });
    std::ostringstream ss;
    ss << "enumeration diff " << worst << ", semigroup diff " << conv_worst;
    detail = ss.str();
    return conv_worst <= 1e-12;
}

// ---- 4. Gaussian approximation scaling --------------------------------------

bool crit_gaussian(std::string& detail) {
    double t0 = now_s();
    bool ok = true;
    std::ostringstream ss;
    for (std::int64_t R : {4, 8}) {
        LatticeParams lat{2, R};
        double lo = 1e300, hi = 0.0;
        for (std::int64_t n : {10, 20, 40, 80}) {
            auto t = transition_exact(n, lat);
            double sup = 0.0;
            t.values.for_each([&](const ScaledSite& s, const double& v) {
                sup = std::max(sup, std::fabs(v - gaussian_approx(n, s, lat)));
            });
            double scaled = std::pow(static_cast<double>(n), 2.0) *
                            std::pow(static_cast<double>(R), 2.0) * sup;
            lo = std::min(lo, scaled);
            hi = std::max(hi, scaled);
        }
        ss << "R=" << R << " ratio " << hi / lo << "; ";
        if (hi / lo >= 3.0) ok = false;
    }
    double dt = now_s() - t0;
    ss << dt << " s";
    detail = ss.str();
    return ok && dt < 120.0;
}

// ---- 5. moment battery -------------------------------------------------------

bool crit_battery(std::string& detail) {
    BatteryConfig cfg;
    cfg.params = RunParams{{2, 4}, 4.0 * (std::exp(0.1) - 1.0), 100.0};
    cfg.n = 10;
    cfg.replicas = 10000;
    cfg.seed = 8800;
    auto checks = moment_battery(cfg);
    std::ostringstream ss;
    bool ok = true;
    for (const auto& c : checks) {
        ss << c.name << (c.pass ? " ok" : " FAIL");
        if (c.name == "first_moment") ss << " (z=" << c.z_score << ")";
        ss << "; ";
        ok = ok && c.pass;
    }
    detail = ss.str();
    return ok;
}

// ---- 6. coupling invariants ---------------------------------------------------

bool crit_couplings(std::string& detail) {
    std::int64_t chain_violations = 0;
    std::int64_t lemma_violations = 0;
    std::int64_t immigration_violations = 0;

    for (std::uint64_t i = 0; i < 1000; ++i) {
        // (a) domination chain eta <= etabar <= Z
        {
            RunParams params{{2, 2}, 1.0, 100.0};
            Rng rng(derive_stream(6100, i));
            SiteSet eta0{ScaledSite{}};
            if (i % 3 == 0) eta0.insert(site2(1, 1));
            auto run = coupled_step_run(eta0, {}, SparseCounts::from_set(eta0), params,
                                        rng, 6, true, true);
            chain_violations += run.domination_violations;
            for (std::size_t n = 0; n < run.eta.size(); ++n)
                for (const auto& s : run.eta[n]) {
                    if (run.eta_bar[n].at(s) < 1) ++chain_violations;
                    if (run.brw.gens[n].at(s) < run.eta_bar[n].at(s))
                        ++chain_violations;
                }
        }
        // (b) monotonicity in the initial set on a shared oracle
        {
            LatticeParams lat{2, 2};
            EdgeOracle oracle{derive_stream(6200, i), 0.055};
            SiteSet big{ScaledSite{}, site2(2, 2), site2(-3, 1)};
            SiteSet small{ScaledSite{}, site2(2, 2)};
            SiteSet rho0{site2(0, 2)};
            auto cb = run_sir(big, rho0, lat, oracle, 8).cumulative();
            auto cs = run_sir(small, rho0, lat, oracle, 8).cumulative();
            for (const auto& s : cs)
                if (!cb.contains(s)) ++lemma_violations;
        }
        // (c) immigration process stays inside the full epidemic
        {
            LatticeParams lat{2, 2};
            EdgeOracle oracle{derive_stream(6300, i), 0.06};
            SiteSet mu0{ScaledSite{}};
            SiteSet nu0{site2(2, -1)};
            SiteSet eta0 = mu0;
            for (const auto& s : nu0) eta0.insert(s);
            ImmigrationSchedule sched;
            sched.mu0 = mu0;
            sched.nu0 = nu0;
            Rng pick(derive_stream(6400, i));
            for (std::int64_t t : {2, 5}) {
                ImmigrationEvent ev;
                ev.time = t;
                ev.choose = [&pick](const SiteSet& eta_star, const SiteSet& nu_prev) {
                    SiteSet mu, nu;
                    for (const auto& s : eta_star)
                        (pick.bernoulli(0.7) ? mu : nu).insert(s);
                    for (const auto& s : nu_prev)
                        (pick.bernoulli(0.5) ? mu : nu).insert(s);
                    return std::make_pair(mu, nu);
                };
                sched.events.push_back(ev);
            }
            auto imm = run_with_immigration(sched, {}, lat, oracle, 9);
            auto plain = run_sir(eta0, {}, lat, oracle, 9);
            SiteSet cum;
            for (const auto& g : plain.infected_by_gen) cum.insert(g.begin(), g.end());
            for (const auto& g : imm.eta_star_by_gen)
                for (const auto& s : g)
                    if (!cum.contains(s)) ++immigration_violations;
        }
    }
    std::ostringstream ss;
    ss << "chain " << chain_violations << ", shrink " << lemma_violations
       << ", immigration " << immigration_violations << " violations over 1000 scenarios";
    detail = ss.str();
    return chain_violations == 0 && lemma_violations == 0 &&
           immigration_violations == 0;
}

// ---- 7. BFS equivalence -------------------------------------------------------

bool crit_bfs(std::string& detail) {
    std::int64_t mismatches = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        LatticeParams lat{2, (i % 2 == 0) ? 1 : 2};
        double p = 0.02 + 0.08 * static_cast<double>(i % 10) / 10.0;
        EdgeOracle oracle{derive_stream(7100, i), p};
        SiteSet eta0{ScaledSite{}};
        if (i % 4 == 0) eta0.insert(site2(2, -1));
        SiteSet rho0;
        if (i % 3 == 0) rho0.insert(site2(1, 1));
        std::int64_t n = 6 + static_cast<std::int64_t>(i % 7);
        auto run = run_sir(eta0, rho0, lat, oracle, n);
        if (run.cumulative() != bfs_ball(eta0, rho0, lat, oracle, n)) ++mismatches;
    }
    detail = std::to_string(mismatches) + " mismatches over 1000 runs";
    return mismatches == 0;
}

// ---- 8. collision scaling -----------------------------------------------------

bool crit_collisions(std::string& detail) {
    double t0 = now_s();
    std::vector<double> normalized;
    for (std::int64_t R : {4, 8, 16}) {
        BlockConfig bc;
        bc.run = RunParams{{2, R}, 1.0, 2.0};
        bc.K = 100.0;
        std::int64_t T = bc.run.T_theta_R();
        (void)bc.M;
        double total = 0.0;
        const int reps = 500;
        for (int i = 0; i < reps; ++i) {
            Rng rng(derive_stream(8100, static_cast<std::uint64_t>(R),
                                  static_cast<std::uint64_t>(i)));
            SiteSet eta0 = build_initial_condition(bc.run, bc.K, {0.0, 0.0, 0.0}, rng);
            EdgeOracle oracle{derive_stream(8200, static_cast<std::uint64_t>(R),
                                            static_cast<std::uint64_t>(i)),
                              bc.run.p()};
            auto run = run_sir(eta0, {}, bc.run.lat, oracle, T, {},
                               /*record_attempts=*/true);
            for (const auto& attempts : run.attempts_by_gen)
                total += static_cast<double>(count_collisions(attempts).total);
        }
        normalized.push_back(total / reps / static_cast<double>(R));
    }
    double dt = now_s() - t0;
    std::ostringstream ss;
    ss << "E[sum Gamma]/R = " << normalized[0] << ", " << normalized[1] << ", "
       << normalized[2] << " for R=4,8,16; " << dt << " s";
    detail = ss.str();
    return normalized[0] > normalized[1] && normalized[1] > normalized[2] &&
           dt < 300.0;
}

// ---- 9. critical scaling ------------------------------------------------------

bool crit_pc_scaling(std::string& detail) {
    double t0 = now_s();
    PcConfig cfg;
    cfg.g_max = 200;
    cfg.trials_per_level = 400;
    cfg.levels = 10;
    cfg.seed = 20260808;
    cfg.threads = 1;

    std::vector<std::pair<std::int64_t, double>> points;
    std::vector<double> excess;
    bool all_above = true, decreasing = true;
    std::ostringstream ss;
    for (std::int64_t R : {2, 4, 8, 16}) {
        LatticeParams lat{2, R};
        auto est = estimate_pc(lat, cfg);
        double pv = est.p_hat * static_cast<double>(lat.volume());
        ss << "R=" << R << " p_hat*V=" << pv << "; ";
        if (pv <= 1.0) all_above = false;
        if (!excess.empty() && pv - 1.0 >= excess.back()) decreasing = false;
        excess.push_back(pv - 1.0);
        points.emplace_back(R, est.p_hat);
    }
    double gamma = 0.0;
    if (all_above) {
        auto fit = scaling_fit(points, 2);
        gamma = fit.gamma_hat;
    }
    double dt = now_s() - t0;
    ss << "gamma_hat=" << gamma << "; " << dt << " s";
    detail = ss.str();
    return all_above && decreasing && gamma >= 0.6 && gamma <= 1.4 && dt < 1800.0;
}

// ---- 10. oriented percolation ---------------------------------------------------

bool crit_oriented(std::string& detail) {
    std::int64_t monotone_breaks = 0;
    std::int64_t low = 0, high = 0;
    const std::int64_t trials = 200;
    for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(trials); ++i) {
        std::uint64_t seed = derive_stream(9100, i);
        if (oriented_percolation(0.5, 0, 200, seed).percolates) ++low;
        if (oriented_percolation(0.95, 0, 200, seed).percolates) ++high;
        // exact monotone coupling along a density grid
        bool prev = false;
        for (double q : {0.4, 0.55, 0.7, 0.85, 1.0}) {
            bool cur = oriented_percolation(q, 0, 120, seed).percolates;
            if (prev && !cur) ++monotone_breaks;
            prev = cur;
        }
    }
    std::ostringstream ss;
    ss << "freq(0.5)=" << static_cast<double>(low) / trials
       << ", freq(0.95)=" << static_cast<double>(high) / trials << ", breaks "
       << monotone_breaks;
    detail = ss.str();
    return low == 0 && static_cast<double>(high) / trials > 0.3 &&
           monotone_breaks == 0;
}

// ---- 11. brute-force equivalences ---------------------------------------------

bool crit_brute(std::string& detail) {
    Rng rng(11011);
    // neighborhood_sup_count
    for (int d : {2, 3}) {
        for (std::int64_t R : {1, 2, 4}) {
            LatticeParams lat{d, R};
            for (int rep = 0; rep < 6; ++rep) {
                auto cloud = testing::random_cloud(lat, 80, 3 * R, rng);
                BoxSpec window;
                window.radius = 4.0;
                if (neighborhood_sup_count(cloud, lat, window).sup !=
                    testing::brute_sup_count(cloud, lat, window)) {
                    detail = "neighborhood_sup_count mismatch";
                    return false;
                }
            }
        }
    }
    // sup_local_time
    {
        RunParams params{{2, 2}, 1.0, 100.0};
        SparseCounts z0;
        z0.add(ScaledSite{}, 4);
        Rng trng(99);
        auto traj = simulate_brw(z0, params, 10, trng);
        BoxSpec window = box2(0, 0, 8.0);
        auto fast = sup_local_time(traj, window, 10);
        std::int64_t best = 0;
        for (std::int64_t a0 = -8; a0 <= 8; ++a0)
            for (std::int64_t a1 = -8; a1 <= 8; ++a1)
                best = std::max(best, local_time(traj, site2(a0 * 2, a1 * 2), 10));
        if (fast.sup != best) {
            detail = "sup_local_time mismatch";
            return false;
        }
    }
    // thinning postconditions + idempotence
    {
        RunParams params{{3, 2}, 1.0, 100.0};
        Population cloud;
        for (int i = 0; i < 300; ++i)
            cloud.counts.add(site3(static_cast<std::int64_t>(rng.below(17)) - 8,
                                   static_cast<std::int64_t>(rng.below(17)) - 8,
                                   static_cast<std::int64_t>(rng.below(17)) - 8),
                             1);
        auto t1 = thin(cloud, 3.0, params);
        auto t2 = thin(t1, 3.0, params);
        if (t1.counts.total_mass() != t2.counts.total_mass()) {
            detail = "thinning not idempotent";
            return false;
        }
        std::map<std::array<std::int64_t, 3>, std::int64_t> boxes;
        for (const auto& [s, c] : t1.counts.map())
            boxes[unit_box_of(s, params.lat)] += c;
        for (const auto& [b, c] : boxes) {
            if (static_cast<double>(c) > 3.0) {
                detail = "thinning box bound violated";
                return false;
            }
            if (cloud.counts.total_mass() < t1.counts.total_mass()) {
                detail = "thinning increased mass";
                return false;
            }
        }
    }
    // series bound: two-sided control on a log grid
    for (double alpha : {0.5, 1.0}) {
        for (double r = 1.0 / 64.0; r < 1e6; r *= 8.0) {
            auto s = series_bound_check(alpha, r);
            if (!(s.normalized > 0.01 && s.normalized < 50.0)) {
                detail = "series bound out of band";
                return false;
            }
        }
    }
    // generator identities (phi, g, psi) at random points
    {
        RunParams p3{{3, 2}, 1.5, 100.0};
        auto phi = kernel_phi(site3(1, 0, 0), 12, {-10, -10, -10}, {10, 10, 10}, p3);
        RunParams p2{{2, 3}, 1.0, 100.0};
        auto gk = kernel_g(site2(0, 1), 25, {-14, -14, 0}, {14, 14, 0}, p2);
        DenseGrid<double> f(3, {-3, -3, -3}, {3, 3, 3});
        f.for_each([&](const ScaledSite& s, const double&) {
            f.at(s) = f_eta_kernel(ScaledSite{}, s, p3.lat);
        });
        auto psi = green_apply(f, 10, {-6, -6, -6}, {6, 6, 6}, p3);
        double worst = 0.0;
        for (int rep = 0; rep < 25; ++rep) {
            ScaledSite x3 = site3(static_cast<std::int64_t>(rng.below(9)) - 4,
                                  static_cast<std::int64_t>(rng.below(9)) - 4,
                                  static_cast<std::int64_t>(rng.below(9)) - 4);
            double lhs = generator_apply(
                [&](const ScaledSite& y) { return phi.value(y); }, x3, p3.lat);
            double expect = phi.correction_at(x3) -
                            2.0 * (is_neighbor(x3, site3(1, 0, 0), p3.lat) ? 1.0 : 0.0);
            worst = std::max(worst, std::fabs(lhs - expect));

            ScaledSite x2 = site2(static_cast<std::int64_t>(rng.below(17)) - 8,
                                  static_cast<std::int64_t>(rng.below(17)) - 8);
            double lhs2 = generator_apply(
                [&](const ScaledSite& y) { return gk.value(y); }, x2, p2.lat);
            double e_rate = std::expm1(p2.theta / 3.0);
            double expect2 = e_rate * gk.value(x2) -
                             (is_neighbor(x2, site2(0, 1), p2.lat) ? 1.0 : 0.0) +
                             gk.correction_at(x2);
            worst = std::max(worst, std::fabs(lhs2 - expect2));

            double lhs3 = generator_apply(
                [&](const ScaledSite& y) { return psi.value(y); }, x3, p3.lat);
            double expect3 = psi.correction_at(x3) - f.value_or_zero(x3);
            worst = std::max(worst, std::fabs(lhs3 - expect3));
        }
        std::ostringstream ss;
        ss << "generator identity max abs residual " << worst;
        detail = ss.str();
        return worst <= 1e-10;
    }
}

// ---- 12. CLI determinism --------------------------------------------------------

int run_tool(const std::string& args) {
    std::string cmd = std::string(RANGEPC_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool dirs_match(const fs::path& a, const fs::path& b, std::string& detail) {
    for (const auto& entry : fs::directory_iterator(a)) {
        fs::path rel = entry.path().filename();
        if (!fs::exists(b / rel)) {
            detail = "missing artifact " + rel.string();
            return false;
        }
        std::string sa = slurp(entry.path());
        std::string sb = slurp(b / rel);
        if (rel == "record.json") {
            auto ja = nlohmann::json::parse(sa);
            auto jb = nlohmann::json::parse(sb);
            ja.erase("wall_time_s");
            jb.erase("wall_time_s");
            if (ja != jb) {
                detail = "record.json differs (beyond wall time)";
                return false;
            }
        } else if (sa != sb) {
            detail = "artifact differs: " + rel.string();
            return false;
        }
    }
    return true;
}

bool crit_determinism(std::string& detail) {
    struct Cmd {
        std::string name;
        std::string args;
    };
    std::vector<Cmd> cmds = {
        {"sir", "sir --d 2 --R 2 --horizon 12"},
        {"brw", "brw --d 2 --R 2 --theta 0.5 --generations 8"},
        {"couple", "couple --d 2 --R 2 --horizon 5 --trials 20"},
        {"tanaka", "tanaka --d 2 --R 2 --theta 0.5 --N 6 --trials 2"},
        {"kernels", "kernels --d 2 --R 2 --m 12 --window 6"},
        {"estimate-pc", "estimate-pc --R_list [1,2] --g_max 20 --trials 120 --levels 3"},
        {"scaling", "scaling --points [[2,0.063],[4,0.0155],[8,0.00385]]"},
        {"block", "block --R 8 --theta 4 --budget 3 --trials 2 --chi 12"},
        {"oriented", "oriented --N 60 --trials 40"},
        {"battery", "battery --replicas 600"},
    };
    fs::path base = fs::temp_directory_path() / "rangepc_acceptance";
    fs::remove_all(base);
    for (const auto& cmd : cmds) {
        fs::path d1 = base / (cmd.name + "_1");
        fs::path d2 = base / (cmd.name + "_2");
        fs::path d3 = base / (cmd.name + "_3");
        std::string common = " --seed 4242 " + cmd.args;
        int r1 = run_tool("--out " + d1.string() + " --threads 1" + common);
        int r2 = run_tool("--out " + d2.string() + " --threads 1" + common);
        int r3 = run_tool("--out " + d3.string() + " --threads 4" + common);
        if (r1 != 0 || r2 != 0 || r3 != 0) {
            detail = cmd.name + " exited nonzero (" + std::to_string(r1) + "," +
                     std::to_string(r2) + "," + std::to_string(r3) + ")";
            return false;
        }
        if (!dirs_match(d1, d2, detail) || !dirs_match(d1, d3, detail)) {
            detail = cmd.name + ": " + detail;
            return false;
        }
    }
    detail = "10 subcommands byte-identical across reruns and thread counts";
    return true;
}

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "martingale-problem identity", crit_mp},
        {2, "Tanaka identities with truncation corrections", crit_tanaka},
        {3, "transition kernel exactness and invariants", crit_transition},
        {4, "Gaussian approximation scaled error", crit_gaussian},
        {5, "moment battery (first/second/exponential/Freedman)", crit_battery},
        {6, "coupling invariants", crit_couplings},
        {7, "BFS equivalence", crit_bfs},
        {8, "collision scaling", crit_collisions},
        {9, "critical probability scaling", crit_pc_scaling},
        {10, "oriented percolation", crit_oriented},
        {11, "brute-force equivalences", crit_brute},
        {12, "CLI determinism", crit_determinism},
    };

    int failures = 0;
    for (auto& c : criteria) {
        std::string detail;
        bool pass = false;
        try {
            pass = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (!pass) ++failures;
        std::printf("CRITERION %2d [%s] %s: %s\n", c.id, pass ? "PASS" : "FAIL",
                    c.name.c_str(), detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures;
}
