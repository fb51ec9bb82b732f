#include "rangepc/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "rangepc/parallel.hpp"

namespace rangepc {

std::pair<double, double> wilson_interval(std::int64_t successes, std::int64_t trials) {
    require(trials >= 0 && successes >= 0 && successes <= trials,
            "wilson_interval: bad counts");
    if (trials == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;  // 95%
    double n = static_cast<double>(trials);
    double phat = static_cast<double>(successes) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (phat + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

SurvivalCurvePoint survival_frequency(double p, const LatticeParams& lat,
                                      const PcConfig& cfg, std::uint64_t level_tag) {
    lat.validate();
    SurvivalProxy proxy;
    proxy.g_max = cfg.g_max;
    proxy.population_exit = cfg.population_exit;
    auto outcomes = run_replicas<char>(
        cfg.trials_per_level, cfg.threads, [&](std::int64_t i) -> char {
            std::uint64_t oracle_seed =
                derive_stream(cfg.seed, 0x70c5ull, static_cast<std::uint64_t>(lat.R),
                              level_tag, static_cast<std::uint64_t>(i));
            return survival_probe(p, lat, oracle_seed, proxy) ? 1 : 0;
        });
    SurvivalCurvePoint pt;
    pt.p = p;
    pt.trials = cfg.trials_per_level;
    for (char c : outcomes) pt.survivals += c;
    auto [lo, hi] = wilson_interval(pt.survivals, pt.trials);
    pt.wilson_lo = lo;
    pt.wilson_hi = hi;
    return pt;
}

PcEstimate estimate_pc(const LatticeParams& lat, const PcConfig& cfg) {
    lat.validate();
    require(cfg.trials_per_level >= 100, "estimate_pc: need at least 100 trials per level");
    require(cfg.levels >= 1, "estimate_pc: need at least one level");
    require(cfg.target_frequency > 0.0 && cfg.target_frequency < 1.0,
            "estimate_pc: target frequency must lie in (0,1)");

    double V = static_cast<double>(lat.volume());
    double lo = 0.25 / V;
    double hi = std::min(1.0, 6.0 / V);

    PcEstimate est;
    est.R = lat.R;
    est.d = lat.d;
    est.g_max = cfg.g_max;

    est.curve.push_back(survival_frequency(lo, lat, cfg, 0));
    est.curve.push_back(survival_frequency(hi, lat, cfg, 1));

    for (int level = 0; level < cfg.levels; ++level) {
        double mid = 0.5 * (lo + hi);
        SurvivalCurvePoint pt =
            survival_frequency(mid, lat, cfg, static_cast<std::uint64_t>(level) + 2);
        est.curve.push_back(pt);
        if (pt.frequency() >= cfg.target_frequency)
            hi = mid;
        else
            lo = mid;
    }

    est.bracket_lo = lo;
    est.bracket_hi = hi;
    est.p_hat = 0.5 * (lo + hi);
    double r_dm1 = lat.d == 2 ? static_cast<double>(lat.R)
                              : static_cast<double>(lat.R) * static_cast<double>(lat.R);
    est.theta_hat = (est.p_hat * V - 1.0) * r_dm1;

    // Flag apparent non-monotonicity beyond sampling noise (not fatal).
    std::vector<SurvivalCurvePoint> sorted = est.curve;
    std::sort(sorted.begin(), sorted.end(),
              [](const SurvivalCurvePoint& a, const SurvivalCurvePoint& b) {
                  return a.p < b.p;
              });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        double f0 = sorted[i].frequency(), f1 = sorted[i + 1].frequency();
        double v0 = f0 * (1.0 - f0) / static_cast<double>(sorted[i].trials);
        double v1 = f1 * (1.0 - f1) / static_cast<double>(sorted[i + 1].trials);
        if (f1 < f0 - 4.0 * std::sqrt(v0 + v1 + 1e-12)) est.monotone_flag = false;
    }
    std::sort(est.curve.begin(), est.curve.end(),
              [](const SurvivalCurvePoint& a, const SurvivalCurvePoint& b) {
                  return a.p < b.p;
              });
    return est;
}

ScalingFit scaling_fit(const std::vector<std::pair<std::int64_t, double>>& points,
                       int d) {
    require(points.size() >= 3, "scaling_fit: need at least 3 points");
    std::vector<double> xs, ys;
    for (const auto& [R, p_hat] : points) {
        LatticeParams lat{d, R};
        lat.validate();
        double excess = p_hat * static_cast<double>(lat.volume()) - 1.0;
        require(excess > 0.0, "scaling_fit: p_hat V(R) must exceed 1");
        xs.push_back(std::log(static_cast<double>(R)));
        ys.push_back(std::log(excess));
    }
    double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += sq(xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += sq(ys[i] - my);
    }
    require(sxx > 0.0, "scaling_fit: degenerate abscissas");
    double slope = sxy / sxx;
    double intercept = my - slope * mx;

    ScalingFit fit;
    fit.gamma_hat = -slope;
    fit.theta_hat = std::exp(intercept);
    double ss_res = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double r = ys[i] - (intercept + slope * xs[i]);
        fit.residuals.push_back(r);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

namespace {

struct ReplicaStats {
    double z_phi = 0.0;        // Z_n(phi)
    double z_phi_sq = 0.0;     // Z_n(phi)^2
    double exp_z = 0.0;        // exp(lambda Z_n(phi))
    double exp_occ = 0.0;      // exp(lambda' sum_k Z_k(phi))
    double exp_mart = 0.0;     // exp(lambda_f |M_N|)
    double exp_qv = 0.0;       // exp(16 lambda_f^2 <M>_N)
};

}  // namespace

std::vector<BatteryCheck> moment_battery(const BatteryConfig& cfg) {
    cfg.params.validate();
    require(cfg.replicas >= 100, "moment_battery: need at least 100 replicas");
    const auto& params = cfg.params;
    const auto& lat = params.lat;
    std::int64_t n = cfg.n;
    require(n >= 1, "moment_battery: n must be >= 1");

    // phi = indicator of Q_b(0) as a dense grid.
    std::int64_t kr = static_cast<std::int64_t>(std::floor(
        cfg.box_radius * static_cast<double>(lat.R) + 1e-9));
    std::array<std::int64_t, 3> flo{}, fhi{};
    for (int i = 0; i < lat.d; ++i) {
        flo[i] = -kr;
        fhi[i] = kr;
    }
    SupportFun phi{DenseGrid<double>(lat.d, flo, fhi)};
    phi.grid.for_each([&](const ScaledSite& s, const double&) { phi.grid.at(s) = 1.0; });

    // Exact references.
    DenseGrid<double> mean_grid = expected_measure_grid(phi.grid, n, params);
    double mean_exact = mean_grid.value_or_zero(ScaledSite{});
    double G = g_weight(phi.grid, n, params);
    double e_ntheta = std::exp(static_cast<double>(n) * params.theta / params.r_pow_dm1());

    // Exponential-moment rates inside the validity regimes.
    double lambda_z = 0.5 / (e_ntheta * G);
    double lambda_occ = 0.25 / (static_cast<double>(n) * e_ntheta * G);
    double lambda_f = 0.05;  // ||phi||_inf = 1, so lambda ||phi||_inf <= 1 holds

    ensure(lambda_z * e_ntheta * G < 1.0, "moment_battery: lambda_z regime violated");
    ensure(2.0 * lambda_occ * static_cast<double>(n) * e_ntheta * G < 1.0,
           "moment_battery: lambda_occ regime violated");

    SparseCounts z0;
    z0.add(ScaledSite{}, 1);

    auto stats = run_replicas<ReplicaStats>(
        cfg.replicas, cfg.threads, [&](std::int64_t i) {
            Rng rng(derive_stream(cfg.seed, 0xba77ull, static_cast<std::uint64_t>(i)));
            Trajectory traj = simulate_brw(z0, params, n, rng);
            ReplicaStats st;
            double z_phi = measure_apply(traj.at(n), phi);
            st.z_phi = z_phi;
            st.z_phi_sq = z_phi * z_phi;
            st.exp_z = std::exp(lambda_z * z_phi);
            KahanSum occ;
            for (std::int64_t k = 0; k <= n; ++k)
                occ.add(measure_apply(traj.at(k), phi));
            st.exp_occ = std::exp(lambda_occ * occ.value());
            double m_N = martingale_term(traj, phi, n);
            double qv = quadratic_variation(traj, phi, n);
            st.exp_mart = std::exp(lambda_f * std::fabs(m_N));
            st.exp_qv = std::exp(16.0 * lambda_f * lambda_f * qv);
            return st;
        });

    double reps = static_cast<double>(cfg.replicas);
    double m1 = 0, m2 = 0, ez = 0, eocc = 0, emart = 0, eqv = 0, m1_sq = 0;
    for (const auto& st : stats) {
        m1 += st.z_phi;
        m1_sq += st.z_phi * st.z_phi;
        m2 += st.z_phi_sq;
        ez += st.exp_z;
        eocc += st.exp_occ;
        emart += st.exp_mart;
        eqv += st.exp_qv;
    }
    m1 /= reps;
    m2 /= reps;
    ez /= reps;
    eocc /= reps;
    emart /= reps;
    eqv /= reps;
    double var1 = std::max(0.0, m1_sq / reps - m1 * m1);
    double se1 = std::sqrt(var1 / reps);

    std::vector<BatteryCheck> out;
    {
        BatteryCheck c;
        c.name = "first_moment";
        c.statistic = m1;
        c.reference = mean_exact;
        c.z_score = se1 > 0 ? (m1 - mean_exact) / se1 : 0.0;
        c.pass = std::fabs(c.z_score) <= cfg.z_tolerance;
        out.push_back(c);
    }
    {
        BatteryCheck c;
        c.name = "second_moment_bound";
        c.statistic = m2;
        c.reference = e_ntheta * G * mean_exact;  // (p-1)! e^{n theta (p-1)/R^{d-1}} G^{p-1} E
        c.one_sided = true;
        c.pass = c.statistic <= c.reference;
        out.push_back(c);
    }
    {
        BatteryCheck c;
        c.name = "exponential_moment";
        c.statistic = ez;
        c.reference =
            std::exp(lambda_z * mean_exact / (1.0 - lambda_z * e_ntheta * G));
        c.one_sided = true;
        c.pass = c.statistic <= c.reference;
        out.push_back(c);
    }
    {
        BatteryCheck c;
        c.name = "occupation_exponential_moment";
        c.statistic = eocc;
        double denom = 1.0 - 2.0 * lambda_occ * static_cast<double>(n) * e_ntheta * G;
        c.reference = std::exp(lambda_occ * 1.0 * e_ntheta * G / denom);
        c.one_sided = true;
        c.pass = c.statistic <= c.reference;
        out.push_back(c);
    }
    {
        BatteryCheck c;
        c.name = "freedman_martingale_bound";
        c.statistic = emart;
        c.reference = 2.0 * std::sqrt(eqv);
        c.one_sided = true;
        c.pass = c.statistic <= c.reference;
        out.push_back(c);
    }
    return out;
}

}  // namespace rangepc
