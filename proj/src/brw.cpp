#include "rangepc/brw.hpp"

#include <algorithm>
#include <map>

namespace rangepc {

Population brw_step(const Population& pop, const RunParams& params, Rng& rng,
                    std::vector<BirthEvent>* log) {
    params.validate();
    const auto& lat = params.lat;
    std::int64_t V = lat.volume();
    double p = params.p();

    // Deterministic site order so a fixed rng stream gives a fixed step.
    std::vector<const std::pair<const ScaledSite, std::int64_t>*> order;
    order.reserve(pop.counts.support_size());
    for (const auto& e : pop.counts.map()) order.push_back(&e);
    std::sort(order.begin(), order.end(),
              [](auto* a, auto* b) { return site_less(a->first, b->first); });

    Population next;
    next.generation = pop.generation + 1;
    for (const auto* entry : order) {
        const ScaledSite& site = entry->first;
        std::int64_t count = entry->second;
        for (std::int64_t particle = 0; particle < count; ++particle) {
            std::int64_t births = rng.binomial(V, p);
            if (births == 0) continue;
            auto targets = sample_distinct_neighbors(site, births, lat, rng);
            for (const auto& child : targets) {
                next.counts.add(child, 1);
                if (log) log->push_back({site, child});
            }
        }
    }
    return next;
}

Trajectory simulate_brw(const SparseCounts& z0, const RunParams& params,
                        std::int64_t generations, Rng& rng, bool record_births) {
    params.validate();
    require(generations >= 0, "simulate_brw: generations must be >= 0");
    Trajectory traj;
    traj.params = params;
    traj.gens.reserve(static_cast<std::size_t>(generations) + 1);
    traj.gens.push_back(z0);
    if (record_births) traj.births.emplace();

    Population cur{z0, 0};
    for (std::int64_t n = 0; n < generations; ++n) {
        std::vector<BirthEvent> log;
        Population nxt = brw_step(cur, params, rng, record_births ? &log : nullptr);
        if (record_births) traj.births->push_back(std::move(log));
        traj.gens.push_back(nxt.counts);
        cur = std::move(nxt);
    }
    return traj;
}

GwStats gw_stats(const Trajectory& traj) {
    GwStats out;
    double growth = traj.params.growth();
    double mass0 = static_cast<double>(traj.gens.front().total_mass());
    double mean = mass0;
    for (const auto& gen : traj.gens) {
        out.mass.push_back(gen.total_mass());
        out.theoretical_mean.push_back(mean);
        mean *= growth;
    }
    return out;
}

double gw_variance(const RunParams& params, std::int64_t n, std::int64_t mass0) {
    params.validate();
    require(n >= 0, "gw_variance: n must be >= 0");
    double V = static_cast<double>(params.lat.volume());
    double p = params.p();
    double mu = V * p;
    double var1 = V * p * (1.0 - p);  // offspring variance
    if (n == 0) return 0.0;
    double var_single;
    if (std::fabs(mu - 1.0) < 1e-12) {
        var_single = var1 * static_cast<double>(n);
    } else {
        var_single = var1 * std::pow(mu, static_cast<double>(n - 1)) *
                     (std::pow(mu, static_cast<double>(n)) - 1.0) / (mu - 1.0);
    }
    return var_single * static_cast<double>(mass0);
}

std::vector<RescaledAtom> rescaled_measure(const Population& pop,
                                           const RunParams& params) {
    params.validate();
    const auto& lat = params.lat;
    double scale = std::sqrt(params.r_pow_dm1() / 3.0);  // sqrt(sigma^2 R^{d-1})
    double weight_per_particle = 1.0 / params.r_pow_dm1();
    std::vector<RescaledAtom> atoms;
    atoms.reserve(pop.counts.support_size());
    for (const auto& [site, c] : pop.counts.map()) {
        RescaledAtom a;
        for (int i = 0; i < lat.d; ++i)
            a.position[i] = static_cast<double>(site.k[i]) /
                            static_cast<double>(lat.R) / scale;
        a.weight = static_cast<double>(c) * weight_per_particle;
        atoms.push_back(a);
    }
    std::sort(atoms.begin(), atoms.end(), [](const RescaledAtom& a, const RescaledAtom& b) {
        return a.position < b.position;
    });
    return atoms;
}

std::int64_t rescaled_time_index(double t, const RunParams& params) {
    require(t >= 0.0, "rescaled_time_index: t must be >= 0");
    return static_cast<std::int64_t>(std::floor(t * params.r_pow_dm1()));
}

std::array<std::int64_t, 3> unit_box_of(const ScaledSite& s, const LatticeParams& lat) {
    std::array<std::int64_t, 3> y{0, 0, 0};
    for (int i = 0; i < lat.d; ++i)
        y[i] = ceil_div(2 * s.k[i] - lat.R, 2 * lat.R);
    return y;
}

Population thin(const Population& pop, double K, const RunParams& params) {
    params.validate();
    require(K > 0.0, "thin: K must be positive");
    double threshold = K * params.beta_d();

    // Group mass by unit box, then zero every box exceeding the threshold.
    std::map<std::array<std::int64_t, 3>, std::int64_t> box_mass;
    for (const auto& [site, c] : pop.counts.map())
        box_mass[unit_box_of(site, params.lat)] += c;

    Population out;
    out.generation = pop.generation;
    for (const auto& [site, c] : pop.counts.map()) {
        if (static_cast<double>(box_mass[unit_box_of(site, params.lat)]) <= threshold)
            out.counts.add(site, c);
    }
    return out;
}

}  // namespace rangepc
