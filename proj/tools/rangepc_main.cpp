// rangepc: Monte Carlo laboratory for range-R bond percolation, SIR epidemics
// on Z^d/R, and the dominating branching random walk.
//
// Subcommands: sir, brw, couple, tanaka, kernels, estimate-pc, scaling,
// block, oriented, battery. Configuration comes from --config JSON plus
// per-key flags (flags override the file). Exit codes: 0 pass, 1 failed
// assertion-class check, 2 configuration error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rangepc/blockperc.hpp"
#include "rangepc/brw.hpp"
#include "rangepc/estimator.hpp"
#include "rangepc/io.hpp"
#include "rangepc/lattice.hpp"
#include "rangepc/parallel.hpp"
#include "rangepc/randwalk.hpp"
#include "rangepc/sir.hpp"
#include "rangepc/tanaka.hpp"

namespace fs = std::filesystem;
using namespace rangepc;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Key-value configuration: JSON file merged with explicit flag overrides,
// unknown keys rejected against the subcommand schema.
class Config {
  public:
    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in.good()) throw ConfigError("cannot open config file: " + path);
        try {
            in >> file_;
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        if (!file_.is_object()) throw ConfigError("config root must be an object");
    }

    void set_override(const std::string& key, const Json& v) { overrides_[key] = v; }

    void check_schema(const std::vector<std::string>& allowed) const {
        for (auto it = file_.begin(); it != file_.end(); ++it) {
            if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
                throw ConfigError("unknown config key: " + it.key());
        }
    }

    bool has(const std::string& key) const {
        return overrides_.contains(key) || file_.contains(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) const {
        try {
            if (overrides_.contains(key)) return overrides_.at(key).get<T>();
            if (file_.contains(key)) return file_.at(key).get<T>();
        } catch (const std::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
        return fallback;
    }

    template <typename T>
    T get_required(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing required config key: " + key);
        return get<T>(key, T{});
    }

    Json echo() const {
        Json j = file_;
        for (auto it = overrides_.begin(); it != overrides_.end(); ++it)
            j[it.key()] = it.value();
        return j;
    }

  private:
    Json file_ = Json::object();
    Json overrides_ = Json::object();
};

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;
    std::string out_dir = "out";
    std::string format = "csv";
};

std::uint64_t resolve_seed(const GlobalOpts& g, const Config& cfg) {
    if (g.seed_given) return g.seed;
    if (cfg.has("seed")) return cfg.get<std::uint64_t>("seed", 1);
    if (const char* env = std::getenv("RANGEPC_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ConfigError("RANGEPC_SEED is not a valid integer");
        }
    }
    return 1;
}

fs::path ensure_out_dir(const GlobalOpts& g) {
    fs::path dir(g.out_dir);
    fs::create_directories(dir);
    return dir;
}

void add_check(ExperimentRecord& rec, const std::string& name, double value,
               double reference, bool pass) {
    Json c;
    c["name"] = name;
    c["value"] = value;
    c["reference"] = reference;
    c["pass"] = pass;
    rec.checks.push_back(c);
    rec.passed = rec.passed && pass;
}

// Minimal RFC-4180 reader good enough for our own output (quotes, commas).
std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// --format json: mirror every CSV table as a JSON array of row objects.
void mirror_tables_as_json(const fs::path& dir) {
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".csv") continue;
        std::ifstream in(entry.path());
        std::string line;
        std::vector<std::string> header;
        Json rows = Json::array();
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto fields = split_csv_row(line);
            if (header.empty()) {
                header = fields;
                continue;
            }
            Json row;
            for (std::size_t i = 0; i < header.size() && i < fields.size(); ++i)
                row[header[i]] = fields[i];
            rows.push_back(row);
        }
        fs::path out_path = entry.path();
        out_path.replace_extension(".json");
        write_text(out_path, rows.dump(2) + "\n");
    }
}

int finish(ExperimentRecord& rec, const fs::path& dir,
           std::chrono::steady_clock::time_point t0) {
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(dir / "record.json", rec.to_json().dump(2) + "\n");
    std::cout << (rec.passed ? "PASS" : "FAIL") << " (" << fmt_double(rec.wall_time_s)
              << " s), outputs in " << dir.string() << "\n";
    return rec.passed ? 0 : 1;
}

std::vector<std::string> site_header(int d, const std::string& prefix) {
    std::vector<std::string> h;
    for (int i = 1; i <= d; ++i) h.push_back(prefix + std::to_string(i));
    return h;
}

// --- subcommand handlers -----------------------------------------------------

int cmd_sir(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "R", "p", "theta", "horizon", "init", "T", "K"});
    auto t0 = std::chrono::steady_clock::now();
    LatticeParams lat{cfg.get<int>("d", 2), cfg.get<std::int64_t>("R", 4)};
    lat.validate();
    std::uint64_t seed = resolve_seed(g, cfg);
    double theta = cfg.get<double>("theta", 1.0);
    double p = cfg.has("p") ? cfg.get_required<double>("p")
                            : (1.0 + theta / RunParams{lat, theta, 1.0}.r_pow_dm1()) /
                                  static_cast<double>(lat.volume());
    if (p < 0.0 || p > 1.0) throw ConfigError("sir: p must lie in [0,1]");
    std::int64_t horizon = cfg.get<std::int64_t>("horizon", 50);
    std::string init = cfg.get<std::string>("init", "origin");

    SiteSet eta0;
    if (init == "origin") {
        eta0.insert(ScaledSite{});
    } else if (init == "recipe") {
        BlockConfig bc;
        bc.run = RunParams{lat, theta, cfg.get<double>("T", 2.0)};
        bc.K = cfg.get<double>("K", 100.0);
        Rng rng(derive_stream(seed, 0x11ull));
        eta0 = build_initial_condition(bc.run, bc.K, {0.0, 0.0, 0.0}, rng);
    } else {
        throw ConfigError("sir: init must be 'origin' or 'recipe'");
    }

    auto dir = ensure_out_dir(g);
    EdgeOracle oracle{derive_stream(seed, 0x51ull), p};
    auto run = run_sir(eta0, {}, lat, oracle, horizon);

    CsvWriter csv(dir / "sir_run.csv");
    auto header = site_header(lat.d, "k");
    header.insert(header.begin(), "generation");
    header.push_back("status");
    csv.row(header);
    for (std::size_t n = 0; n < run.infected_by_gen.size(); ++n) {
        std::vector<const ScaledSite*> inf;
        for (const auto& s : run.infected_by_gen[n]) inf.push_back(&s);
        std::sort(inf.begin(), inf.end(),
                  [](auto* a, auto* b) { return site_less(*a, *b); });
        for (const auto* s : inf) {
            std::vector<std::string> row{std::to_string(n)};
            for (int i = 0; i < lat.d; ++i) row.push_back(std::to_string(s->k[i]));
            row.push_back("I");
            csv.row(row);
        }
    }
    std::vector<const ScaledSite*> rec_sites;
    auto final_recovered = run.recovered_final();
    for (const auto& s : final_recovered) rec_sites.push_back(&s);
    std::sort(rec_sites.begin(), rec_sites.end(),
              [](auto* a, auto* b) { return site_less(*a, *b); });
    for (const auto* s : rec_sites) {
        std::vector<std::string> row{std::to_string(run.infected_by_gen.size() - 1)};
        for (int i = 0; i < lat.d; ++i) row.push_back(std::to_string(s->k[i]));
        row.push_back("R");
        csv.row(row);
    }

    Json verdict;
    verdict["verdict"] = run.verdict == Verdict::Extinct           ? "extinct"
                         : run.verdict == Verdict::SurvivedHorizon ? "survived-to-horizon"
                                                                   : "rule-fired";
    verdict["at"] = run.verdict_at;
    verdict["total_infected"] = run.cumulative().size();
    write_text(dir / "sir_verdict.json", verdict.dump(2) + "\n");

    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = seed;
    add_check(rec, "finite_run", static_cast<double>(run.infected_by_gen.size()), 0.0,
              true);
    return finish(rec, dir, t0);
}

int cmd_brw(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "R", "theta", "generations", "mass0"});
    auto t0 = std::chrono::steady_clock::now();
    RunParams params{{cfg.get<int>("d", 2), cfg.get<std::int64_t>("R", 4)},
                     cfg.get<double>("theta", 1.0), 100.0};
    params.validate();
    std::int64_t gens = cfg.get<std::int64_t>("generations", 20);
    std::int64_t mass0 = cfg.get<std::int64_t>("mass0", 1);
    std::uint64_t seed = resolve_seed(g, cfg);

    SparseCounts z0;
    z0.add(ScaledSite{}, mass0);
    Rng rng(derive_stream(seed, 0xb2ull));
    auto traj = simulate_brw(z0, params, gens, rng);
    auto stats = gw_stats(traj);

    auto dir = ensure_out_dir(g);
    CsvWriter csv(dir / "brw_trajectory.csv");
    auto header = site_header(params.lat.d, "k");
    header.insert(header.begin(), "generation");
    header.push_back("count");
    csv.row(header);
    for (std::size_t n = 0; n < traj.gens.size(); ++n) {
        std::vector<std::pair<ScaledSite, std::int64_t>> rows(traj.gens[n].map().begin(),
                                                              traj.gens[n].map().end());
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return site_less(a.first, b.first);
        });
        for (const auto& [s, c] : rows) {
            std::vector<std::string> row{std::to_string(n)};
            for (int i = 0; i < params.lat.d; ++i) row.push_back(std::to_string(s.k[i]));
            row.push_back(std::to_string(c));
            csv.row(row);
        }
    }

    CsvWriter mass_csv(dir / "brw_mass.csv");
    mass_csv.row({"generation", "mass", "theoretical_mean"});
    for (std::size_t n = 0; n < stats.mass.size(); ++n)
        mass_csv.row({std::to_string(n), std::to_string(stats.mass[n]),
                      fmt_double(stats.theoretical_mean[n])});

    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = seed;
    add_check(rec, "generations_recorded", static_cast<double>(traj.gens.size()),
              static_cast<double>(gens + 1),
              static_cast<std::int64_t>(traj.gens.size()) == gens + 1);
    return finish(rec, dir, t0);
}

int cmd_couple(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "R", "theta", "horizon", "trials"});
    auto t0 = std::chrono::steady_clock::now();
    RunParams params{{cfg.get<int>("d", 2), cfg.get<std::int64_t>("R", 2)},
                     cfg.get<double>("theta", 1.0), 100.0};
    params.validate();
    std::int64_t horizon = cfg.get<std::int64_t>("horizon", 8);
    std::int64_t trials = cfg.get<std::int64_t>("trials", 200);
    std::uint64_t seed = resolve_seed(g, cfg);

    std::int64_t violations = 0;
    std::int64_t mass_violations = 0;
    for (std::int64_t i = 0; i < trials; ++i) {
        Rng rng(derive_stream(seed, 0xc0ull, static_cast<std::uint64_t>(i)));
        SiteSet eta0{ScaledSite{}};
        auto run = coupled_step_run(eta0, {}, SparseCounts::from_set(eta0), params, rng,
                                    horizon, /*with_etabar=*/true, /*with_brw=*/true);
        violations += run.domination_violations;
        for (std::size_t n = 0; n < run.eta.size(); ++n)
            if (static_cast<std::int64_t>(run.eta[n].size()) >
                run.brw.gens[n].total_mass())
                ++mass_violations;
    }

    auto dir = ensure_out_dir(g);
    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = seed;
    add_check(rec, "domination_violations", static_cast<double>(violations), 0.0,
              violations == 0);
    add_check(rec, "mass_violations", static_cast<double>(mass_violations), 0.0,
              mass_violations == 0);
    return finish(rec, dir, t0);
}

int cmd_tanaka(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "R", "theta", "N", "m", "trials", "mass0"});
    auto t0 = std::chrono::steady_clock::now();
    RunParams params{{cfg.get<int>("d", 2), cfg.get<std::int64_t>("R", 4)},
                     cfg.get<double>("theta", 1.0), 100.0};
    params.validate();
    std::int64_t N = cfg.get<std::int64_t>("N", 15);
    std::int64_t m = cfg.get<std::int64_t>("m", 0);
    if (m <= 0) m = params.lat.d == 2 ? g_truncation_depth(params, 1e-10) : 60;
    std::int64_t trials = cfg.get<std::int64_t>("trials", 5);
    std::int64_t mass0 = cfg.get<std::int64_t>("mass0", 3);
    std::uint64_t seed = resolve_seed(g, cfg);

    Json reports = Json::array();
    double worst_tanaka = 0.0, worst_mp = 0.0;
    for (std::int64_t i = 0; i < trials; ++i) {
        SparseCounts z0;
        z0.add(ScaledSite{}, mass0);
        Rng rng(derive_stream(seed, 0x7aull, static_cast<std::uint64_t>(i)));
        auto traj = simulate_brw(z0, params, N, rng);
        ScaledSite anchor{};
        auto rep = verify_tanaka(traj, anchor, N, m);
        worst_tanaka = std::max(worst_tanaka, rep.relative_residual);

        std::int64_t span = 2 * params.lat.R + N * params.lat.R / 2 + 2;
        DenseGrid<double> phig(params.lat.d,
                               {-span, -span, params.lat.d == 3 ? -span : 0},
                               {span, span, params.lat.d == 3 ? span : 0});
        Rng phi_rng(derive_stream(seed, 0x7bull, static_cast<std::uint64_t>(i)));
        phig.for_each([&](const ScaledSite& s, const double&) {
            phig.at(s) = phi_rng.next_unit();
        });
        worst_mp = std::max(worst_mp, verify_mp(traj, SupportFun{std::move(phig)}, N));

        Json j;
        j["lhs"] = rep.lhs;
        j["initial_kernel"] = rep.initial_kernel;
        j["terminal_kernel"] = rep.terminal_kernel;
        j["martingale"] = rep.martingale;
        j["drift"] = rep.drift;
        j["truncation_correction"] = rep.correction;
        j["residual"] = rep.residual;
        j["relative_residual"] = rep.relative_residual;
        j["m"] = rep.m;
        j["N"] = rep.N;
        reports.push_back(j);
    }

    auto dir = ensure_out_dir(g);
    write_text(dir / "tanaka_reports.json", reports.dump(2) + "\n");

    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = seed;
    add_check(rec, "max_tanaka_relative_residual", worst_tanaka, 1e-8,
              worst_tanaka <= 1e-8);
    add_check(rec, "max_mp_relative_residual", worst_mp, 1e-9, worst_mp <= 1e-9);
    return finish(rec, dir, t0);
}

int cmd_kernels(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "R", "theta", "m", "window", "n"});
    auto t0 = std::chrono::steady_clock::now();
    RunParams params{{cfg.get<int>("d", 2), cfg.get<std::int64_t>("R", 2)},
                     cfg.get<double>("theta", 1.0), 100.0};
    params.validate();
    std::int64_t m = cfg.get<std::int64_t>("m", 20);
    std::int64_t w = cfg.get<std::int64_t>("window", 10);
    std::int64_t n_table = cfg.get<std::int64_t>("n", 4);
    std::uint64_t seed = resolve_seed(g, cfg);

    std::array<std::int64_t, 3> lo{-w, -w, params.lat.d == 3 ? -w : 0};
    std::array<std::int64_t, 3> hi{w, w, params.lat.d == 3 ? w : 0};
    KernelTable table = params.lat.d == 2 ? kernel_g(ScaledSite{}, m, lo, hi, params)
                                          : kernel_phi(ScaledSite{}, m, lo, hi, params);

    auto dir = ensure_out_dir(g);
    {
        CsvWriter csv(dir / "kernel_table.csv");
        std::vector<std::string> header = site_header(params.lat.d, "k");
        header.push_back("value");
        csv.row({std::string("# kind=") + (params.lat.d == 2 ? "g" : "phi") +
                 " m=" + std::to_string(m) + " d=" + std::to_string(params.lat.d) +
                 " R=" + std::to_string(params.lat.R) +
                 " theta=" + fmt_double(params.theta)});
        csv.row(header);
        table.values.for_each([&](const ScaledSite& s, const double& v) {
            std::vector<std::string> row;
            for (int i = 0; i < params.lat.d; ++i) row.push_back(std::to_string(s.k[i]));
            row.push_back(fmt_double(v));
            csv.row(row);
        });
    }
    {
        auto tt = transition_exact(n_table, params.lat);
        CsvWriter csv(dir / "transition_table.csv");
        std::vector<std::string> header = site_header(params.lat.d, "k");
        header.push_back("value");
        csv.row({std::string("# kind=p_n n=") + std::to_string(n_table) +
                 " d=" + std::to_string(params.lat.d) +
                 " R=" + std::to_string(params.lat.R)});
        csv.row(header);
        tt.values.for_each([&](const ScaledSite& s, const double& v) {
            std::vector<std::string> row;
            for (int i = 0; i < params.lat.d; ++i) row.push_back(std::to_string(s.k[i]));
            row.push_back(fmt_double(v));
            csv.row(row);
        });
    }

    // Generator identity spot check at random interior points.
    Rng rng(derive_stream(seed, 0x4eull));
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        ScaledSite x;
        for (int i = 0; i < params.lat.d; ++i)
            x.k[i] = static_cast<std::int64_t>(rng.below(
                         static_cast<std::uint64_t>(2 * (w - params.lat.R) + 1))) -
                     (w - params.lat.R);
        double lhs = generator_apply(
            [&](const ScaledSite& y) { return table.value(y); }, x, params.lat);
        double expect;
        if (params.lat.d == 3) {
            expect = table.correction_at(x) -
                     static_cast<double>(params.lat.R) *
                         (is_neighbor(x, ScaledSite{}, params.lat) ? 1.0 : 0.0);
        } else {
            double e_rate = std::expm1(params.theta / static_cast<double>(params.lat.R));
            expect = e_rate * table.value(x) -
                     (is_neighbor(x, ScaledSite{}, params.lat) ? 1.0 : 0.0) +
                     table.correction_at(x);
        }
        worst = std::max(worst, std::fabs(lhs - expect) / (1.0 + std::fabs(expect)));
    }

    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = seed;
    add_check(rec, "generator_identity_residual", worst, 1e-10, worst <= 1e-10);
    double mass = transition_exact(n_table, params.lat).mass();
    add_check(rec, "transition_mass", mass, 1.0, std::fabs(mass - 1.0) <= 1e-12);
    return finish(rec, dir, t0);
}

int cmd_estimate_pc(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "R_list", "g_max", "trials", "levels",
                      "population_exit", "target_frequency"});
    auto t0 = std::chrono::steady_clock::now();
    int d = cfg.get<int>("d", 2);
    std::vector<std::int64_t> r_list =
        cfg.get<std::vector<std::int64_t>>("R_list", {2, 4, 8, 16});
    if (r_list.empty()) throw ConfigError("estimate-pc: R_list must be nonempty");
    std::uint64_t seed = resolve_seed(g, cfg);

    PcConfig pc;
    pc.g_max = cfg.get<std::int64_t>("g_max", 200);
    pc.trials_per_level = cfg.get<std::int64_t>("trials", 400);
    pc.levels = cfg.get<int>("levels", 10);
    pc.threads = g.threads;
    pc.seed = seed;
    pc.population_exit = cfg.get<std::int64_t>("population_exit", 0);
    pc.target_frequency = cfg.get<double>("target_frequency", 0.10);

    auto dir = ensure_out_dir(g);
    CsvWriter csv(dir / "pc_estimates.csv");
    csv.row({"R", "d", "g_max", "p_hat", "bracket_lo", "bracket_hi", "theta_hat"});
    std::vector<std::pair<std::int64_t, double>> points;
    bool all_supercritical = true;
    for (std::int64_t R : r_list) {
        LatticeParams lat{d, R};
        auto est = estimate_pc(lat, pc);
        points.emplace_back(R, est.p_hat);
        all_supercritical =
            all_supercritical && est.p_hat * static_cast<double>(lat.volume()) > 1.0;
        csv.row({std::to_string(R), std::to_string(d), std::to_string(pc.g_max),
                 fmt_double(est.p_hat), fmt_double(est.bracket_lo),
                 fmt_double(est.bracket_hi), fmt_double(est.theta_hat)});
        CsvWriter curve(dir / ("survival_curve_R" + std::to_string(R) + ".csv"));
        curve.row({"p", "trials", "survivals", "wilson_lo", "wilson_hi"});
        for (const auto& pt : est.curve)
            curve.row({fmt_double(pt.p), std::to_string(pt.trials),
                       std::to_string(pt.survivals), fmt_double(pt.wilson_lo),
                       fmt_double(pt.wilson_hi)});
    }

    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = seed;
    add_check(rec, "all_p_hat_V_above_1", all_supercritical ? 1.0 : 0.0, 1.0,
              all_supercritical);
    if (points.size() >= 3 && all_supercritical) {
        auto fit = scaling_fit(points, d);
        add_check(rec, "gamma_hat", fit.gamma_hat, 1.0, true);
        add_check(rec, "theta_hat", fit.theta_hat, 0.0, true);
    }
    return finish(rec, dir, t0);
}

int cmd_scaling(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "in", "points"});
    auto t0 = std::chrono::steady_clock::now();
    int d = cfg.get<int>("d", 2);
    std::vector<std::pair<std::int64_t, double>> points;
    if (cfg.has("in")) {
        std::ifstream in(cfg.get_required<std::string>("in"));
        if (!in.good()) throw ConfigError("scaling: cannot open input CSV");
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            long R;
            double p_hat;
            if (std::sscanf(line.c_str(), "%ld,%*d,%*d,%lf", &R, &p_hat) == 2)
                points.emplace_back(static_cast<std::int64_t>(R), p_hat);
        }
    } else if (cfg.has("points")) {
        for (const auto& pr : cfg.get_required<Json>("points"))
            points.emplace_back(pr.at(0).get<std::int64_t>(), pr.at(1).get<double>());
    } else {
        throw ConfigError("scaling: need 'in' CSV path or 'points'");
    }

    auto fit = scaling_fit(points, d);
    auto dir = ensure_out_dir(g);
    Json j;
    j["gamma_hat"] = fit.gamma_hat;
    j["theta_hat"] = fit.theta_hat;
    j["r_squared"] = fit.r_squared;
    j["residuals"] = fit.residuals;
    write_text(dir / "scaling.json", j.dump(2) + "\n");

    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = resolve_seed(g, cfg);
    add_check(rec, "gamma_hat", fit.gamma_hat, 1.0, std::isfinite(fit.gamma_hat));
    return finish(rec, dir, t0);
}

int cmd_block(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "R", "theta", "T", "M", "K", "chi", "m_admiss",
                      "budget", "trials"});
    auto t0 = std::chrono::steady_clock::now();
    BlockConfig bc;
    bc.run = RunParams{{cfg.get<int>("d", 2), cfg.get<std::int64_t>("R", 16)},
                       cfg.get<double>("theta", 4.0), cfg.get<double>("T", 2.0)};
    bc.M = cfg.get<double>("M", 3.0);
    bc.K = cfg.get<double>("K", 100.0);
    bc.chi = cfg.get<double>("chi", 12.0);
    bc.m_admiss = cfg.get<double>("m_admiss", 4.0);
    bc.validate();
    std::int64_t budget = cfg.get<std::int64_t>("budget", 6);
    std::int64_t trials = cfg.get<std::int64_t>("trials", 5);
    std::uint64_t seed = resolve_seed(g, cfg);

    auto dir = ensure_out_dir(g);
    CsvWriter omega_csv(dir / "omega.csv");
    omega_csv.row({"trial", "x1", "x2"});
    std::int64_t f_counts[5] = {0, 0, 0, 0, 0};
    std::int64_t segments = 0, bookkeeping = 0, kappa_bad = 0;
    for (std::int64_t i = 0; i < trials; ++i) {
        EdgeOracle oracle{derive_stream(seed, 0xb1ull, static_cast<std::uint64_t>(i)),
                          bc.run.p()};
        Rng rng(derive_stream(seed, 0xb3ull, static_cast<std::uint64_t>(i)));
        auto result = block_iteration(bc, oracle, rng, budget);
        bookkeeping += result.bookkeeping_violations;
        kappa_bad += result.kappa_violations;
        for (const auto& gsite : result.omega)
            omega_csv.row({std::to_string(i), std::to_string(gsite.x1),
                           std::to_string(gsite.x2)});
        for (const auto& r : result.records) {
            if (!r.case_one) continue;
            ++segments;
            f_counts[0] += r.flags.f1_support;
            f_counts[1] += r.flags.f2_local_time;
            f_counts[2] += r.flags.f3_thinned_mass;
            f_counts[3] += r.flags.f4_admissible;
            f_counts[4] += r.occupied;
        }
    }
    CsvWriter events(dir / "event_frequencies.csv");
    events.row({"event", "count", "segments"});
    const char* names[5] = {"F1", "F2", "F3", "F4", "occupied"};
    for (int i = 0; i < 5; ++i)
        events.row({names[i], std::to_string(f_counts[i]), std::to_string(segments)});

    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = seed;
    add_check(rec, "bookkeeping_violations", static_cast<double>(bookkeeping), 0.0,
              bookkeeping == 0);
    add_check(rec, "kappa_violations", static_cast<double>(kappa_bad), 0.0,
              kappa_bad == 0);
    return finish(rec, dir, t0);
}

int cmd_oriented(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "q_list", "N", "trials", "dependence"});
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> q_list = cfg.get<std::vector<double>>("q_list", {0.5, 0.95});
    std::int64_t N = cfg.get<std::int64_t>("N", 200);
    std::int64_t trials = cfg.get<std::int64_t>("trials", 200);
    std::int64_t dep = cfg.get<std::int64_t>("dependence", 0);
    std::uint64_t seed = resolve_seed(g, cfg);

    auto dir = ensure_out_dir(g);
    CsvWriter csv(dir / "oriented.csv");
    csv.row({"q", "trials", "survivals", "frequency"});
    std::int64_t monotone_breaks = 0;
    for (double q : q_list) {
        std::int64_t survive = 0;
        for (std::int64_t i = 0; i < trials; ++i) {
            std::uint64_t s = derive_stream(seed, 0x0eull, static_cast<std::uint64_t>(i));
            bool lo = oriented_percolation(q, dep, N, s).percolates;
            if (lo) ++survive;
            if (q < 0.99) {
                bool hi =
                    oriented_percolation(std::min(1.0, q + 0.02), dep, N, s).percolates;
                if (lo && !hi) ++monotone_breaks;
            }
        }
        csv.row({fmt_double(q), std::to_string(trials), std::to_string(survive),
                 fmt_double(static_cast<double>(survive) / static_cast<double>(trials))});
    }

    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = seed;
    add_check(rec, "monotone_coupling_breaks", static_cast<double>(monotone_breaks),
              0.0, monotone_breaks == 0);
    return finish(rec, dir, t0);
}

int cmd_battery(const GlobalOpts& g, const Config& cfg) {
    cfg.check_schema({"seed", "d", "R", "theta", "n", "replicas", "box_radius"});
    auto t0 = std::chrono::steady_clock::now();
    BatteryConfig bc;
    std::int64_t R = cfg.get<std::int64_t>("R", 4);
    int d = cfg.get<int>("d", 2);
    double r_dm1 = d == 2 ? static_cast<double>(R)
                          : static_cast<double>(R) * static_cast<double>(R);
    double default_theta = r_dm1 * (std::exp(1.0 / 10.0) - 1.0);
    bc.params = RunParams{{d, R}, cfg.get<double>("theta", default_theta), 100.0};
    bc.n = cfg.get<std::int64_t>("n", 10);
    bc.replicas = cfg.get<std::int64_t>("replicas", 10000);
    bc.box_radius = cfg.get<double>("box_radius", 2.0);
    bc.seed = resolve_seed(g, cfg);
    bc.threads = g.threads;

    auto checks = moment_battery(bc);
    auto dir = ensure_out_dir(g);
    CsvWriter csv(dir / "battery.csv");
    csv.row({"check", "statistic", "reference", "z_score", "one_sided", "pass"});
    ExperimentRecord rec;
    rec.config = cfg.echo();
    rec.seed = bc.seed;
    for (const auto& c : checks) {
        csv.row({c.name, fmt_double(c.statistic), fmt_double(c.reference),
                 fmt_double(c.z_score), c.one_sided ? "1" : "0", c.pass ? "1" : "0"});
        add_check(rec, c.name, c.statistic, c.reference, c.pass);
    }
    return finish(rec, dir, t0);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo lab for range-R bond percolation, SIR epidemics, "
                 "and branching random walks on Z^d/R"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file");
    auto* seed_opt = app.add_option("--seed", g.seed, "base seed (64-bit)");
    app.add_option("--threads", g.threads, "replica worker threads");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--format", g.format, "table format (csv only)");

    struct Sub {
        CLI::App* app;
        std::vector<std::string> keys;
        int (*handler)(const GlobalOpts&, const Config&);
    };
    std::vector<Sub> subs;
    auto add = [&](const char* name, const char* desc, std::vector<std::string> keys,
                   int (*handler)(const GlobalOpts&, const Config&)) {
        auto* sc = app.add_subcommand(name, desc);
        sc->allow_extras();
        subs.push_back({sc, std::move(keys), handler});
    };

    add("sir", "run one SIR epidemic and dump its states",
        {"d", "R", "p", "theta", "horizon", "init", "T", "K"}, cmd_sir);
    add("brw", "run one branching random walk trajectory",
        {"d", "R", "theta", "generations", "mass0"}, cmd_brw);
    add("couple", "coupled epidemic / modified epidemic / envelope runs",
        {"d", "R", "theta", "horizon", "trials"}, cmd_couple);
    add("tanaka", "pathwise martingale-problem and local-time identities",
        {"d", "R", "theta", "N", "m", "trials", "mass0"}, cmd_tanaka);
    add("kernels", "kernel and transition tables with identity checks",
        {"d", "R", "theta", "m", "window", "n"}, cmd_kernels);
    add("estimate-pc", "bisection estimate of the critical probability",
        {"d", "R_list", "g_max", "trials", "levels", "population_exit",
         "target_frequency"},
        cmd_estimate_pc);
    add("scaling", "power-law fit of critical excess against R", {"d", "in", "points"},
        cmd_scaling);
    add("block", "renormalized block construction runs",
        {"d", "R", "theta", "T", "M", "K", "chi", "m_admiss", "budget", "trials"},
        cmd_block);
    add("oriented", "oriented site percolation on the positive quadrant",
        {"q_list", "N", "trials", "dependence"}, cmd_oriented);
    add("battery", "statistical battery against exact moment formulas",
        {"d", "R", "theta", "n", "replicas", "box_radius"}, cmd_battery);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (g.format != "csv" && g.format != "json")
            throw ConfigError("--format must be csv or json");
        for (const auto& sub : subs) {
            if (!sub.app->parsed()) continue;
            Config cfg;
            if (!g.config_path.empty()) cfg.load_file(g.config_path);
            g.seed_given = seed_opt->count() > 0;

            // --key value extras become overrides (numbers parsed as JSON).
            auto extras = sub.app->remaining();
            for (std::size_t i = 0; i < extras.size(); ++i) {
                std::string key = extras[i];
                if (key.rfind("--", 0) != 0 || i + 1 >= extras.size())
                    throw ConfigError("expected --key value pairs, got: " + key);
                key = key.substr(2);
                if (std::find(sub.keys.begin(), sub.keys.end(), key) == sub.keys.end())
                    throw ConfigError("unknown option --" + key + " for subcommand");
                const std::string& raw = extras[++i];
                Json parsed;
                try {
                    parsed = Json::parse(raw);
                } catch (...) {
                    parsed = raw;  // plain string value
                }
                cfg.set_override(key, parsed);
            }
            int rc = sub.handler(g, cfg);
            if (g.format == "json") mirror_tables_as_json(fs::path(g.out_dir));
            return rc;
        }
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
