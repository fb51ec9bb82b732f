#include "rangepc/randwalk.hpp"

#include <algorithm>
#include <cmath>

namespace rangepc {

StepDistribution::StepDistribution(const LatticeParams& lat, std::int64_t max_depth)
    : lat_(lat) {
    lat_.validate();
    require(max_depth >= 0, "StepDistribution: max_depth must be >= 0");
    std::int64_t R = lat_.R;
    double w = 1.0 / static_cast<double>(2 * R + 1);
    axis_.resize(static_cast<std::size_t>(max_depth) + 1);
    axis_[0] = {1.0};  // mu^{*0} = delta_0
    for (std::int64_t j = 1; j <= max_depth; ++j) {
        const auto& prev = axis_[static_cast<std::size_t>(j - 1)];
        std::int64_t prev_r = (j - 1) * R;
        std::vector<double> cur(static_cast<std::size_t>(j * R) + 1, 0.0);
        for (std::int64_t t = 0; t <= j * R; ++t) {
            KahanSum s;
            for (std::int64_t step = -R; step <= R; ++step) {
                std::int64_t u = t - step;
                if (u < 0) u = -u;
                if (u <= prev_r) s.add(prev[static_cast<std::size_t>(u)]);
            }
            cur[static_cast<std::size_t>(t)] = s.value() * w;
        }
        axis_[static_cast<std::size_t>(j)] = std::move(cur);
    }
}

std::vector<double> StepDistribution::pn_weights(std::int64_t n) const {
    require(n >= 0 && n <= max_depth(), "pn_weights: depth out of range");
    double V = static_cast<double>(lat_.volume());
    double a = static_cast<double>(V + 1) / V;  // (2R+1)^d / V
    double b = 1.0 / V;
    std::vector<double> w(static_cast<std::size_t>(n) + 1, 0.0);
    // w_j = C(n,j) a^j (-b)^{n-j}, filled downward from j = n.
    double cur = std::pow(a, static_cast<double>(n));
    w[static_cast<std::size_t>(n)] = cur;
    for (std::int64_t j = n; j >= 1; --j) {
        cur *= -(b / a) * static_cast<double>(j) / static_cast<double>(n - j + 1);
        w[static_cast<std::size_t>(j - 1)] = cur;
    }
    return w;
}

std::vector<double> StepDistribution::cumulative_weights(std::int64_t m,
                                                         double damp) const {
    require(m >= 0 && m <= max_depth(), "cumulative_weights: depth out of range");
    std::vector<KahanSum> acc(static_cast<std::size_t>(m) + 1);
    double factor = 1.0;
    for (std::int64_t n = 1; n <= m; ++n) {
        factor *= damp;
        auto w = pn_weights(n);
        for (std::int64_t j = 0; j <= n; ++j)
            acc[static_cast<std::size_t>(j)].add(factor * w[static_cast<std::size_t>(j)]);
    }
    std::vector<double> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = acc[i].value();
    return out;
}

double StepDistribution::eval(const std::vector<double>& weights,
                              const ScaledSite& k) const {
    std::int64_t R = lat_.R;
    std::int64_t jmax = static_cast<std::int64_t>(weights.size()) - 1;
    require(jmax <= max_depth(), "eval: weights deeper than axis tables");
    // mu^{*j} vanishes beyond j*R per axis.
    std::int64_t jmin = 0;
    std::array<std::int64_t, 3> abs{0, 0, 0};
    for (int i = 0; i < lat_.d; ++i) {
        abs[i] = k.k[i] < 0 ? -k.k[i] : k.k[i];
        std::int64_t need = ceil_div(abs[i], R);
        if (need > jmin) jmin = need;
    }
    if (jmin == 0 && (abs[0] | abs[1] | abs[2])) jmin = 1;
    KahanSum s;
    for (std::int64_t j = jmin; j <= jmax; ++j) {
        double wj = weights[static_cast<std::size_t>(j)];
        if (wj == 0.0) continue;
        const auto& ax = axis_[static_cast<std::size_t>(j)];
        double prod = wj;
        for (int i = 0; i < lat_.d; ++i) prod *= ax[static_cast<std::size_t>(abs[i])];
        s.add(prod);
    }
    return s.value();
}

double StepDistribution::pn(std::int64_t n, const ScaledSite& k) const {
    if (n == 0) {
        bool zero = true;
        for (int i = 0; i < lat_.d; ++i) zero = zero && k.k[i] == 0;
        return zero ? 1.0 : 0.0;
    }
    for (int i = 0; i < lat_.d; ++i) {
        std::int64_t a = k.k[i] < 0 ? -k.k[i] : k.k[i];
        if (a > n * lat_.R) return 0.0;
    }
    return eval(pn_weights(n), k);
}

double TransitionTable::mass() const {
    KahanSum s;
    values.for_each([&](const ScaledSite&, const double& v) { s.add(v); });
    return s.value();
}

double p1(const ScaledSite& k, const LatticeParams& p) {
    p.validate();
    ScaledSite origin{};
    return is_neighbor(k, origin, p) ? 1.0 / static_cast<double>(p.volume()) : 0.0;
}

TransitionTable transition_exact(std::int64_t n, const LatticeParams& p) {
    p.validate();
    require(n >= 0, "transition_exact: n must be >= 0");
    std::int64_t radius = n * p.R;
    double cells = std::pow(2.0 * static_cast<double>(radius) + 1.0, p.d);
    require(cells <= 2.0e8, "transition_exact: window budget exceeded");

    TransitionTable table;
    table.n = n;
    table.lat = p;
    std::array<std::int64_t, 3> lo{}, hi{};
    for (int i = 0; i < p.d; ++i) {
        lo[i] = -radius;
        hi[i] = radius;
    }
    table.values = DenseGrid<double>(p.d, lo, hi);
    if (n == 0) {
        table.values.at(ScaledSite{}) = 1.0;
        return table;
    }

    StepDistribution walk(p, n);
    auto w = walk.pn_weights(n);
    table.values.for_each([&](const ScaledSite& s, const double&) {
        double v = walk.eval(w, s);
        // Alternating-sum rounding can leave a vanishing negative residue.
        if (v < 0.0) {
            ensure(v > -1e-13, "transition_exact: negative probability");
            v = 0.0;
        }
        table.values.at(s) = v;
    });
    return table;
}

double gaussian_lambda0(const LatticeParams& p) {
    p.validate();
    double R = static_cast<double>(p.R);
    double box = std::pow(2.0 * R + 1.0, p.d);
    return (R * (R + 1.0) / (R * R)) * box / static_cast<double>(p.volume());
}

double gaussian_approx(std::int64_t n, const ScaledSite& k, const LatticeParams& p) {
    require(n >= 1, "gaussian_approx: n must be >= 1");
    double lambda0 = gaussian_lambda0(p);
    double R = static_cast<double>(p.R);
    double nn = static_cast<double>(n);
    double x2 = 0.0;
    for (int i = 0; i < p.d; ++i) x2 += sq(static_cast<double>(k.k[i]) / R);
    double norm = std::pow(3.0 / lambda0, 0.5 * p.d) *
                  std::pow(2.0 * M_PI, -0.5 * p.d) * std::pow(nn, -0.5 * p.d) *
                  std::pow(R, -static_cast<double>(p.d));
    return norm * std::exp(-3.0 * x2 / (2.0 * nn * lambda0));
}

namespace {

KernelTable build_kernel(KernelKind kind, const ScaledSite& a, std::int64_t m,
                         std::array<std::int64_t, 3> lo,
                         std::array<std::int64_t, 3> hi, const RunParams& params,
                         double damp, double scale, double correction_scale) {
    KernelTable t;
    t.kind = kind;
    t.anchor = a;
    t.m = m;
    t.params = params;
    t.values = DenseGrid<double>(params.lat.d, lo, hi);
    t.correction = DenseGrid<double>(params.lat.d, lo, hi);

    StepDistribution walk(params.lat, m + 1);
    auto cumw = walk.cumulative_weights(m, damp);
    auto corw = walk.pn_weights(m + 1);

    t.values.for_each([&](const ScaledSite& s, const double&) {
        ScaledSite diff;
        for (int i = 0; i < params.lat.d; ++i) diff.k[i] = s.k[i] - a.k[i];
        double v = scale * walk.eval(cumw, diff);
        if (v < 0.0) {
            ensure(v > -1e-10 * scale, "kernel table: negative value");
            v = 0.0;
        }
        t.values.at(s) = v;
        t.correction.at(s) = correction_scale * walk.eval(corw, diff);
    });
    return t;
}

}  // namespace

KernelTable kernel_phi(const ScaledSite& a, std::int64_t m,
                       std::array<std::int64_t, 3> lo,
                       std::array<std::int64_t, 3> hi, const RunParams& params) {
    params.validate();
    require(params.lat.d == 3, "kernel_phi: d must be 3");
    require(m >= 0, "kernel_phi: m must be >= 0");
    double RV = static_cast<double>(params.lat.R) * static_cast<double>(params.lat.volume());
    return build_kernel(KernelKind::phi3, a, m, lo, hi, params, 1.0, RV, RV);
}

KernelTable kernel_g(const ScaledSite& a, std::int64_t m,
                     std::array<std::int64_t, 3> lo,
                     std::array<std::int64_t, 3> hi, const RunParams& params) {
    params.validate();
    require(params.lat.d == 2, "kernel_g: d must be 2");
    require(params.theta > 0.0, "kernel_g: theta must be positive");
    require(m >= 0, "kernel_g: m must be >= 0");
    double V = static_cast<double>(params.lat.volume());
    double damp = std::exp(-params.theta / static_cast<double>(params.lat.R));
    // correction stores V e^{-m theta/R} p_{m+1}(.-a)
    double corr_scale = V * std::pow(damp, static_cast<double>(m));
    KernelTable t =
        build_kernel(KernelKind::g2, a, m, lo, hi, params, damp, V, corr_scale);
    t.tail_estimate = corr_scale * damp / (1.0 - damp);
    return t;
}

std::int64_t g_truncation_depth(const RunParams& params, double tol) {
    params.validate();
    require(params.lat.d == 2 && params.theta > 0.0, "g_truncation_depth: need d=2, theta>0");
    require(tol > 0.0, "g_truncation_depth: tol must be positive");
    double V = static_cast<double>(params.lat.volume());
    double damp = std::exp(-params.theta / static_cast<double>(params.lat.R));
    // Tail after m terms is at most V damp^m / (1 - damp) * sup_x p <= that.
    double bound = V / (1.0 - damp);
    std::int64_t m = 1;
    double cur = damp;
    while (bound * cur >= tol) {
        ++m;
        cur *= damp;
        require(m <= 2'000'000, "g_truncation_depth: tolerance unreachable");
    }
    return m;
}

double majorant_g(const std::array<double, 3>& u, const ScaledSite& x,
                  const RunParams& params) {
    params.validate();
    const auto& lat = params.lat;
    double R = static_cast<double>(lat.R);
    double dist2 = 0.0;
    for (int i = 0; i < lat.d; ++i) dist2 += sq(static_cast<double>(x.k[i]) / R - u[i]);

    if (lat.d == 3) return R * inverse_power_exp_series(0.5, dist2 / 32.0);

    require(params.theta > 0.0, "majorant_g: theta must be positive in d=2");
    double damp = std::exp(-params.theta / R);
    // Geometric damping: direct summation, stop when the remaining geometric
    // tail is negligible against the partial sum.
    KahanSum s;
    double dpow = 1.0;
    for (std::int64_t n = 1;; ++n) {
        dpow *= damp;
        double term = dpow / static_cast<double>(n) *
                      std::exp(-dist2 / (32.0 * static_cast<double>(n)));
        s.add(term);
        if (n > 8) {
            double tail_bound = dpow * damp / (1.0 - damp);
            if (tail_bound < 1e-15 * (std::fabs(s.value()) + 1e-300)) break;
        }
        ensure(n < 100'000'000, "majorant_g: series failed to converge");
    }
    return s.value();
}

double f_eta_kernel(const ScaledSite& a, const ScaledSite& y,
                    const LatticeParams& lat, double eta) {
    lat.validate();
    require(eta > 0.0, "f_eta_kernel: eta must be positive");
    double R = static_cast<double>(lat.R);
    double dist2 = 0.0;
    for (int i = 0; i < lat.d; ++i) dist2 += sq(static_cast<double>(y.k[i] - a.k[i]) / R);
    return inverse_power_exp_series(1.0 + eta, dist2 / 64.0);
}

SeriesBound series_bound_check(double alpha, double r) {
    require(alpha > 0.0, "series_bound_check: alpha must be positive");
    require(r >= 1.0 / 64.0, "series_bound_check: r must be >= 1/64");
    SeriesBound out;
    out.sum = inverse_power_exp_series(alpha, r);
    out.normalized = std::pow(r, alpha) * out.sum;
    return out;
}

DenseGrid<double> conv_p1(const DenseGrid<double>& in, const LatticeParams& p) {
    p.validate();
    std::int64_t R = p.R;
    std::array<std::int64_t, 3> lo{}, hi{};
    for (int i = 0; i < p.d; ++i) {
        lo[i] = in.lo(i) - R;
        hi[i] = in.hi(i) + R;
    }
    for (int i = p.d; i < 3; ++i) {
        lo[i] = in.lo(i);
        hi[i] = in.hi(i);
    }

    // Axis-by-axis box sums of width 2R+1 (zero padding), then combine.
    DenseGrid<double> smooth(p.d, lo, hi);
    smooth.for_each([&](const ScaledSite& s, const double&) {
        smooth.at(s) = in.value_or_zero(s);
    });
    double w = 1.0 / static_cast<double>(2 * R + 1);
    for (int axis = 0; axis < p.d; ++axis) {
        DenseGrid<double> next(p.d, lo, hi);
        next.for_each([&](const ScaledSite& s, const double&) {
            KahanSum acc;
            ScaledSite q = s;
            for (std::int64_t t = -R; t <= R; ++t) {
                q.k[axis] = s.k[axis] + t;
                acc.add(smooth.value_or_zero(q));
            }
            next.at(s) = acc.value() * w;
        });
        smooth = std::move(next);
    }

    double V = static_cast<double>(p.volume());
    double a = (V + 1.0) / V;
    double b = 1.0 / V;
    DenseGrid<double> out(p.d, lo, hi);
    out.for_each([&](const ScaledSite& s, const double&) {
        out.at(s) = a * smooth.at(s) - b * in.value_or_zero(s);
    });
    return out;
}

KernelTable green_apply(const DenseGrid<double>& f, std::int64_t m,
                        std::array<std::int64_t, 3> out_lo,
                        std::array<std::int64_t, 3> out_hi,
                        const RunParams& params) {
    params.validate();
    require(m >= 0, "green_apply: m must be >= 0");

    KernelTable t;
    t.kind = KernelKind::psi;
    t.m = m;
    t.params = params;
    t.values = DenseGrid<double>(params.lat.d, out_lo, out_hi);
    t.correction = DenseGrid<double>(params.lat.d, out_lo, out_hi);

    std::vector<KahanSum> acc(t.values.raw().size());
    DenseGrid<double> conv = f;  // p_0 * f
    for (std::int64_t n = 0;; ++n) {
        std::size_t idx = 0;
        t.values.for_each([&](const ScaledSite& s, const double&) {
            acc[idx++].add(conv.value_or_zero(s));
        });
        if (n == m) break;
        conv = conv_p1(conv, params.lat);
    }
    conv = conv_p1(conv, params.lat);  // p_{m+1} * f
    std::size_t idx = 0;
    t.values.for_each([&](const ScaledSite& s, const double&) {
        t.values.at(s) = acc[idx++].value();
        t.correction.at(s) = conv.value_or_zero(s);
    });
    t.tail_estimate = green_tail_estimate(f, params.lat);
    return t;
}

double green_tail_estimate(const DenseGrid<double>& f, const LatticeParams& p) {
    double sup = 0.0;
    f.for_each([&](const ScaledSite& s, const double& v) {
        for (int i = 0; i < p.d; ++i) {
            if (s.k[i] == f.lo(i) || s.k[i] == f.hi(i)) {
                sup = std::max(sup, std::fabs(v));
                return;
            }
        }
    });
    return sup;
}

double g_weight(const DenseGrid<double>& phi, std::int64_t n, const RunParams& params) {
    params.validate();
    require(n >= 0, "g_weight: n must be >= 0");
    double sup0 = 0.0;
    phi.for_each([&](const ScaledSite&, const double& v) {
        require(v >= 0.0, "g_weight: phi must be nonnegative");
        sup0 = std::max(sup0, v);
    });
    KahanSum g;
    g.add(3.0 * sup0);
    DenseGrid<double> conv = phi;
    for (std::int64_t k = 1; k <= n; ++k) {
        conv = conv_p1(conv, params.lat);
        double sup = 0.0;
        conv.for_each([&](const ScaledSite&, const double& v) { sup = std::max(sup, v); });
        g.add(sup);
    }
    return g.value();
}

double g_weight_constant(double c, std::int64_t n) {
    require(c >= 0.0, "g_weight_constant: c must be nonnegative");
    require(n >= 0, "g_weight_constant: n must be >= 0");
    return 3.0 * c + static_cast<double>(n) * c;
}

DenseGrid<double> expected_measure_grid(const DenseGrid<double>& phi,
                                        std::int64_t n, const RunParams& params) {
    params.validate();
    require(n >= 0, "expected_measure_grid: n must be >= 0");
    DenseGrid<double> conv = phi;
    for (std::int64_t k = 1; k <= n; ++k) conv = conv_p1(conv, params.lat);
    double factor = std::pow(params.growth(), static_cast<double>(n));
    for (auto& v : conv.raw()) v *= factor;
    return conv;
}

}  // namespace rangepc
