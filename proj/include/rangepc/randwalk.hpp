#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rangepc/common.hpp"
#include "rangepc/lattice.hpp"

namespace rangepc {

// Parameters of one stochastic run: lattice, drift theta, time-scale T.
// Derived quantities follow the Brownian scaling of the processes here:
// T_theta_R = floor(T R^{d-1} / theta), R_theta = sqrt(R^{d-1} / theta).
struct RunParams {
    LatticeParams lat;
    double theta = 0.0;
    double T = 100.0;

    void validate() const {
        lat.validate();
        require(theta >= 0.0, "RunParams: theta must be >= 0");
        require(T > 0.0, "RunParams: T must be > 0");
        double pr = p();
        require(pr > 0.0 && pr <= 1.0, "RunParams: derived p(R) outside (0,1]");
    }

    double r_pow_dm1() const {
        double r = static_cast<double>(lat.R);
        return lat.d == 2 ? r : r * r;
    }

    // Per-generation mean offspring, 1 + theta / R^{d-1}.
    double growth() const { return 1.0 + theta / r_pow_dm1(); }

    // Edge/branching probability p(R) = (1 + theta/R^{d-1}) / V(R).
    double p() const { return growth() / static_cast<double>(lat.volume()); }

    bool paper_regime() const {
        return theta >= 100.0 && static_cast<double>(lat.R) >= 4.0 * theta;
    }

    std::int64_t T_theta_R() const {
        require(theta > 0.0, "T_theta_R: theta must be positive");
        return static_cast<std::int64_t>(std::floor(T * r_pow_dm1() / theta));
    }

    double R_theta() const {
        require(theta > 0.0, "R_theta: theta must be positive");
        return std::sqrt(r_pow_dm1() / theta);
    }

    // f_d(theta): sqrt(theta) in d=2, log(theta) in d=3.
    double f_d() const {
        require(theta > 0.0, "f_d: theta must be positive");
        return lat.d == 2 ? std::sqrt(theta) : std::log(theta);
    }

    // beta_d(R): typical unit-box occupancy scale, log R in d=2, 1 in d=3.
    double beta_d() const {
        return lat.d == 2 ? std::log(static_cast<double>(lat.R)) : 1.0;
    }
};

// n-step distribution of the uniform-neighborhood walk, evaluated through the
// separable decomposition p_1 = a * mu^{(x)d} - b * delta_0 with mu uniform on
// {-R..R} per axis, a = (2R+1)^d / V, b = 1/V. Then
//   p_n = sum_j C(n,j) a^j (-b)^{n-j} (mu^{*j})^{(x)d},
// so any p_n (or any fixed linear combination over n) evaluates pointwise from
// one-dimensional tables. Axis tables are symmetric by construction, which
// makes p_n(k) = p_n(-k) exact.
class StepDistribution {
  public:
    StepDistribution(const LatticeParams& lat, std::int64_t max_depth);

    const LatticeParams& lattice() const { return lat_; }
    std::int64_t max_depth() const { return static_cast<std::int64_t>(axis_.size()) - 1; }

    // Binomial weights for p_n (index 0..n).
    std::vector<double> pn_weights(std::int64_t n) const;

    // Weights of sum_{n=1}^{m} damp^n p_n (for the potential kernels).
    std::vector<double> cumulative_weights(std::int64_t m, double damp) const;

    // Evaluate a weighted combination at point k.
    double eval(const std::vector<double>& weights, const ScaledSite& k) const;

    double pn(std::int64_t n, const ScaledSite& k) const;

  private:
    LatticeParams lat_;
    // axis_[j][t] = (mu^{*j})(t) for t = 0..j*R (symmetric half-table).
    std::vector<std::vector<double>> axis_;
};

// Dense exact table of p_n on its support window.
struct TransitionTable {
    std::int64_t n = 0;
    LatticeParams lat;
    DenseGrid<double> values;

    // 0 outside the support window (exact: p_n vanishes beyond n*R).
    double value(const ScaledSite& k) const { return values.value_or_zero(k); }
    double mass() const;
};

double p1(const ScaledSite& k, const LatticeParams& p);

// Exact n-fold convolution of p1 (p_0 = delta_0).
TransitionTable transition_exact(std::int64_t n, const LatticeParams& p);

// Covariance constant lambda_0(R,d) of the single step; -> 1 as R -> infinity.
double gaussian_lambda0(const LatticeParams& p);

// Gaussian approximation of p_n(x) at x = k/R.
double gaussian_approx(std::int64_t n, const ScaledSite& k, const LatticeParams& p);

// Generator L f(x) = (1/V) sum_{e in N(0)} (f(x+e) - f(x)).
// f may throw if undefined; the error propagates.
template <typename Fn>
double generator_apply(Fn&& f, const ScaledSite& x, const LatticeParams& p) {
    KahanSum acc;
    double fx = f(x);
    for_each_neighbor(x, p, [&](const ScaledSite& y) { acc.add(f(y) - fx); });
    return acc.value() / static_cast<double>(p.volume());
}

enum class KernelKind { phi3, g2, majorant_g, f_eta, psi };

// Truncated potential kernel with its exact leftover transition term, so the
// generator identities hold to floating-point precision at finite depth m:
//   d=3:  L phi^(m)_a = R V p_{m+1}(.-a) - R 1_{N(a)}
//   d=2:  L g^(m)_a   = (e^{theta/R}-1) g^(m)_a - 1_{N(a)} + V e^{-m theta/R} p_{m+1}(.-a)
// Queries outside the window are an error, never a silent zero.
struct KernelTable {
    KernelKind kind = KernelKind::phi3;
    ScaledSite anchor{};
    std::int64_t m = 0;
    RunParams params;
    DenseGrid<double> values;
    DenseGrid<double> correction;
    // Reported size of what truncation leaves out: the geometric tail bound
    // for g (d=2), the boundary-shell sup of f for the Green potential, and 0
    // for phi (the identities carry the exact leftover term either way).
    double tail_estimate = 0.0;

    double value(const ScaledSite& x) const {
        require(values.inside(x), "KernelTable: query outside window");
        return values.at(x);
    }
    double correction_at(const ScaledSite& x) const {
        require(correction.inside(x), "KernelTable: query outside window");
        return correction.at(x);
    }
    bool covers(const ScaledSite& x) const { return values.inside(x); }
};

// phi_a^(m)(x) = R V(R) sum_{n=1..m} p_n(x-a), d=3 only.
KernelTable kernel_phi(const ScaledSite& a, std::int64_t m,
                       std::array<std::int64_t, 3> lo,
                       std::array<std::int64_t, 3> hi, const RunParams& params);

// g_a^(m)(x) = V(R) sum_{n=1..m} e^{-n theta/R} p_n(x-a), d=2 only.
KernelTable kernel_g(const ScaledSite& a, std::int64_t m,
                     std::array<std::int64_t, 3> lo,
                     std::array<std::int64_t, 3> hi, const RunParams& params);

// Smallest m with the geometric tail bound V e^{-m theta/R} / (1 - e^{-theta/R})
// below tol (d=2 kernels).
std::int64_t g_truncation_depth(const RunParams& params, double tol);

// Majorant kernel g_{u,d}(x):
//   d=2: sum_n e^{-n theta/R} n^{-1}   exp(-|x-u|^2/(32 n))
//   d=3: R sum_n       n^{-3/2} exp(-|x-u|^2/(32 n))
double majorant_g(const std::array<double, 3>& u, const ScaledSite& x,
                  const RunParams& params);

// f_a(y) = sum_k k^{-2-eta} exp(-|y-a|^2/(64 k)), eta = 1/8 by default.
double f_eta_kernel(const ScaledSite& a, const ScaledSite& y,
                    const LatticeParams& lat, double eta = 0.125);

struct SeriesBound {
    double sum = 0.0;
    double normalized = 0.0;  // r^alpha * sum
};

// S(alpha, r) = sum_k k^{-1-alpha} e^{-r/k} and r^alpha S, r >= 1/64.
SeriesBound series_bound_check(double alpha, double r);

// Finitely supported site function as a dense grid; zero outside its window.
struct SupportFun {
    DenseGrid<double> grid;

    double operator()(const ScaledSite& s) const { return grid.value_or_zero(s); }
};

// One-step smoothing by p_1: out = a * axis-box-averages - b * in, window
// dilated by R. Exact convolution with p_1 for zero-outside functions.
DenseGrid<double> conv_p1(const DenseGrid<double>& in, const LatticeParams& p);

// Truncated Green potential of f: psi^(m)(x) = sum_{n=0..m} (p_n * f)(x), f
// zero outside its grid. values on the requested output window; correction
// holds (p_{m+1} * f). Satisfies L psi^(m) = (p_{m+1} * f) - f exactly.
KernelTable green_apply(const DenseGrid<double>& f, std::int64_t m,
                        std::array<std::int64_t, 3> out_lo,
                        std::array<std::int64_t, 3> out_hi,
                        const RunParams& params);

// Decay-certificate style tail report for a Green table: sup of f on its
// window boundary shell (an order-of-magnitude indicator, not used by the
// exact identities).
double green_tail_estimate(const DenseGrid<double>& f, const LatticeParams& p);

// G(phi, n) = 3 ||phi||_inf + sum_{k=1..n} sup_y (phi * p_k)(y), phi >= 0
// finitely supported; the sup is exact on the support window dilated by nR.
double g_weight(const DenseGrid<double>& phi, std::int64_t n, const RunParams& params);

// Constant test mode: phi == c everywhere gives G = 3c + n c.
double g_weight_constant(double c, std::int64_t n);

// E[Z_n(phi)] for a walk started at x: growth^n * (phi * p_n)(x), as a dense
// grid over any window (used by the moment battery).
DenseGrid<double> expected_measure_grid(const DenseGrid<double>& phi,
                                        std::int64_t n, const RunParams& params);

}  // namespace rangepc
