#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "faf/core.hpp"
#include "faf/geometry.hpp"
#include "faf/supportfn.hpp"

namespace faf {

// Status-quo risks e*_g = (1/n) sum Z_i^g / mu_g for a score policy
// a*(X_i) in [0,1], with the per-observation influence values.
struct StatusQuoRisk {
    RiskPoint e_star;
    std::vector<double> z_r, z_b;              // Z_i^g
    std::vector<double> infl_r, infl_b;        // Z_i^{g,*}
    GroupScale scale;
};

StatusQuoRisk estimate_status_quo(const Dataset& data, const LossSpec& loss,
                                  const std::vector<double>& a_scores);

struct BootstrapConfig {
    std::size_t draws = 500;
    std::uint64_t seed = 0;
    double step = 0.0;        // s_n; 0 resolves to n^{-1/3}
    double varsigma = 1e-3;
    bool unit_weights = false;  // forces W_i = 1 (testing hook)

    double resolve_step(std::size_t n) const {
        return step > 0.0 ? step : std::pow(static_cast<double>(n), -1.0 / 3.0);
    }
    void validate(std::size_t n) const;
};

// Direct-path grid caches shared by the test statistics.
struct StatGrids {
    SupportFunctionEstimate::GridEval circle;
    DirectionGrid half;
    std::vector<double> h_neg_half;  // h(-q) for q in the admissible half
    DirectionGrid pareto;
    std::vector<double> h_pareto;
    double h_u1 = 0.0, h_u2 = 0.0;   // exact axis directions
    double h_vp = 0.0, h_vm = 0.0;   // at (1,-1)/sqrt2 and (-1,1)/sqrt2
};

StatGrids build_stat_grids(const SupportFunctionEstimate& sfe, std::size_t n_circle,
                           std::size_t n_half, std::size_t n_pareto, int threads = 1);

// sqrt(n) ([max_{S1} q'e - h]_+ + [max_{S~1} (-h_C(e)(q) - h(-q))]_-)
double stat_frontier(const SupportFunctionEstimate& sfe, const StatGrids& g, const RiskPoint& e);
// sqrt(n) ([max_{S1} q'e - h]_+ + [max_{arc} q'e - h]_-)
double stat_pareto(const SupportFunctionEstimate& sfe, const StatGrids& g, const RiskPoint& e);
// frontier statistic at the estimated status-quo point
double stat_lda(const SupportFunctionEstimate& sfe, const StatGrids& g, const StatusQuoRisk& sq);

// Multiplier-bootstrap draw material: weighted support values over the shared
// grids, the weighted status-quo risks, and the per-draw minimized value of
// the 45-degree profile. One pass over draws; everything else reuses this.
struct BootstrapDraws {
    std::size_t B = 0;
    double sqrt_n = 0.0;
    double step = 0.0;
    // base = unit-weight values through the same evaluation path
    std::vector<double> base_circle, base_neg_half;
    double base_u1 = 0.0, base_u2 = 0.0, base_vp = 0.0, base_vm = 0.0;
    double base_etilde = 0.0;
    // per draw, row-major B x size
    std::vector<double> circle, neg_half;
    std::vector<double> u1, u2, vp, vm;
    std::vector<double> estar_r, estar_b;   // weighted e~* (empty without policy)
    std::vector<double> etilde;             // per-draw minimized perturbed profile
    RiskPoint estar_base;
    bool has_estar = false;
    bool has_etilde = false;

    double dev_circle_max = 0.0;  // max_b,j |sqrt(n) (draw - base)|
    double dev_estar_max = 0.0;
};

BootstrapDraws run_bootstrap_draws(const SupportFunctionEstimate& sfe, const StatGrids& grids,
                                   const BootstrapConfig& cfg, const StatusQuoRisk* sq,
                                   bool want_etilde, int threads = 1);

struct TestResult {
    std::string test;
    double statistic = 0.0;
    double critical_value = 0.0;
    double alpha = 0.0;
    double varsigma = 0.0;
    bool reject = false;
    std::size_t draws = 0;
    double step = 0.0;
    std::string notes;
};

// Frontier membership test for a fixed point (the LDA test with a known
// candidate): reject H0: e in F when T_n > c_{1-a+vs} + vs.
TestResult test_frontier_point(const SupportFunctionEstimate& sfe, const StatGrids& g,
                               const BootstrapDraws& bd, const RiskPoint& e, double alpha,
                               double varsigma);
// Same with the estimated status-quo point entering the statistic and draws.
TestResult test_lda(const SupportFunctionEstimate& sfe, const StatGrids& g,
                    const BootstrapDraws& bd, const StatusQuoRisk& sq, double alpha,
                    double varsigma);

struct CandidateGridMeta {
    RiskPoint center;
    double halfwidth_r = 0.0, halfwidth_b = 0.0;
    std::size_t per_axis = 40;
};

struct SkewOutput {
    TestResult result;       // statistic = -(sup product over CS), critical = 0
    bool cs_empty = false;
    double sup_product = 0.0;
    bool truth_covered = false;  // set when the true (R, B) was supplied
    bool truth_checked = false;
    CandidateGridMeta grid_R, grid_B;
};

SkewOutput test_weak_skew(const SupportFunctionEstimate& sfe, const StatGrids& g,
                          const BootstrapDraws& bd, double alpha, std::size_t grid_per_axis,
                          const RiskPoint* true_R = nullptr, const RiskPoint* true_B = nullptr);

enum class DistanceKind { squared_euclidean, euclidean, manhattan, chebyshev };
double distance_value(DistanceKind k, const RiskPoint& a, const RiskPoint& b);

struct DistanceCI {
    double lo = 0.0, hi = 0.0;
    double point = 0.0;          // plug-in distance to the fairest point
    bool branch45 = false, branch_plus = false, branch_minus = false;
    bool empty = false;
    double alpha = 0.0, varsigma = 0.0;
    CandidateGridMeta grid_e, grid_Fp, grid_Fm;
    bool contains(double v) const { return !empty && v >= lo && v <= hi; }
};

DistanceCI distance_to_F_ci(const SupportFunctionEstimate& sfe, const StatGrids& g,
                            const BootstrapDraws& bd, const StatusQuoRisk& sq, DistanceKind rho,
                            double alpha, std::size_t grid_per_axis);

// Perturbed support-function view handed to user functionals: h(w) plus the
// scaled bootstrap deviation at any direction (unit or not).
class HView {
  public:
    HView(const AngularKernel& kern, const AngularKernel::DrawState& base,
          const AngularKernel::DrawState* draw, double factor)
        : kern_(kern), base_(base), draw_(draw), factor_(factor) {}

    double h(double w1, double w2) const {
        double b = kern_.h_vec(base_, w1, w2);
        if (!draw_) return b;
        return b + factor_ * (kern_.h_vec(*draw_, w1, w2) - b);
    }

  private:
    const AngularKernel& kern_;
    const AngularKernel::DrawState& base_;
    const AngularKernel::DrawState* draw_;
    double factor_;
};

struct BootstrapLaw {
    std::vector<double> values;  // directional-derivative draws
    double quantile(double beta) const;
};

// Procedure-2 bootstrap for an arbitrary functional of (h(.), e*): returns
// the B draws of the numerical directional derivative.
BootstrapLaw multiplier_bootstrap(const SupportFunctionEstimate& sfe, const StatusQuoRisk* sq,
                                  const std::function<double(const HView&, const RiskPoint&)>& phi,
                                  const BootstrapConfig& cfg, int threads = 1);

}  // namespace faf
