#pragma once

#include <array>
#include <optional>
#include <vector>

#include "faf/core.hpp"
#include "faf/nuisance.hpp"

namespace faf {

// Per-observation material behind every support-function quantity: the loss
// 4-vector split into L0 and dL = L1 - L0, the first-stage predictions, and
// the group scaling. Immutable once built.
struct ScoreMaterial {
    std::vector<double> l0r, l0b, dlr, dlb;   // aligned to dataset order
    std::vector<double> dthr, dthb;           // delta-theta-hat per observation
    std::vector<std::uint8_t> is_r;
    GroupScale scale;

    std::size_t n() const { return l0r.size(); }
};

ScoreMaterial build_score_material(const Dataset& data, const LossSpec& loss,
                                   const CrossFitNuisance& cfn);
ScoreMaterial build_score_material(const Dataset& data, const LossSpec& loss,
                                   const std::vector<std::array<double, 2>>& delta_theta);

struct Hs {
    double h = 0.0;     // mean of the per-observation scores zeta_i
    RiskPoint s;        // mean of M L0 + M dL 1{k > 0}
};

// Pair evaluation against the cone function k(q) = q' M dtheta(X_i); the
// indicator is strict (k > 0, ties excluded).
class SupportFunctionEstimate {
  public:
    SupportFunctionEstimate() = default;
    explicit SupportFunctionEstimate(ScoreMaterial m);

    const ScoreMaterial& material() const { return m_; }
    std::size_t n() const { return m_.n(); }
    const GroupScale& scale() const { return m_.scale; }

    Hs eval(const Direction& q) const;
    double eval_h(const Direction& q) const { return eval(q).h; }
    RiskPoint eval_support_set(const Direction& q) const { return eval(q).s; }
    // Positively homogeneous extension to non-unit vectors: |w| h(w/|w|).
    double eval_h_vec(double w1, double w2) const;

    // Influence values zeta*_i(Mq) of the estimator at q.
    std::vector<double> eval_influence(const Direction& q) const;
    // Plug-in covariance kernel Omega(q, q~).
    double omega(const Direction& q, const Direction& qt) const;
    // Variance and the h value in one pass.
    std::array<double, 2> h_and_var(const Direction& q) const;

    // Cached evaluation over a grid.
    struct GridEval {
        DirectionGrid grid;
        std::vector<double> h;
        std::vector<RiskPoint> s;
    };
    GridEval eval_grid(const DirectionGrid& grid, int threads = 1) const;

    // Restricted value at the 45-degree line: minimizes c -> h(u1 - c(1,-1))
    // over [-c_bound, c_bound] on a 201-point bracket refined by golden
    // section. Unboundedness is a flagged result.
    struct EtildeResult {
        double value = 0.0;
        double c_star = 0.0;
        bool unbounded = false;
    };
    EtildeResult eval_h_Etilde(double c_bound = 50.0, double tol = 1e-8) const;

  private:
    ScoreMaterial m_;
};

// Support function of the improvement cone C(e*) for q in the admissible
// half S~1 = {q1 + q2 >= 0}; unbounded outside it.
double eval_h_C(const RiskPoint& e_star, double q1, double q2);
inline double eval_h_C(const RiskPoint& e_star, const Direction& q) {
    return eval_h_C(e_star, q.q1, q.q2);
}

// Bound C on attainable risks: sqrt(2) * max_g (1/mu_g) (1/n) sum_i
// max_d |l(d, Y_i)| 1{G_i = g}; equals sqrt(2) for classification loss.
double risk_bound_C(const Dataset& data, const LossSpec& loss);

// Sorted-by-angle acceleration for bootstrap evaluation: per draw the weighted
// prefix sums make every direction an O(log n) arc query. Observations with
// dtheta = 0 never pass the strict indicator and are kept out of the arc.
class AngularKernel {
  public:
    explicit AngularKernel(const ScoreMaterial& m);

    // Per-draw state under multiplier weights w (w may be null for unit
    // weights). Fills totals and prefix arrays; O(n).
    struct DrawState {
        double wbar = 1.0;
        double mu_r = 0.0, mu_b = 0.0;   // weighted group proportions
        double tot_l0r = 0.0, tot_l0b = 0.0;
        std::vector<double> pre_dlr, pre_dlb;  // prefix sums in angle order
        double sum_w = 0.0;
    };
    void prepare(const double* w, DrawState& st) const;

    // Weighted h(q) = (1/n) sum (w_i/wbar) zeta_i(Mq) with M from the
    // weighted proportions of the draw.
    double h(const DrawState& st, double q1, double q2) const;
    double h_vec(const DrawState& st, double w1, double w2) const;
    void h_grid(const DrawState& st, const DirectionGrid& grid, double* out) const;

    std::size_t n() const { return n_; }

  private:
    std::size_t n_ = 0;
    std::vector<std::uint32_t> order_;   // rows sorted by psi
    std::vector<double> psi_;            // sorted angles of (dthr, dthb)
    std::vector<double> dlr_sorted_, dlb_sorted_;
    std::vector<double> l0r_, l0b_;      // dataset order
    std::vector<std::uint8_t> is_r_;
    double arc_sum(const std::vector<double>& pre, double lo,
                   double hi) const;
};

}  // namespace faf
