#include "faf/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace faf {

SplitPlan make_split(std::size_t n, double train_ratio, std::uint64_t seed) {
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw input_error("split ratio in (0,1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x5b117));
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng() % i;
        std::swap(order[i - 1], order[j]);
    }
    SplitPlan plan;
    plan.ratio = train_ratio;
    plan.seed = seed;
    std::size_t n_train = static_cast<std::size_t>(std::round(train_ratio * n));
    n_train = std::min(std::max<std::size_t>(n_train, 2), n - 2);
    plan.train.assign(order.begin(), order.begin() + n_train);
    plan.eval.assign(order.begin() + n_train, order.end());
    std::sort(plan.train.begin(), plan.train.end());
    std::sort(plan.eval.begin(), plan.eval.end());
    return plan;
}

ThresholdPolicy build_policy(const Dataset& train, const LossSpec& loss,
                             const NuisanceLearner& learner, const Direction& q,
                             std::optional<double> capacity, std::uint64_t seed) {
    if (capacity && !(*capacity > 0.0 && *capacity <= 1.0))
        throw input_error("capacity must lie in (0,1]");
    ThresholdPolicy p;
    p.scale = group_proportions(train);  // throws on a degenerate training group
    p.nuisance = fit_single_nuisance(train, loss, learner, seed);
    p.q = q;
    p.capacity = capacity;
    p.tau = 0.0;
    if (capacity) {
        std::vector<double> k(train.n());
        for (std::size_t i = 0; i < train.n(); ++i) {
            auto dth = p.nuisance.predict(train.x_row(i));
            k[i] = q.q1 * dth[0] * p.scale.inv_r() + q.q2 * dth[1] * p.scale.inv_b();
        }
        std::sort(k.begin(), k.end());
        // right-continuous empirical quantile at 1 - abar
        double pr = 1.0 - *capacity;
        std::size_t idx = static_cast<std::size_t>(
            std::ceil(pr * static_cast<double>(train.n())));
        idx = std::min(std::max<std::size_t>(idx, 1), train.n());
        p.tau = std::max(0.0, k[idx - 1]);
    }
    return p;
}

RiskPoint evaluate_policy(const ThresholdPolicy& policy, const Dataset& eval_data,
                          const LossSpec& loss) {
    double acc_r = 0.0, acc_b = 0.0;
    std::size_t n_r = 0, n_b = 0;
    for (std::size_t i = 0; i < eval_data.n(); ++i) {
        double l0 = loss(0, eval_data.y(i));
        double l1 = loss(1, eval_data.y(i));
        double v = policy.decide(eval_data.x_row(i)) ? l1 : l0;
        if (eval_data.is_r(i)) {
            acc_r += v;
            ++n_r;
        } else {
            acc_b += v;
            ++n_b;
        }
    }
    if (n_r == 0 || n_b == 0) throw input_error("group absent in evaluation sample");
    return {acc_r / static_cast<double>(n_r), acc_b / static_cast<double>(n_b)};
}

double treated_fraction(const ThresholdPolicy& policy, const Dataset& data) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < data.n(); ++i) c += policy.decide(data.x_row(i)) ? 1 : 0;
    return static_cast<double>(c) / static_cast<double>(data.n());
}

LdaPolicyResult lda_policy(const Dataset& train, const Dataset& eval_data, const LossSpec& loss,
                           const NuisanceLearner& learner, const RiskPoint& e_star,
                           double kappa_n, std::uint64_t seed, std::size_t grid_circle,
                           std::size_t e_grid, int threads) {
    if (!std::isfinite(e_star.er) || !std::isfinite(e_star.eb))
        throw input_error("e_star must be finite");
    // cross-fit on the training half for the frontier estimate
    FoldAssignment folds = assign_folds(train.n(), 5, derive_seed(seed, 3));
    CrossFitNuisance cfn = fit_cross_fit(train, loss, folds, learner, threads);
    SupportFunctionEstimate sfe(build_score_material(train, loss, cfn));
    auto circle = sfe.eval_grid(make_full_circle_grid(grid_circle), threads);

    FrontierConfig fc;
    fc.kappa_n = kappa_n;
    fc.grid_per_axis = e_grid;
    fc.cone_at = e_star;
    FrontierEstimate fhat = estimate_frontier(sfe, circle, fc, threads);
    if (fhat.empty())
        throw empty_result("no estimated region preferred to the status quo");

    LdaPolicyResult out;
    out.region_size = fhat.points.size();
    out.target = select_frontier_point(fhat, risk_bound_C(train, loss));
    out.q_star = q_star_hat(sfe, circle, out.target);

    // On flat boundary stretches the argmax direction of a slack-region
    // target is noisy and its support point can slide out of the improvement
    // cone. Verify the recovered direction's own support point; if it leaves
    // the cone beyond the retention slack, fall back to the grid direction
    // whose support point is nearest the target.
    auto in_cone = [&](const RiskPoint& p, double tol) {
        return p.er <= e_star.er + tol && p.eb <= e_star.eb + tol &&
               std::abs(p.er - p.eb) <= std::abs(e_star.er - e_star.eb) + tol;
    };
    RiskPoint dual = sfe.eval_support_set(out.q_star);
    if (!in_cone(dual, fhat.slack)) {
        double best = 1e300;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < circle.grid.size(); ++j) {
            double dcur = sqr(circle.s[j].er - out.target.er) +
                          sqr(circle.s[j].eb - out.target.eb);
            if (dcur < best) {
                best = dcur;
                best_j = j;
            }
        }
        out.q_star = circle.grid[best_j];
    }

    out.policy = build_policy(train, loss, learner, out.q_star, std::nullopt,
                              derive_seed(seed, 4));
    out.risks = evaluate_policy(out.policy, eval_data, loss);
    return out;
}

}  // namespace faf
