#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "faf/core.hpp"
#include "faf/geometry.hpp"
#include "faf/nuisance.hpp"
#include "faf/supportfn.hpp"

namespace faf {

// Threshold rule decision(x) = 1{k(dtheta(x), Mq) > tau}; tau = 0 without a
// capacity constraint, otherwise the right-continuous empirical
// (1 - abar)-quantile of k over the training covariates floored at 0.
struct ThresholdPolicy {
    FittedNuisance nuisance;
    GroupScale scale;    // from the training data
    Direction q;
    double tau = 0.0;
    std::optional<double> capacity;

    double k_value(const double* x) const {
        auto dth = nuisance.predict(x);
        return q.q1 * dth[0] * scale.inv_r() + q.q2 * dth[1] * scale.inv_b();
    }
    bool decide(const double* x) const { return k_value(x) > tau; }
};

struct SplitPlan {
    std::vector<std::size_t> train, eval;
    double ratio = 0.5;
    std::uint64_t seed = 0;
};

SplitPlan make_split(std::size_t n, double train_ratio, std::uint64_t seed);

ThresholdPolicy build_policy(const Dataset& train, const LossSpec& loss,
                             const NuisanceLearner& learner, const Direction& q,
                             std::optional<double> capacity, std::uint64_t seed);

RiskPoint evaluate_policy(const ThresholdPolicy& policy, const Dataset& eval_data,
                          const LossSpec& loss);

double treated_fraction(const ThresholdPolicy& policy, const Dataset& data);

struct LdaPolicyResult {
    ThresholdPolicy policy;
    RiskPoint risks;          // evaluated on the held-out half
    RiskPoint target;         // selected frontier point on the training half
    Direction q_star;
    std::size_t region_size = 0;
};

// Builds a policy attaining the estimated frontier region preferred to
// e_star: restricts the frontier criterion by the improvement-cone check,
// selects a point, recovers its direction, and evaluates out of sample.
LdaPolicyResult lda_policy(const Dataset& train, const Dataset& eval_data, const LossSpec& loss,
                           const NuisanceLearner& learner, const RiskPoint& e_star,
                           double kappa_n, std::uint64_t seed, std::size_t grid_circle = 1000,
                           std::size_t e_grid = 400, int threads = 1);

}  // namespace faf
