#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "faf/core.hpp"

namespace faf {

// K-fold partition; a deterministic function of (n, K, seed) with fold sizes
// differing by at most one.
struct FoldAssignment {
    std::size_t K = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> fold_of;  // per observation

    std::vector<std::size_t> fold_rows(std::size_t k) const;
    std::vector<std::size_t> complement_rows(std::size_t k) const;
};

FoldAssignment assign_folds(std::size_t n, std::size_t K, std::uint64_t seed);

enum class LearnerMethod { multinomial_lasso, oracle_dgp, external };

// First-stage learner configuration. The built-in is a 4-class multinomial
// logistic lasso (classes = group x outcome) fit by cyclic coordinate descent
// on a quadratic majorization, with the penalty chosen by cross-validation
// nested inside the training folds; general losses fall back to per-group
// L1-penalized least squares on the effective label dL^g.
struct NuisanceLearner {
    LearnerMethod method = LearnerMethod::multinomial_lasso;

    std::size_t path_size = 50;
    double lambda_min_ratio = 1e-3;
    double tol = 1e-7;              // max coefficient change per sweep
    std::size_t max_sweeps = 10000;
    std::size_t cv_folds = 5;
    std::optional<double> lambda_override;  // skips cross-validation

    // oracle_dgp: closed-form delta-theta at x.
    std::function<std::array<double, 2>(const double*)> oracle_fn;
    // external: precomputed out-of-fold predictions aligned to dataset rows.
    std::vector<std::array<double, 2>> external;

    std::string describe() const;

    static NuisanceLearner lasso() { return NuisanceLearner{}; }
    static NuisanceLearner oracle(std::function<std::array<double, 2>(const double*)> fn) {
        NuisanceLearner l;
        l.method = LearnerMethod::oracle_dgp;
        l.oracle_fn = std::move(fn);
        return l;
    }
};

// One fitted first-stage model; predicts (dtheta_r, dtheta_b) at a covariate
// row. Produced per fold by cross-fitting and once per training sample for
// policy construction.
struct FittedNuisance {
    std::function<std::array<double, 2>(const double*)> predict;
    double lambda = 0.0;
    std::size_t sweeps = 0;
};

FittedNuisance fit_single_nuisance(const Dataset& data, const LossSpec& loss,
                                   const NuisanceLearner& learner, std::uint64_t seed);

// Cross-fitted nuisance: observation i's prediction comes from the model of
// its own fold, trained on the complement.
class CrossFitNuisance {
  public:
    std::size_t n() const { return pred_.size(); }
    std::size_t K() const { return folds_.K; }
    const FoldAssignment& folds() const { return folds_; }
    const std::array<double, 2>& prediction(std::size_t i) const { return pred_[i]; }
    const std::vector<std::array<double, 2>>& predictions() const { return pred_; }
    // Model trained on the complement of fold k; absent in external mode.
    std::array<double, 2> predict_fold(std::size_t k, const double* x) const;
    bool has_models() const { return !models_.empty(); }

    friend CrossFitNuisance fit_cross_fit(const Dataset&, const LossSpec&,
                                          const FoldAssignment&, const NuisanceLearner&, int);

  private:
    FoldAssignment folds_;
    std::vector<std::array<double, 2>> pred_;
    std::vector<FittedNuisance> models_;
};

CrossFitNuisance fit_cross_fit(const Dataset& data, const LossSpec& loss,
                               const FoldAssignment& folds, const NuisanceLearner& learner,
                               int threads = 1);

inline std::array<double, 2> predict_delta_theta(const CrossFitNuisance& cfn, std::size_t i) {
    return cfn.prediction(i);
}

// Adds iid Uniform(-scale, scale) noise to one covariate column.
Dataset jitter_covariate(const Dataset& data, std::size_t col, double scale, std::uint64_t seed);

namespace detail {

// Multinomial logistic lasso over the present (group x outcome) classes.
// Exposed for unit tests of the optimizer itself.
struct MultinomialLassoModel {
    std::vector<double> mean, sd;       // standardization of the d covariates
    std::vector<int> classes;           // compact -> class id (0..3)
    std::vector<double> b0;             // per compact class
    std::vector<double> beta;           // compact class x d, standardized scale
    double lambda = 0.0;
    std::size_t sweeps = 0;

    // Probabilities over the 4 canonical classes (absent classes get 0).
    std::array<double, 4> probs(const double* x) const;
    std::array<double, 2> delta_theta(const double* x) const;
};

// class id: 0 = (r, y=1), 1 = (r, y=0), 2 = (b, y=1), 3 = (b, y=0)
int class_id(bool is_r, double y);

MultinomialLassoModel fit_multinomial_lasso(const Dataset& data,
                                            const NuisanceLearner& cfg,
                                            std::uint64_t seed);

// L1-penalized least squares; the first-stage route for general losses.
struct GaussianLassoModel {
    std::vector<double> mean, sd;
    double b0 = 0.0;
    std::vector<double> beta;
    double lambda = 0.0;

    double predict(const double* x) const;
};

GaussianLassoModel fit_gaussian_lasso(const Dataset& data, const std::vector<double>& target,
                                      const NuisanceLearner& cfg, std::uint64_t seed);

}  // namespace detail

}  // namespace faf
