#include "faf/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

namespace faf {

std::vector<std::size_t> FoldAssignment::fold_rows(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == k) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::complement_rows(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != k) out.push_back(i);
    return out;
}

FoldAssignment assign_folds(std::size_t n, std::size_t K, std::uint64_t seed) {
    if (K < 2 || K > n) throw input_error("fold count must satisfy 2 <= K <= n");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0xf01d));
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng() % i;
        std::swap(order[i - 1], order[j]);
    }
    FoldAssignment fa;
    fa.K = K;
    fa.seed = seed;
    fa.fold_of.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos)
        fa.fold_of[order[pos]] = static_cast<std::uint32_t>(pos % K);
    return fa;
}

std::string NuisanceLearner::describe() const {
    switch (method) {
        case LearnerMethod::multinomial_lasso:
            return "multinomial-lasso(path=" + std::to_string(path_size) +
                   ",cv=" + std::to_string(cv_folds) + ")";
        case LearnerMethod::oracle_dgp:
            return "oracle-dgp";
        case LearnerMethod::external:
            return "external";
    }
    return "?";
}

namespace {

// Effective labels dL^g per observation for the general-loss route.
std::vector<double> delta_loss_target(const Dataset& data, const LossSpec& loss, bool group_r) {
    std::vector<double> t(data.n(), 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (data.is_r(i) == group_r) t[i] = loss(1, data.y(i)) - loss(0, data.y(i));
    }
    return t;
}

bool outcomes_binary(const Dataset& data) {
    for (std::size_t i = 0; i < data.n(); ++i)
        if (data.y(i) != 0.0 && data.y(i) != 1.0) return false;
    return true;
}

}  // namespace

FittedNuisance fit_single_nuisance(const Dataset& data, const LossSpec& loss,
                                   const NuisanceLearner& learner, std::uint64_t seed) {
    FittedNuisance out;
    switch (learner.method) {
        case LearnerMethod::oracle_dgp: {
            if (!learner.oracle_fn) throw input_error("oracle learner without oracle function");
            auto fn = learner.oracle_fn;
            out.predict = [fn](const double* x) { return fn(x); };
            return out;
        }
        case LearnerMethod::external:
            throw input_error("external learner has no refittable model");
        case LearnerMethod::multinomial_lasso: {
            if (loss.mode == LossMode::classification && outcomes_binary(data)) {
                auto m = std::make_shared<detail::MultinomialLassoModel>(
                    detail::fit_multinomial_lasso(data, learner, seed));
                out.lambda = m->lambda;
                out.sweeps = m->sweeps;
                out.predict = [m](const double* x) { return m->delta_theta(x); };
                return out;
            }
            auto mr = std::make_shared<detail::GaussianLassoModel>(detail::fit_gaussian_lasso(
                data, delta_loss_target(data, loss, true), learner, derive_seed(seed, 1)));
            auto mb = std::make_shared<detail::GaussianLassoModel>(detail::fit_gaussian_lasso(
                data, delta_loss_target(data, loss, false), learner, derive_seed(seed, 2)));
            out.lambda = mr->lambda;
            out.predict = [mr, mb](const double* x) {
                return std::array<double, 2>{mr->predict(x), mb->predict(x)};
            };
            return out;
        }
    }
    throw input_error("unknown learner method");
}

CrossFitNuisance fit_cross_fit(const Dataset& data, const LossSpec& loss,
                               const FoldAssignment& folds, const NuisanceLearner& learner,
                               int threads) {
    if (folds.fold_of.size() != data.n()) throw input_error("fold assignment size mismatch");
    CrossFitNuisance cfn;
    cfn.folds_ = folds;
    cfn.pred_.assign(data.n(), {0.0, 0.0});

    if (learner.method == LearnerMethod::external) {
        if (learner.external.size() != data.n())
            throw input_error("external predictions not aligned to dataset rows");
        for (std::size_t i = 0; i < data.n(); ++i) {
            const auto& p = learner.external[i];
            if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
                throw input_error("non-finite external prediction at row " + std::to_string(i));
            if (loss.mode == LossMode::classification &&
                (std::abs(p[0]) > 1.0 + 1e-9 || std::abs(p[1]) > 1.0 + 1e-9))
                throw input_error("external prediction outside [-1,1] at row " + std::to_string(i));
            cfn.pred_[i] = p;
        }
        return cfn;
    }

    cfn.models_.resize(folds.K);
    std::vector<std::string> errors(folds.K);
    parallel_for(folds.K, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            try {
                Dataset train = data.subset(folds.complement_rows(k));
                cfn.models_[k] =
                    fit_single_nuisance(train, loss, learner, derive_seed(folds.seed, 100 + k));
            } catch (const std::exception& e) {
                errors[k] = std::string("fold ") + std::to_string(k) + ": " + e.what();
            }
        }
    }, 1);
    for (const auto& e : errors)
        if (!e.empty()) throw numeric_error("cross-fit failed: " + e);

    const bool clf = loss.mode == LossMode::classification;
    for (std::size_t i = 0; i < data.n(); ++i) {
        auto p = cfn.models_[folds.fold_of[i]].predict(data.x_row(i));
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
            throw numeric_error("non-finite nuisance prediction at row " + std::to_string(i));
        if (clf && (std::abs(p[0]) > 1.0 + 1e-9 || std::abs(p[1]) > 1.0 + 1e-9))
            throw numeric_error("nuisance prediction outside [-1,1] at row " + std::to_string(i));
        cfn.pred_[i] = p;
    }
    return cfn;
}

std::array<double, 2> CrossFitNuisance::predict_fold(std::size_t k, const double* x) const {
    if (k >= models_.size()) throw input_error("no model for fold " + std::to_string(k));
    return models_[k].predict(x);
}

Dataset jitter_covariate(const Dataset& data, std::size_t col, double scale, std::uint64_t seed) {
    if (col >= data.d_x()) throw input_error("jitter column out of range");
    if (!(scale > 0.0)) throw input_error("jitter scale must be positive");
    std::vector<double> x = data.x_flat();
    std::mt19937_64 rng(derive_seed(seed, 0x71e7));
    std::uniform_real_distribution<double> u(-scale, scale);
    for (std::size_t i = 0; i < data.n(); ++i) x[i * data.d_x() + col] += u(rng);
    return Dataset(data.y_col(), data.g_col(), std::move(x), data.d_x(), data.labels());
}

}  // namespace faf
