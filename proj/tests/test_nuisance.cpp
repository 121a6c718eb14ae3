#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "faf/nuisance.hpp"
#include "faf/simulate.hpp"

using namespace faf;

TEST_CASE("fold assignment sizes and determinism") {
    auto f = assign_folds(4, 2, 9);
    std::map<std::uint32_t, int> sizes;
    for (auto k : f.fold_of) sizes[k]++;
    CHECK(sizes[0] == 2);
    CHECK(sizes[1] == 2);

    auto f5 = assign_folds(5, 2, 9);
    std::vector<int> s5(2, 0);
    for (auto k : f5.fold_of) s5[k]++;
    std::sort(s5.begin(), s5.end());
    CHECK(s5[0] == 2);
    CHECK(s5[1] == 3);

    auto big = assign_folds(10000, 5, 123);
    std::vector<int> sb(5, 0);
    for (auto k : big.fold_of) sb[k]++;
    for (int c : sb) CHECK(c == 2000);

    auto again = assign_folds(10000, 5, 123);
    CHECK(again.fold_of == big.fold_of);
    auto other = assign_folds(10000, 5, 124);
    CHECK(other.fold_of != big.fold_of);

    CHECK_THROWS_AS(assign_folds(3, 4, 1), input_error);
}

namespace {

Dataset small_classification(std::size_t n, std::uint64_t seed, std::size_t d = 3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud;
    std::vector<double> y(n), x(n * d);
    std::vector<std::uint8_t> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) x[i * d + j] = nd(rng);
        g[i] = ud(rng) < 0.5 ? 0 : 1;
        double p = 1.0 / (1.0 + std::exp(-(x[i * d] - 0.5 * x[i * d + 1])));
        y[i] = ud(rng) < p ? 1.0 : 0.0;
    }
    return Dataset(std::move(y), std::move(g), std::move(x), d);
}

}  // namespace

TEST_CASE("degenerate outcome: predictions collapse to -p(G=g|X)") {
    // Y identically 1: only the (g, y=1) classes carry mass, so
    // dtheta^g = -p(G=g | X) and both coordinates are nonpositive.
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::size_t n = 300;
    std::vector<double> y(n, 1.0), x(n);
    std::vector<std::uint8_t> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = nd(rng);
        g[i] = i % 2;
    }
    Dataset d(std::move(y), std::move(g), std::move(x), 1);
    NuisanceLearner l = NuisanceLearner::lasso();
    l.path_size = 10;
    auto folds = assign_folds(d.n(), 2, 3);
    auto cfn = fit_cross_fit(d, LossSpec::classification(), folds, l);
    for (std::size_t i = 0; i < d.n(); ++i) {
        auto p = cfn.prediction(i);
        CHECK(p[0] <= 1e-12);
        CHECK(p[1] <= 1e-12);
        CHECK(p[0] + p[1] == doctest::Approx(-1.0).epsilon(1e-9));
    }
}

TEST_CASE("multinomial class probabilities sum to one") {
    Dataset d = small_classification(400, 11);
    NuisanceLearner cfg = NuisanceLearner::lasso();
    cfg.path_size = 12;
    auto m = detail::fit_multinomial_lasso(d, cfg, 17);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 200; ++t) {
        double xs[3] = {nd(rng), nd(rng), nd(rng)};
        auto p = m.probs(xs);
        double tot = p[0] + p[1] + p[2] + p[3];
        CHECK(std::abs(tot - 1.0) <= 1e-10);
        auto dth = m.delta_theta(xs);
        CHECK(std::abs(dth[0]) <= 1.0);
        CHECK(std::abs(dth[1]) <= 1.0);
    }
}

TEST_CASE("infinite penalty keeps only intercepts and marginal frequencies") {
    Dataset d = small_classification(500, 23);
    NuisanceLearner cfg = NuisanceLearner::lasso();
    cfg.lambda_override = 1e6;
    auto m = detail::fit_multinomial_lasso(d, cfg, 17);
    for (double b : m.beta) CHECK(b == 0.0);
    std::array<double, 4> freq{0, 0, 0, 0};
    for (std::size_t i = 0; i < d.n(); ++i)
        freq[detail::class_id(d.is_r(i), d.y(i))] += 1.0 / d.n();
    double xs[3] = {0.3, -1.0, 2.0};
    auto p = m.probs(xs);
    for (int c = 0; c < 4; ++c) CHECK(p[c] == doctest::Approx(freq[c]).epsilon(1e-6));
}

TEST_CASE("out-of-fold discipline: tampering with a fold leaves its predictions unchanged") {
    Dataset d = small_classification(240, 31);
    NuisanceLearner cfg = NuisanceLearner::lasso();
    cfg.path_size = 8;
    auto folds = assign_folds(d.n(), 3, 77);
    auto cfn = fit_cross_fit(d, LossSpec::classification(), folds, cfg);

    // permute the rows of fold 0 among themselves (y, g and x together)
    auto rows = folds.fold_rows(0);
    std::vector<double> y = d.y_col();
    std::vector<std::uint8_t> g = d.g_col();
    std::vector<double> x = d.x_flat();
    std::mt19937_64 rng(99);
    auto perm = rows;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
    std::vector<double> y2 = y;
    std::vector<std::uint8_t> g2 = g;
    std::vector<double> x2 = x;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        y2[rows[t]] = y[perm[t]];
        g2[rows[t]] = g[perm[t]];
        for (std::size_t j = 0; j < d.d_x(); ++j)
            x2[rows[t] * d.d_x() + j] = x[perm[t] * d.d_x() + j];
    }
    Dataset d2(std::move(y2), std::move(g2), std::move(x2), d.d_x());
    auto cfn2 = fit_cross_fit(d2, LossSpec::classification(), folds, cfg);

    // fold 0's model trains on the untouched complement: predictions at the
    // original covariates agree exactly
    for (std::size_t i : rows) {
        auto a = cfn.predict_fold(0, d.x_row(i));
        auto b = cfn2.predict_fold(0, d.x_row(i));
        CHECK(a[0] == b[0]);
        CHECK(a[1] == b[1]);
    }
}

TEST_CASE("constant covariates give constant predictions") {
    std::size_t n = 120;
    std::vector<double> y(n), x(n, 1.0);
    std::vector<std::uint8_t> g(n);
    std::mt19937_64 rng(4);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = (rng() % 2) ? 1.0 : 0.0;
        g[i] = (rng() % 2) ? 1 : 0;
    }
    Dataset d(std::move(y), std::move(g), std::move(x), 1);
    auto folds = assign_folds(n, 2, 5);
    NuisanceLearner cfg = NuisanceLearner::lasso();
    cfg.path_size = 5;
    auto cfn = fit_cross_fit(d, LossSpec::classification(), folds, cfg);
    for (std::size_t k = 0; k < 2; ++k) {
        auto rows = folds.fold_rows(k);
        for (std::size_t i : rows) {
            CHECK(cfn.prediction(i)[0] == doctest::Approx(cfn.prediction(rows[0])[0]));
            CHECK(cfn.prediction(i)[1] == doctest::Approx(cfn.prediction(rows[0])[1]));
        }
    }
}

TEST_CASE("oracle learner matches binned conditional means of the balanced design") {
    DgpSpec dgp = DgpSpec::balanced();
    Dataset d = generate(dgp, 400000, 808);
    // bin the group-r index and compare E[dL^r | bin] with the closed form
    std::map<int, std::pair<double, int>> bins;  // sum of dL^r, count
    std::map<int, double> index_sum;
    for (std::size_t i = 0; i < d.n(); ++i) {
        double idx = d.x(i, 0) + d.x(i, 1) + 0.5 * d.x(i, 2);
        int bin = static_cast<int>(std::floor(idx * 4.0));
        if (bin < -6 || bin > 6) continue;
        double dlr = d.is_r(i) ? (1.0 - 2.0 * d.y(i)) : 0.0;
        bins[bin].first += dlr;
        bins[bin].second += 1;
        index_sum[bin] += idx;
    }
    for (const auto& [bin, acc] : bins) {
        if (acc.second < 5000) continue;
        double mean_idx = index_sum[bin] / acc.second;
        double expect = 0.6 * (1.0 - 2.0 / (1.0 + std::exp(-mean_idx)));
        double got = acc.first / acc.second;
        CHECK(std::abs(got - expect) < 0.03);
        // the closed-form learner itself
        double x[20] = {0};
        x[0] = mean_idx;
        CHECK(dgp.delta_theta(x)[0] ==
              doctest::Approx(0.6 * (1.0 - 2.0 / (1.0 + std::exp(-mean_idx)))));
    }
}

TEST_CASE("external learner reads aligned predictions and validates range") {
    Dataset d = small_classification(50, 3);
    NuisanceLearner ext;
    ext.method = LearnerMethod::external;
    ext.external.assign(50, {0.25, -0.5});
    auto folds = assign_folds(50, 5, 1);
    auto cfn = fit_cross_fit(d, LossSpec::classification(), folds, ext);
    CHECK(cfn.prediction(31)[0] == 0.25);
    CHECK_FALSE(cfn.has_models());

    ext.external[7] = {1.5, 0.0};  // outside [-1, 1] in classification mode
    CHECK_THROWS_AS(fit_cross_fit(d, LossSpec::classification(), folds, ext), input_error);
    ext.external.resize(49);
    CHECK_THROWS_AS(fit_cross_fit(d, LossSpec::classification(), folds, ext), input_error);
}

TEST_CASE("general losses use the least-squares route") {
    Dataset d = small_classification(300, 41);
    LossSpec quad;
    quad.mode = LossMode::custom_bounded;
    quad.custom = [](int dd, double y) { return (dd - y) * (dd - y) * 1.5; };
    NuisanceLearner cfg = NuisanceLearner::lasso();
    cfg.path_size = 8;
    auto folds = assign_folds(d.n(), 2, 6);
    auto cfn = fit_cross_fit(d, quad, folds, cfg);
    for (std::size_t i = 0; i < d.n(); ++i) {
        CHECK(std::isfinite(cfn.prediction(i)[0]));
        CHECK(std::isfinite(cfn.prediction(i)[1]));
    }
}

TEST_CASE("jitter adds bounded noise to one column only") {
    Dataset d = small_classification(500, 51);
    std::vector<double> col0(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) col0[i] = d.x(i, 0);

    auto j = jitter_covariate(d, 1, 0.01, 7);
    for (std::size_t i = 0; i < d.n(); ++i) {
        CHECK(j.x(i, 0) == col0[i]);
        CHECK(std::abs(j.x(i, 1) - d.x(i, 1)) <= 0.01);
        CHECK(j.y(i) == d.y(i));
    }
    auto j2 = jitter_covariate(d, 1, 0.01, 7);
    CHECK(j.x_flat() == j2.x_flat());  // bit-identical under the same seed

    // support widens by about 2 * scale
    Dataset binary({1, 0, 1, 0}, {0, 1, 0, 1}, {0, 1, 0, 1}, 1);
    auto jb = jitter_covariate(binary, 0, 0.25, 11);
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < jb.n(); ++i) {
        lo = std::min(lo, jb.x(i, 0));
        hi = std::max(hi, jb.x(i, 0));
    }
    CHECK(hi - lo > 1.0);
    CHECK(hi - lo <= 1.5);

    CHECK_THROWS_AS(jitter_covariate(d, 99, 0.1, 1), input_error);
    CHECK_THROWS_AS(jitter_covariate(d, 0, -0.1, 1), input_error);
}
