#include <cmath>
#include <random>

#include "doctest.h"
#include "faf/simulate.hpp"
#include "faf/supportfn.hpp"

using namespace faf;

namespace {

// random classification material with continuous predictions
SupportFunctionEstimate random_sfe(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud;
    std::vector<double> y(n), x(n);
    std::vector<std::uint8_t> g(n);
    std::vector<std::array<double, 2>> dth(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = ud(rng) < 0.5 ? 1.0 : 0.0;
        g[i] = i < 2 ? static_cast<std::uint8_t>(i) : (ud(rng) < 0.5 ? 0 : 1);
        x[i] = nd(rng);
        dth[i] = {std::tanh(nd(rng)), std::tanh(nd(rng))};
    }
    Dataset d(std::move(y), std::move(g), std::move(x), 1);
    return SupportFunctionEstimate(build_score_material(d, LossSpec::classification(), dth));
}

}  // namespace

TEST_CASE("cone function is bilinear") {
    // k(q) = q' M dtheta with M = diag(2, 2)
    Dataset d({1.0, 0.0}, {0, 1}, {0.0, 0.0}, 1);
    std::vector<std::array<double, 2>> dth = {{0.5, -0.3}, {0.5, -0.3}};
    SupportFunctionEstimate sfe(build_score_material(d, LossSpec::classification(), dth));
    const auto& m = sfe.material();
    auto k_at = [&](const Direction& q, std::size_t i) {
        return q.q1 * m.dthr[i] * m.scale.inv_r() + q.q2 * m.dthb[i] * m.scale.inv_b();
    };
    CHECK(k_at(Direction(1, 0), 0) == doctest::Approx(1.0));
    CHECK(k_at(Direction(0, 1), 0) == doctest::Approx(-0.6));
    CHECK(k_at(Direction(-1, 0), 0) == doctest::Approx(-1.0));
}

TEST_CASE("two-observation hand example") {
    Dataset d({1.0, 1.0}, {0, 1}, {0.0, 0.0}, 1);
    std::vector<std::array<double, 2>> dth = {{1.0, 1.0}, {1.0, 1.0}};
    SupportFunctionEstimate sfe(build_score_material(d, LossSpec::classification(), dth));
    auto neg = sfe.eval(Direction(-1, 0));
    CHECK(neg.h == doctest::Approx(-1.0));
    CHECK(neg.s.er == doctest::Approx(1.0));
    CHECK(neg.s.eb == doctest::Approx(1.0));
    auto pos = sfe.eval(Direction(1, 0));
    CHECK(pos.h == doctest::Approx(0.0));
}

TEST_CASE("h equals q's against the support set everywhere") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ud(0.0, 2.0 * kPi);
    for (int rep = 0; rep < 60; ++rep) {
        auto sfe = random_sfe(40 + (rep % 11), 1000 + rep);
        for (int t = 0; t < 25; ++t) {
            Direction q = Direction::from_angle(ud(rng));
            auto hs = sfe.eval(q);
            CHECK(std::abs(hs.h - (q.q1 * hs.s.er + q.q2 * hs.s.eb)) <= 1e-12);
        }
    }
}

TEST_CASE("positive homogeneity of the extended evaluation") {
    std::mt19937_64 rng(78);
    std::uniform_real_distribution<double> ud(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> ut(0.1, 9.0);
    auto sfe = random_sfe(200, 5);
    for (int t = 0; t < 200; ++t) {
        double a = ud(rng), scale = ut(rng);
        double w1 = std::cos(a), w2 = std::sin(a);
        double h1 = sfe.eval_h_vec(w1, w2);
        double ht = sfe.eval_h_vec(scale * w1, scale * w2);
        CHECK(ht == doctest::Approx(scale * h1).epsilon(1e-12));
    }
}

TEST_CASE("influence values: mean identity and degenerate cases") {
    auto sfe = random_sfe(500, 9);
    Direction q = Direction::unit(0.3, -1.1);
    auto infl = sfe.eval_influence(q);
    double mean = 0.0;
    for (double v : infl) mean += v;
    mean /= infl.size();
    // mean of zeta* = h + (mean M*_i q)' M^{-1} s, which collapses to h - q's
    auto hs = sfe.eval(q);
    double expect = hs.h - (q.q1 * hs.s.er + q.q2 * hs.s.eb);
    CHECK(mean == doctest::Approx(expect).epsilon(1e-10));

    // L0 = L1 = 0 makes every influence value vanish
    Dataset d({1.0, 0.0}, {0, 1}, {0.0, 0.0}, 1);
    LossSpec zero;
    zero.mode = LossMode::custom_bounded;
    zero.custom = [](int, double) { return 0.0; };
    std::vector<std::array<double, 2>> dth = {{0.4, 0.2}, {-0.1, 0.6}};
    SupportFunctionEstimate z(build_score_material(d, zero, dth));
    for (double v : z.eval_influence(Direction(0, 1))) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("covariance kernel symmetry and positive semidefiniteness") {
    auto sfe = random_sfe(300, 13);
    auto grid = make_full_circle_grid(24);
    std::vector<double> omega(grid.size() * grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < grid.size(); ++j)
            omega[i * grid.size() + j] = sfe.omega(grid[i], grid[j]);
    double scale = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        scale = std::max(scale, omega[i * grid.size() + i]);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(omega[i * grid.size() + i] >= 0.0);
        for (std::size_t j = 0; j < grid.size(); ++j)
            CHECK(omega[i * grid.size() + j] == omega[j * grid.size() + i]);
    }
    // Cholesky of Omega + 1e-8 * scale * I must succeed
    const std::size_t m = grid.size();
    std::vector<double> L(omega);
    for (std::size_t i = 0; i < m; ++i) L[i * m + i] += 1e-8 * std::max(scale, 1.0);
    bool ok = true;
    for (std::size_t j = 0; j < m && ok; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double s = L[j * m + k];
            for (std::size_t t = 0; t < k; ++t) s -= L[j * m + t] * L[k * m + t];
            L[j * m + k] = s / L[k * m + k];
        }
        double s = L[j * m + j];
        for (std::size_t t = 0; t < j; ++t) s -= L[j * m + t] * L[j * m + t];
        if (s <= 0.0) ok = false;
        else L[j * m + j] = std::sqrt(s);
    }
    CHECK(ok);
}

TEST_CASE("variance positive on simulated data") {
    DgpSpec dgp = DgpSpec::balanced();
    Dataset d = generate(dgp, 2000, 515);
    std::vector<std::array<double, 2>> dth(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) dth[i] = dgp.delta_theta(d.x_row(i));
    SupportFunctionEstimate sfe(build_score_material(d, LossSpec::classification(), dth));
    for (const auto& q : make_full_circle_grid(64).directions)
        CHECK(sfe.h_and_var(q)[1] > 0.0);
}

TEST_CASE("improvement-cone support function") {
    RiskPoint e{0.3, 0.5};
    CHECK(eval_h_C(e, 0.0, 1.0) == doctest::Approx(0.5));
    CHECK(eval_h_C(e, 1.0, 0.0) == doctest::Approx(0.3));
    RiskPoint on_line{0.4, 0.4};
    for (double a : {-0.25 * kPi + 0.01, 0.0, 0.4, 0.75 * kPi - 0.01}) {
        Direction q = Direction::from_angle(a);
        CHECK(eval_h_C(on_line, q.q1, q.q2) ==
              doctest::Approx(q.q1 * 0.4 + q.q2 * 0.4).epsilon(1e-12));
    }
    CHECK_THROWS_WITH_AS(eval_h_C(e, -1.0, 0.0), doctest::Contains("unbounded"), input_error);
}

TEST_CASE("monotone loss shift moves only the shifted group's support set") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud;
    std::size_t n = 400;
    std::vector<double> y(n), x(n);
    std::vector<std::uint8_t> g(n);
    std::vector<std::array<double, 2>> dth(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = ud(rng) < 0.5 ? 1 : 0;
        g[i] = ud(rng) < 0.5 ? 0 : 1;
        x[i] = nd(rng);
        dth[i] = {std::tanh(nd(rng)), std::tanh(nd(rng))};
    }
    Dataset d(y, g, x, 1);
    SupportFunctionEstimate base(build_score_material(d, LossSpec::classification(), dth));

    const double c = 0.37;
    LossSpec shifted;  // adds c to both decisions' loss; applied to group r only
    shifted.mode = LossMode::custom_bounded;
    shifted.custom = [](int dd, double yy) { return (static_cast<double>(dd) != yy) ? 1.0 : 0.0; };
    // emulate the group-restricted shift through the material directly
    ScoreMaterial m = build_score_material(d, shifted, dth);
    for (std::size_t i = 0; i < n; ++i) {
        if (g[i] == 0) {
            m.l0r[i] += c;  // both L0 and L1 shift; dL unchanged
        }
    }
    SupportFunctionEstimate moved((ScoreMaterial(m)));
    for (const auto& q : make_full_circle_grid(32).directions) {
        auto a = base.eval(q);
        auto b = moved.eval(q);
        CHECK(b.s.er == doctest::Approx(a.s.er + c).epsilon(1e-10));
        CHECK(b.s.eb == doctest::Approx(a.s.eb).epsilon(1e-12));
    }
}

TEST_CASE("45-degree profile: symmetric, consistent value, and unbounded flag") {
    // build a sample that is exactly invariant under swapping the two group
    // roles: every draw is added twice, once as an r row and once as the
    // mirrored b row. The estimated set is then symmetric about the
    // 45-degree line and the profile minimum sits at c = 0.
    std::size_t half = 1000;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ud;
    std::normal_distribution<double> nd;
    std::vector<double> y, x;
    std::vector<std::uint8_t> g;
    std::vector<std::array<double, 2>> dth;
    for (std::size_t i = 0; i < half; ++i) {
        double yy = ud(rng) < 0.5 ? 1.0 : 0.0;
        double a = std::tanh(nd(rng)), b = std::tanh(nd(rng));
        y.push_back(yy);
        g.push_back(0);
        x.push_back(0.0);
        dth.push_back({a, b});
        y.push_back(yy);
        g.push_back(1);
        x.push_back(0.0);
        dth.push_back({b, a});
    }
    Dataset d(y, g, x, 1);
    SupportFunctionEstimate sfe(build_score_material(d, LossSpec::classification(), dth));
    auto res = sfe.eval_h_Etilde();
    CHECK_FALSE(res.unbounded);
    // mirror symmetry makes the profile symmetric about c = -1/2, where the
    // direction is proportional to -(1,1); the minimum is the fairest value
    CHECK(res.c_star == doctest::Approx(-0.5).epsilon(0.05));
    CHECK(res.value == doctest::Approx(sfe.eval_h_vec(-1.0 - res.c_star, res.c_star)));
    RiskPoint diag = sfe.eval_support_set(Direction::unit(-1.0, -1.0));
    CHECK(-res.value == doctest::Approx(0.5 * (diag.er + diag.eb)).epsilon(1e-6));

    // shifting the group-r losses so the u1-support point lands on the line
    // moves the minimizer to c = 0 with value h(u1)
    RiskPoint R0 = sfe.eval_support_set(dir_u1());
    double shift = R0.eb - R0.er;
    ScoreMaterial ms = sfe.material();
    for (std::size_t i = 0; i < ms.n(); ++i)
        if (g[i] == 0) ms.l0r[i] += shift;
    SupportFunctionEstimate aligned((ScoreMaterial(ms)));
    auto res_a = aligned.eval_h_Etilde();
    CHECK_FALSE(res_a.unbounded);
    CHECK(std::abs(res_a.c_star) < 0.05);
    CHECK(res_a.value == doctest::Approx(aligned.eval_h(dir_u1())).epsilon(1e-3));

    // pushing every group-b loss far up empties the 45-degree intersection
    ScoreMaterial m = sfe.material();
    for (std::size_t i = 0; i < m.n(); ++i)
        if (g[i] == 1) m.l0b[i] += 10.0;
    SupportFunctionEstimate far_up((ScoreMaterial(m)));
    auto res2 = far_up.eval_h_Etilde(50.0, 1e-8);
    CHECK(res2.unbounded);
}

TEST_CASE("oracle equivalence on a discrete design") {
    // 3 support points in one covariate; known class probabilities per point
    const double px[3] = {0.5, 0.3, 0.2};
    const double pr_y1[3] = {0.8, 0.4, 0.1};  // P(Y=1 | point, r)
    const double pb_y1[3] = {0.3, 0.6, 0.7};
    const double mu_r = 0.55;
    std::size_t n = 40000;
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> ud;
    std::vector<double> y(n), x(n);
    std::vector<std::uint8_t> g(n);
    std::vector<std::array<double, 2>> dth(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = ud(rng);
        int pt = u < px[0] ? 0 : (u < px[0] + px[1] ? 1 : 2);
        x[i] = pt;
        bool is_r = ud(rng) < mu_r;
        g[i] = is_r ? 0 : 1;
        double p1 = is_r ? pr_y1[pt] : pb_y1[pt];
        y[i] = ud(rng) < p1 ? 1 : 0;
        dth[i] = {mu_r * (1.0 - 2.0 * pr_y1[pt]), (1.0 - mu_r) * (1.0 - 2.0 * pb_y1[pt])};
    }
    Dataset d(y, g, x, 1);
    SupportFunctionEstimate sfe(build_score_material(d, LossSpec::classification(), dth));

    // brute-force truth: two vertices per support point
    auto h_true = [&](const Direction& q) {
        double acc = 0.0;
        for (int pt = 0; pt < 3; ++pt) {
            // M theta_0 = (p_r, p_b); M theta_1 = (1 - p_r, 1 - p_b)
            double v0 = q.q1 * pr_y1[pt] + q.q2 * pb_y1[pt];
            double v1 = q.q1 * (1.0 - pr_y1[pt]) + q.q2 * (1.0 - pb_y1[pt]);
            acc += px[pt] * std::max(v0, v1);
        }
        return acc;
    };
    auto grid = make_full_circle_grid(500);
    for (const auto& q : grid.directions) {
        auto hv = sfe.h_and_var(q);
        double se = std::sqrt(hv[1] / static_cast<double>(n));
        CHECK(std::abs(hv[0] - h_true(q)) <= std::max(4.0 * se, 5e-3));
    }
}

TEST_CASE("angular kernel agrees with direct evaluation under unit weights") {
    auto sfe = random_sfe(700, 99);
    AngularKernel kern(sfe.material());
    AngularKernel::DrawState st;
    kern.prepare(nullptr, st);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(0.0, 2.0 * kPi);
    for (int t = 0; t < 300; ++t) {
        Direction q = Direction::from_angle(ud(rng));
        CHECK(kern.h(st, q.q1, q.q2) == doctest::Approx(sfe.eval_h(q)).epsilon(1e-10));
    }
}

TEST_CASE("risk bound for classification is sqrt(2)") {
    Dataset d = generate(DgpSpec::balanced(), 500, 3);
    CHECK(risk_bound_C(d, LossSpec::classification()) == doctest::Approx(std::sqrt(2.0)));
}
