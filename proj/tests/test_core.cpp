#include <cmath>
#include <limits>

#include "doctest.h"
#include "faf/core.hpp"
#include "faf/simulate.hpp"

using namespace faf;

TEST_CASE("loss quad splits by group and decision") {
    Dataset d({1.0, 0.0, 1.0}, {0, 1, 1}, {0.0, 0.0, 0.0}, 1);
    auto quad = compute_loss_quad(d, LossSpec::classification());
    // (y=1, g=r): L = (l1r, l0r, l1b, l0b) = (0, 1, 0, 0)
    CHECK(quad[0].l1r == 0.0);
    CHECK(quad[0].l0r == 1.0);
    CHECK(quad[0].l1b == 0.0);
    CHECK(quad[0].l0b == 0.0);
    // (y=0, g=b): (0, 0, 1, 0)
    CHECK(quad[1].l1b == 1.0);
    CHECK(quad[1].l0b == 0.0);
    CHECK(quad[1].l1r == 0.0);

    LossSpec scaled;
    scaled.mode = LossMode::custom_bounded;
    scaled.custom = [](int dd, double y) { return 2.0 * (static_cast<double>(dd) != y); };
    auto q2 = compute_loss_quad(d, scaled);
    CHECK(q2[2].l0b == 2.0);  // (y=1, g=b): l(0,1) = 2
    CHECK(q2[2].l1b == 0.0);

    // at most one group pair nonzero per observation
    for (const auto& q : quad) {
        bool r_nonzero = q.l1r != 0.0 || q.l0r != 0.0;
        bool b_nonzero = q.l1b != 0.0 || q.l0b != 0.0;
        CHECK(!(r_nonzero && b_nonzero));
    }
}

TEST_CASE("loss quad rejects non-finite losses") {
    Dataset d({1.0, 0.0}, {0, 1}, {0.0, 0.0}, 1);
    LossSpec bad;
    bad.mode = LossMode::custom_bounded;
    bad.custom = [](int, double) { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(compute_loss_quad(d, bad), input_error);
}

TEST_CASE("group proportions") {
    Dataset d({1, 0, 1, 0}, {0, 0, 0, 1}, {0, 0, 0, 0}, 1);
    auto s = group_proportions(d);
    CHECK(s.mu_r == doctest::Approx(0.75));
    CHECK(s.mu_b == doctest::Approx(0.25));
    CHECK(s.inv_r() == doctest::Approx(4.0 / 3.0));
    CHECK(s.inv_b() == doctest::Approx(4.0));
    CHECK(s.mu_r + s.mu_b == 1.0);
    // M * diag(mu) is the identity exactly
    CHECK(s.inv_r() * s.mu_r == 1.0);
    CHECK(s.inv_b() * s.mu_b == 1.0);

    Dataset even({1, 0}, {0, 1}, {0, 0}, 1);
    auto se = group_proportions(even);
    CHECK(se.mu_r == 0.5);
}

TEST_CASE("single-group dataset is rejected") {
    CHECK_THROWS_WITH_AS(Dataset({1.0, 0.0}, {0, 0}, {0.0, 0.0}, 1),
                         doctest::Contains("group absent"), input_error);
}

TEST_CASE("group share of the balanced design at large n") {
    Dataset d = generate(DgpSpec::balanced(), 1000000, 2024);
    auto s = group_proportions(d);
    CHECK(std::abs(s.mu_r - 0.6) < 0.002);
}

TEST_CASE("direction grids") {
    auto g4 = make_full_circle_grid(4);
    REQUIRE(g4.size() == 4);
    CHECK(g4[0].q1 == doctest::Approx(1.0));
    CHECK(g4[1].q2 == doctest::Approx(1.0));
    CHECK(g4[2].q1 == doctest::Approx(-1.0));
    CHECK(g4[3].q2 == doctest::Approx(-1.0));

    auto arc = make_direction_grid(2, kPi, 1.5 * kPi);
    CHECK(arc[0].q1 == doctest::Approx(-1.0));
    CHECK(arc[1].q2 == doctest::Approx(-1.0));

    auto half = make_direction_grid(3, 0.0, kPi);
    CHECK(half.angles[0] == doctest::Approx(0.0));
    CHECK(half.angles[1] == doctest::Approx(0.5 * kPi));
    CHECK(half.angles[2] == doctest::Approx(kPi));

    CHECK_THROWS_AS(make_direction_grid(1, 0.0, 1.0), input_error);

    // unit norm within 1e-12 on every stored direction
    for (const auto& g : {make_full_circle_grid(97), make_pareto_grid(33), make_half_grid(11)}) {
        for (const auto& q : g.directions)
            CHECK(std::abs(std::sqrt(q.q1 * q.q1 + q.q2 * q.q2) - 1.0) <= 1e-12);
        for (std::size_t i = 1; i < g.angles.size(); ++i) CHECK(g.angles[i] > g.angles[i - 1]);
    }
}

TEST_CASE("direction constructor enforces unit norm") {
    CHECK_THROWS_AS(Direction(0.5, 0.5), input_error);
    CHECK_NOTHROW(Direction(1.0, 0.0));
    auto u = Direction::unit(3.0, 4.0);
    CHECK(u.q1 == doctest::Approx(0.6));
    CHECK(u.q2 == doctest::Approx(0.8));
}

TEST_CASE("dataset subset keeps order and labels") {
    Dataset d({1, 0, 1, 0}, {0, 1, 0, 1}, {1, 2, 3, 4}, 1, {"alpha", "beta"});
    auto s = d.subset({2, 3});
    CHECK(s.n() == 2);
    CHECK(s.y(0) == 1.0);
    CHECK(s.x(1, 0) == 4.0);
    CHECK(s.labels()[0] == "alpha");
}
