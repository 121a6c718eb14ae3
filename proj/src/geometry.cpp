#include "faf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace faf {

double Polygon::support(const Direction& q) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : vertices) best = std::max(best, dot(q, v));
    return best;
}

RiskPoint Polygon::centroid() const {
    RiskPoint c;
    for (const auto& v : vertices) {
        c.er += v.er;
        c.eb += v.eb;
    }
    if (!vertices.empty()) {
        c.er /= static_cast<double>(vertices.size());
        c.eb /= static_cast<double>(vertices.size());
    }
    return c;
}

std::array<double, 4> Polygon::bbox() const {
    std::array<double, 4> b{1e300, 1e300, -1e300, -1e300};
    for (const auto& v : vertices) {
        b[0] = std::min(b[0], v.er);
        b[1] = std::min(b[1], v.eb);
        b[2] = std::max(b[2], v.er);
        b[3] = std::max(b[3], v.eb);
    }
    return b;
}

bool Polygon::is_convex_ccw(double tol) const {
    const std::size_t m = vertices.size();
    if (m < 3) return true;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& a = vertices[i];
        const auto& b = vertices[(i + 1) % m];
        const auto& c = vertices[(i + 2) % m];
        double cross = (b.er - a.er) * (c.eb - b.eb) - (b.eb - a.eb) * (c.er - b.er);
        if (cross < -tol) return false;
    }
    return true;
}

Polygon halfspace_intersection(const DirectionGrid& grid, const std::vector<double>& h,
                               double bound_C) {
    if (grid.size() != h.size()) throw input_error("grid/support size mismatch");
    // start from the bounding square, CCW
    std::vector<RiskPoint> poly = {{-bound_C, -bound_C},
                                   {bound_C, -bound_C},
                                   {bound_C, bound_C},
                                   {-bound_C, bound_C}};
    std::vector<RiskPoint> next;
    for (std::size_t j = 0; j < grid.size() && !poly.empty(); ++j) {
        const double q1 = grid[j].q1, q2 = grid[j].q2, c = h[j];
        next.clear();
        const std::size_t m = poly.size();
        for (std::size_t i = 0; i < m; ++i) {
            const RiskPoint& a = poly[i];
            const RiskPoint& b = poly[(i + 1) % m];
            double da = q1 * a.er + q2 * a.eb - c;
            double db = q1 * b.er + q2 * b.eb - c;
            bool ina = da <= 0.0, inb = db <= 0.0;
            if (ina) next.push_back(a);
            if (ina != inb) {
                double t = da / (da - db);
                next.push_back({a.er + t * (b.er - a.er), a.eb + t * (b.eb - a.eb)});
            }
        }
        poly.swap(next);
    }
    // drop near-duplicate vertices produced by clipping
    Polygon out;
    const double eps = 1e-12 * std::max(1.0, bound_C);
    for (const auto& v : poly) {
        if (out.vertices.empty() ||
            std::abs(v.er - out.vertices.back().er) > eps ||
            std::abs(v.eb - out.vertices.back().eb) > eps)
            out.vertices.push_back(v);
    }
    while (out.vertices.size() > 1 &&
           std::abs(out.vertices.front().er - out.vertices.back().er) <= eps &&
           std::abs(out.vertices.front().eb - out.vertices.back().eb) <= eps)
        out.vertices.pop_back();
    return out;
}

FeasibleSetEstimate estimate_feasible_set(const SupportFunctionEstimate& sfe,
                                          const DirectionGrid& grid, double bound_C,
                                          int threads) {
    FeasibleSetEstimate out;
    auto ge = sfe.eval_grid(grid, threads);
    out.grid = grid;
    out.h = ge.h;
    out.polygon = halfspace_intersection(grid, ge.h, bound_C);
    return out;
}

FrontierEstimate estimate_frontier(const SupportFunctionEstimate& sfe,
                                   const SupportFunctionEstimate::GridEval& circle,
                                   const FrontierConfig& cfg, int threads) {
    const std::size_t n = sfe.n();
    FrontierEstimate out;
    out.kappa_n = cfg.kappa_n > 0.0 ? cfg.kappa_n : std::sqrt(std::log(static_cast<double>(n)));
    out.slack = out.kappa_n / std::sqrt(static_cast<double>(n));

    // candidate box: feasible polygon bounding box inflated by 2 kappa/sqrt(n)
    Polygon poly = halfspace_intersection(circle.grid, circle.h, 1e6);
    if (poly.empty()) return out;
    auto bb = poly.bbox();
    double infl = 2.0 * out.slack;
    out.grid_box = {bb[0] - infl, bb[1] - infl, bb[2] + infl, bb[3] + infl};
    out.grid_nr = cfg.grid_per_axis;
    out.grid_nb = cfg.grid_per_axis;

    DirectionGrid half = make_half_grid(cfg.half_grid);
    // h(-q) per admissible-half direction
    std::vector<double> h_neg(half.size());
    for (std::size_t j = 0; j < half.size(); ++j) {
        Direction mq;
        mq.q1 = -half[j].q1;
        mq.q2 = -half[j].q2;
        h_neg[j] = sfe.eval_h(mq);
    }
    const Direction cone_dirs[4] = {Direction::unit(-1.0, 1.0), Direction::unit(1.0, -1.0),
                                    Direction(1.0, 0.0), Direction(0.0, 1.0)};
    const double cone_scale = std::sqrt(2.0);  // the diagonal pair is unit-normalized

    const std::size_t nr = out.grid_nr, nb = out.grid_nb;
    std::vector<double> crit(nr * nb, 0.0);
    std::vector<std::uint8_t> keep(nr * nb, 0);
    const double dr = (out.grid_box[2] - out.grid_box[0]) / static_cast<double>(nr - 1);
    const double db = (out.grid_box[3] - out.grid_box[1]) / static_cast<double>(nb - 1);
    parallel_for(nr * nb, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            RiskPoint e{out.grid_box[0] + dr * static_cast<double>(t / nb),
                        out.grid_box[1] + db * static_cast<double>(t % nb)};
            double gap = -1e300;
            for (std::size_t j = 0; j < circle.grid.size(); ++j)
                gap = std::max(gap, dot(circle.grid[j], e) - circle.h[j]);
            double c = positive_part(gap);
            if (c > out.slack) {
                crit[t] = c;
                continue;
            }
            double sep = -1e300;
            for (std::size_t j = 0; j < half.size(); ++j)
                sep = std::max(sep, -eval_h_C(e, half[j].q1, half[j].q2) - h_neg[j]);
            c += negative_part(sep);
            if (cfg.cone_at) {
                double viol = -1e300;
                for (int d4 = 0; d4 < 4; ++d4) {
                    double scale = d4 < 2 ? cone_scale : 1.0;
                    double qe = scale * dot(cone_dirs[d4], e);
                    double hc = scale * eval_h_C(*cfg.cone_at, cone_dirs[d4].q1, cone_dirs[d4].q2);
                    viol = std::max(viol, qe - hc);
                }
                c += positive_part(viol);
            }
            crit[t] = c;
            keep[t] = c <= out.slack ? 1 : 0;
        }
    });
    for (std::size_t t = 0; t < nr * nb; ++t) {
        if (!keep[t]) continue;
        out.points.push_back({out.grid_box[0] + dr * static_cast<double>(t / nb),
                              out.grid_box[1] + db * static_cast<double>(t % nb)});
        out.criterion.push_back(crit[t]);
    }
    return out;
}

ParetoEstimate estimate_pareto(const SupportFunctionEstimate& sfe, const DirectionGrid& arc_grid,
                               int threads) {
    ParetoEstimate out;
    out.arc = arc_grid;
    out.points.resize(arc_grid.size());
    parallel_for(arc_grid.size(), threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) out.points[j] = sfe.eval_support_set(arc_grid[j]);
    });
    return out;
}

ArgmaxSet argmax_set(const SupportFunctionEstimate::GridEval& ge, const RiskPoint& e,
                     double slack) {
    ArgmaxSet out;
    const std::size_t m = ge.grid.size();
    if (m == 0) throw input_error("empty grid");
    std::vector<double> val(m);
    out.sup = -1e300;
    for (std::size_t j = 0; j < m; ++j) {
        val[j] = dot(ge.grid[j], e) - ge.h[j];
        if (val[j] > out.sup) {
            out.sup = val[j];
            out.argmax = j;
        }
    }
    for (std::size_t j = 0; j < m; ++j)
        if (val[j] >= out.sup - slack) out.indices.push_back(j);
    return out;
}

RiskPoint select_frontier_point(const FrontierEstimate& fhat, double bound_C) {
    if (fhat.empty()) throw empty_result("empty frontier estimate");
    const double e0r = -2.0 * bound_C / std::sqrt(2.0);
    const double e0b = e0r;
    RiskPoint best = fhat.points.front();
    double best_d = 1e300;
    for (const auto& p : fhat.points) {
        double d = sqr(p.er - e0r) + sqr(p.eb - e0b);
        if (d < best_d - 1e-15 ||
            (std::abs(d - best_d) <= 1e-15 &&
             (p.er < best.er || (p.er == best.er && p.eb < best.eb)))) {
            best_d = std::min(best_d, d);
            best = p;
        }
    }
    return best;
}

double hausdorff_distance(const std::vector<RiskPoint>& A, const std::vector<RiskPoint>& B) {
    if (A.empty() || B.empty()) throw input_error("hausdorff of empty set");
    auto directed = [](const std::vector<RiskPoint>& P, const std::vector<RiskPoint>& Q) {
        double worst = 0.0;
        for (const auto& p : P) {
            double best = 1e300;
            for (const auto& q : Q) best = std::min(best, sqr(p.er - q.er) + sqr(p.eb - q.eb));
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(A, B), directed(B, A));
}

double hausdorff_polygons(const Polygon& A, const Polygon& B, std::size_t grid_n) {
    if (A.empty() || B.empty()) throw input_error("hausdorff of empty polygon");
    auto grid = make_full_circle_grid(grid_n);
    double gap = 0.0;
    for (const auto& q : grid.directions)
        gap = std::max(gap, std::abs(A.support(q) - B.support(q)));
    return gap;
}

Direction q_star_hat(const SupportFunctionEstimate& sfe,
                     const SupportFunctionEstimate::GridEval& circle, const RiskPoint& e) {
    ArgmaxSet am = argmax_set(circle, e, 0.0);
    const std::size_t m = circle.grid.size();
    double theta0 = circle.grid.angles[am.argmax];
    double step = m > 1 ? circle.grid.angles[1] - circle.grid.angles[0] : kPi;
    auto f = [&](double theta) {
        Direction q = Direction::from_angle(theta);
        return q.q1 * e.er + q.q2 * e.eb - sfe.eval_h(q);
    };
    double a = theta0 - step, b = theta0 + step;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > 1e-10) {
        if (f1 > f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        }
    }
    return Direction::from_angle(0.5 * (a + b));
}

}  // namespace faf
