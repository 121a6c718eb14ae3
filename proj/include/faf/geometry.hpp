#pragma once

#include <optional>
#include <vector>

#include "faf/core.hpp"
#include "faf/supportfn.hpp"

namespace faf {

// Convex polygon with counterclockwise vertex order; possibly empty.
struct Polygon {
    std::vector<RiskPoint> vertices;

    bool empty() const { return vertices.empty(); }
    double support(const Direction& q) const;
    RiskPoint centroid() const;
    // axis-aligned bounding box {min_r, min_b, max_r, max_b}
    std::array<double, 4> bbox() const;
    bool is_convex_ccw(double tol = 1e-12) const;
};

// Intersection of the halfplanes q'z <= h(q) over a grid, clipped starting
// from the [-C, C]^2 square.
Polygon halfspace_intersection(const DirectionGrid& grid, const std::vector<double>& h,
                               double bound_C);

struct FeasibleSetEstimate {
    Polygon polygon;
    DirectionGrid grid;
    std::vector<double> h;  // support values per grid direction
};

FeasibleSetEstimate estimate_feasible_set(const SupportFunctionEstimate& sfe,
                                          const DirectionGrid& grid, double bound_C,
                                          int threads = 1);

// Rectangular grid retention of the two-part frontier criterion at slack
// kappa_n / sqrt(n).
struct FrontierEstimate {
    std::vector<RiskPoint> points;
    std::vector<double> criterion;  // per retained point
    double kappa_n = 0.0;
    double slack = 0.0;             // kappa_n / sqrt(n)
    std::array<double, 4> grid_box{0, 0, 0, 0};
    std::size_t grid_nr = 0, grid_nb = 0;
    bool empty() const { return points.empty(); }
};

struct FrontierConfig {
    double kappa_n = 0.0;            // if 0, sqrt(log n)
    std::size_t grid_per_axis = 400;
    std::size_t half_grid = 500;     // admissible-half directions
    // optional extra retention constraint (the improvement-cone check used
    // for the region preferred to a status-quo point)
    std::optional<RiskPoint> cone_at;
};

FrontierEstimate estimate_frontier(const SupportFunctionEstimate& sfe,
                                   const SupportFunctionEstimate::GridEval& circle,
                                   const FrontierConfig& cfg, int threads = 1);

struct ParetoEstimate {
    DirectionGrid arc;
    std::vector<RiskPoint> points;
};

ParetoEstimate estimate_pareto(const SupportFunctionEstimate& sfe, const DirectionGrid& arc_grid,
                               int threads = 1);

// Directions within `slack` (kappa_n / sqrt(n) at the callers) of the grid
// supremum of q'e - h(q); always contains the grid argmax.
struct ArgmaxSet {
    std::vector<std::size_t> indices;
    std::size_t argmax = 0;
    double sup = 0.0;
};

ArgmaxSet argmax_set(const SupportFunctionEstimate::GridEval& ge, const RiskPoint& e,
                     double slack);

// Retained point closest to e0 = 2C(-1/sqrt2, -1/sqrt2); ties break to the
// smaller e_r, then smaller e_b.
RiskPoint select_frontier_point(const FrontierEstimate& fhat, double bound_C);

double hausdorff_distance(const std::vector<RiskPoint>& A, const std::vector<RiskPoint>& B);

// For convex polygons the Hausdorff distance equals the uniform gap between
// their support functions; evaluated over a fine direction grid.
double hausdorff_polygons(const Polygon& A, const Polygon& B, std::size_t grid_n = 2048);

// argmax over the unit circle of q'e - h(q), refined by golden section on the
// angle within the winning grid cell.
Direction q_star_hat(const SupportFunctionEstimate& sfe,
                     const SupportFunctionEstimate::GridEval& circle, const RiskPoint& e);

}  // namespace faf
