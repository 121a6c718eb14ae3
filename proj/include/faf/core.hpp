#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "faf/common.hpp"

namespace faf {

// Group indices are canonical: 0 = r, 1 = b.
enum class Group : std::uint8_t { r = 0, b = 1 };

struct Observation {
    double y = 0.0;
    Group g = Group::r;
    std::vector<double> x;
};

// Column-ordered sample. Covariates are stored row-major (n x d_x) so the
// learners can stream rows; `labels` records which input strings were mapped
// to r and b (in that order).
class Dataset {
  public:
    Dataset() = default;
    Dataset(std::vector<double> y, std::vector<std::uint8_t> g,
            std::vector<double> x_rowmajor, std::size_t d_x,
            std::array<std::string, 2> labels = {"r", "b"});

    std::size_t n() const { return y_.size(); }
    std::size_t d_x() const { return d_x_; }
    double y(std::size_t i) const { return y_[i]; }
    Group g(std::size_t i) const { return static_cast<Group>(g_[i]); }
    bool is_r(std::size_t i) const { return g_[i] == 0; }
    const double* x_row(std::size_t i) const { return x_.data() + i * d_x_; }
    double x(std::size_t i, std::size_t j) const { return x_[i * d_x_ + j]; }
    const std::array<std::string, 2>& labels() const { return labels_; }

    const std::vector<double>& y_col() const { return y_; }
    const std::vector<std::uint8_t>& g_col() const { return g_; }
    const std::vector<double>& x_flat() const { return x_; }

    // Rows selected by index, preserving order.
    Dataset subset(const std::vector<std::size_t>& rows) const;

  private:
    std::vector<double> y_;
    std::vector<std::uint8_t> g_;
    std::vector<double> x_;  // n * d_x, row major
    std::size_t d_x_ = 0;
    std::array<std::string, 2> labels_ = {"r", "b"};
};

enum class LossMode { classification, custom_bounded };

// Loss l(d, y) for binary decisions. Classification mode is 1{d != y}.
struct LossSpec {
    LossMode mode = LossMode::classification;
    std::function<double(int, double)> custom;  // used in custom_bounded mode
    double second_moment_bound = 1.0;           // c2 of the moment restriction

    double operator()(int d, double y) const {
        if (mode == LossMode::classification) return (static_cast<double>(d) != y) ? 1.0 : 0.0;
        return custom(d, y);
    }
    static LossSpec classification() { return LossSpec{}; }
};

// Per-observation loss 4-vector L_d^g = l(d, Y_i) 1{G_i = g} and the derived
// differences dL^g = L_1^g - L_0^g. Exactly one group's pair is nonzero.
struct LossQuad {
    double l1r = 0.0, l0r = 0.0, l1b = 0.0, l0b = 0.0;
    double dlr() const { return l1r - l0r; }
    double dlb() const { return l1b - l0b; }
};

struct Direction {
    double q1 = 0.0, q2 = 0.0;

    Direction() = default;
    Direction(double a, double b);  // checks unit norm within 1e-12

    double angle() const { return std::atan2(q2, q1); }
    static Direction from_angle(double theta) {
        Direction q;
        q.q1 = std::cos(theta);
        q.q2 = std::sin(theta);
        return q;
    }
    // Normalizes a non-unit vector; throws on zero vectors.
    static Direction unit(double a, double b);
};

// Angle-uniform grid on [angle_lo, angle_hi]. Full-circle grids exclude the
// 2*pi endpoint; partial arcs include both endpoints.
struct DirectionGrid {
    std::vector<double> angles;
    std::vector<Direction> directions;

    std::size_t size() const { return directions.size(); }
    const Direction& operator[](std::size_t i) const { return directions[i]; }
};

DirectionGrid make_direction_grid(std::size_t n, double angle_lo, double angle_hi);
inline DirectionGrid make_full_circle_grid(std::size_t n) {
    return make_direction_grid(n, 0.0, 2.0 * kPi);
}
// Lower-left arc [pi, 3pi/2] whose endpoints are u1 = (-1,0), u2 = (0,-1).
inline DirectionGrid make_pareto_grid(std::size_t n) {
    return make_direction_grid(n, kPi, 1.5 * kPi);
}
// Admissible half circle {q : q1 + q2 >= 0}, angles [-pi/4, 3pi/4].
inline DirectionGrid make_half_grid(std::size_t n) {
    return make_direction_grid(n, -0.25 * kPi, 0.75 * kPi);
}

inline Direction dir_u1() { return Direction(-1.0, 0.0); }
inline Direction dir_u2() { return Direction(0.0, -1.0); }

struct RiskPoint {
    double er = 0.0, eb = 0.0;
};

inline double dot(const Direction& q, const RiskPoint& e) { return q.q1 * e.er + q.q2 * e.eb; }

// Sample group proportions and the scaling matrix M = diag(1/mu_r, 1/mu_b).
// Raw counts are kept so group means divide by the exact integer count.
struct GroupScale {
    double mu_r = 0.0, mu_b = 0.0;
    std::size_t n_r = 0, n_b = 0;
    double inv_r() const { return 1.0 / mu_r; }
    double inv_b() const { return 1.0 / mu_b; }
};

std::vector<LossQuad> compute_loss_quad(const Dataset& data, const LossSpec& loss);
GroupScale group_proportions(const Dataset& data);

}  // namespace faf
