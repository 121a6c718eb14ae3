#include "faf/core.hpp"

#include <cmath>

namespace faf {

Dataset::Dataset(std::vector<double> y, std::vector<std::uint8_t> g,
                 std::vector<double> x_rowmajor, std::size_t d_x,
                 std::array<std::string, 2> labels)
    : y_(std::move(y)), g_(std::move(g)), x_(std::move(x_rowmajor)), d_x_(d_x),
      labels_(std::move(labels)) {
    std::size_t n = y_.size();
    if (n < 2) throw input_error("dataset needs n >= 2");
    if (g_.size() != n) throw input_error("y/g length mismatch");
    if (x_.size() != n * d_x_) throw input_error("covariate matrix size mismatch");
    bool seen_r = false, seen_b = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y_[i])) throw input_error("non-finite outcome at row " + std::to_string(i));
        if (g_[i] > 1) throw input_error("group label out of range at row " + std::to_string(i));
        (g_[i] == 0 ? seen_r : seen_b) = true;
    }
    for (std::size_t k = 0; k < x_.size(); ++k) {
        if (!std::isfinite(x_[k]))
            throw input_error("non-finite covariate at row " + std::to_string(k / d_x_));
    }
    if (!seen_r || !seen_b) throw input_error("group absent");
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    std::vector<double> y(rows.size());
    std::vector<std::uint8_t> g(rows.size());
    std::vector<double> x(rows.size() * d_x_);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        std::size_t i = rows[k];
        y[k] = y_[i];
        g[k] = g_[i];
        for (std::size_t j = 0; j < d_x_; ++j) x[k * d_x_ + j] = x_[i * d_x_ + j];
    }
    return Dataset(std::move(y), std::move(g), std::move(x), d_x_, labels_);
}

Direction::Direction(double a, double b) : q1(a), q2(b) {
    double nrm = std::sqrt(q1 * q1 + q2 * q2);
    if (std::abs(nrm - 1.0) > 1e-12)
        throw input_error("direction is not unit norm");
}

Direction Direction::unit(double a, double b) {
    double nrm = std::sqrt(a * a + b * b);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw input_error("cannot normalize zero direction");
    Direction q;
    q.q1 = a / nrm;
    q.q2 = b / nrm;
    return q;
}

DirectionGrid make_direction_grid(std::size_t n, double angle_lo, double angle_hi) {
    if (n < 2) throw input_error("direction grid needs N >= 2");
    if (!(angle_lo < angle_hi)) throw input_error("direction grid needs angle_lo < angle_hi");
    const double span = angle_hi - angle_lo;
    const bool full_circle = std::abs(span - 2.0 * kPi) < 1e-12;
    const double step = full_circle ? span / static_cast<double>(n)
                                    : span / static_cast<double>(n - 1);
    DirectionGrid grid;
    grid.angles.reserve(n);
    grid.directions.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double theta = angle_lo + step * static_cast<double>(i);
        grid.angles.push_back(theta);
        grid.directions.push_back(Direction::from_angle(theta));
    }
    return grid;
}

std::vector<LossQuad> compute_loss_quad(const Dataset& data, const LossSpec& loss) {
    std::vector<LossQuad> out(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        double l1 = loss(1, data.y(i));
        double l0 = loss(0, data.y(i));
        if (!std::isfinite(l1) || !std::isfinite(l0))
            throw input_error("non-finite loss value at row " + std::to_string(i));
        if (data.is_r(i)) {
            out[i].l1r = l1;
            out[i].l0r = l0;
        } else {
            out[i].l1b = l1;
            out[i].l0b = l0;
        }
    }
    return out;
}

GroupScale group_proportions(const Dataset& data) {
    std::size_t nr = 0;
    for (std::size_t i = 0; i < data.n(); ++i) nr += data.is_r(i) ? 1 : 0;
    if (nr == 0 || nr == data.n()) throw input_error("group absent");
    GroupScale s;
    s.mu_r = static_cast<double>(nr) / static_cast<double>(data.n());
    s.mu_b = 1.0 - s.mu_r;
    s.n_r = nr;
    s.n_b = data.n() - nr;
    return s;
}

}  // namespace faf
