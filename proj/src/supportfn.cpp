#include "faf/supportfn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace faf {

namespace {

ScoreMaterial make_material(const Dataset& data, const LossSpec& loss) {
    ScoreMaterial m;
    auto quad = compute_loss_quad(data, loss);
    std::size_t n = data.n();
    m.l0r.resize(n);
    m.l0b.resize(n);
    m.dlr.resize(n);
    m.dlb.resize(n);
    m.dthr.resize(n);
    m.dthb.resize(n);
    m.is_r.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.l0r[i] = quad[i].l0r;
        m.l0b[i] = quad[i].l0b;
        m.dlr[i] = quad[i].dlr();
        m.dlb[i] = quad[i].dlb();
        m.is_r[i] = data.is_r(i) ? 1 : 0;
    }
    m.scale = group_proportions(data);
    return m;
}

}  // namespace

ScoreMaterial build_score_material(const Dataset& data, const LossSpec& loss,
                                   const CrossFitNuisance& cfn) {
    if (cfn.n() != data.n()) throw input_error("nuisance not aligned to dataset");
    ScoreMaterial m = make_material(data, loss);
    for (std::size_t i = 0; i < data.n(); ++i) {
        m.dthr[i] = cfn.prediction(i)[0];
        m.dthb[i] = cfn.prediction(i)[1];
    }
    return m;
}

ScoreMaterial build_score_material(const Dataset& data, const LossSpec& loss,
                                   const std::vector<std::array<double, 2>>& delta_theta) {
    if (delta_theta.size() != data.n()) throw input_error("delta-theta not aligned to dataset");
    ScoreMaterial m = make_material(data, loss);
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (!std::isfinite(delta_theta[i][0]) || !std::isfinite(delta_theta[i][1]))
            throw input_error("non-finite delta-theta at row " + std::to_string(i));
        m.dthr[i] = delta_theta[i][0];
        m.dthb[i] = delta_theta[i][1];
    }
    return m;
}

SupportFunctionEstimate::SupportFunctionEstimate(ScoreMaterial m) : m_(std::move(m)) {}

Hs SupportFunctionEstimate::eval(const Direction& q) const {
    const std::size_t n = m_.n();
    const double vr = q.q1 * m_.scale.inv_r();
    const double vb = q.q2 * m_.scale.inv_b();
    double hsum = 0.0, sr = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double k = vr * m_.dthr[i] + vb * m_.dthb[i];
        double ar = m_.l0r[i], ab = m_.l0b[i];
        if (k > 0.0) {
            ar += m_.dlr[i];
            ab += m_.dlb[i];
        }
        hsum += vr * ar + vb * ab;
        sr += ar;
        sb += ab;
    }
    Hs out;
    out.h = hsum / static_cast<double>(n);
    out.s.er = sr / static_cast<double>(m_.scale.n_r);
    out.s.eb = sb / static_cast<double>(m_.scale.n_b);
    return out;
}

double SupportFunctionEstimate::eval_h_vec(double w1, double w2) const {
    double nrm = std::sqrt(w1 * w1 + w2 * w2);
    if (!(nrm > 0.0)) throw input_error("zero direction");
    Direction q;
    q.q1 = w1 / nrm;
    q.q2 = w2 / nrm;
    return nrm * eval(q).h;
}

std::vector<double> SupportFunctionEstimate::eval_influence(const Direction& q) const {
    const std::size_t n = m_.n();
    Hs hs = eval(q);
    const double vr = q.q1 * m_.scale.inv_r();
    const double vb = q.q2 * m_.scale.inv_b();
    // correction (M*_i q)' M^{-1} s = -1{g=r} q1 s_r / mu_r - 1{g=b} q2 s_b / mu_b
    const double cr = -q.q1 * hs.s.er * m_.scale.inv_r();
    const double cb = -q.q2 * hs.s.eb * m_.scale.inv_b();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double k = vr * m_.dthr[i] + vb * m_.dthb[i];
        double ar = m_.l0r[i], ab = m_.l0b[i];
        if (k > 0.0) {
            ar += m_.dlr[i];
            ab += m_.dlb[i];
        }
        out[i] = vr * ar + vb * ab + (m_.is_r[i] ? cr : cb);
    }
    return out;
}

double SupportFunctionEstimate::omega(const Direction& q, const Direction& qt) const {
    auto a = eval_influence(q);
    auto b = eval_influence(qt);
    const std::size_t n = a.size();
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (a[i] - ma) * (b[i] - mb);
    return acc / static_cast<double>(n);
}

std::array<double, 2> SupportFunctionEstimate::h_and_var(const Direction& q) const {
    auto a = eval_influence(q);
    const std::size_t n = a.size();
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double acc = 0.0;
    for (double v : a) acc += sqr(v - ma);
    return {eval(q).h, acc / static_cast<double>(n)};
}

SupportFunctionEstimate::GridEval SupportFunctionEstimate::eval_grid(const DirectionGrid& grid,
                                                                     int threads) const {
    GridEval out;
    out.grid = grid;
    out.h.resize(grid.size());
    out.s.resize(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) {
            Hs hs = eval(grid[j]);
            out.h[j] = hs.h;
            out.s[j] = hs.s;
        }
    });
    return out;
}

SupportFunctionEstimate::EtildeResult SupportFunctionEstimate::eval_h_Etilde(double c_bound,
                                                                             double tol) const {
    if (!(c_bound > 0.0)) throw input_error("c_bound must be positive");
    auto g = [&](double c) { return eval_h_vec(-1.0 - c, c); };
    const int npts = 201;
    const double step = 2.0 * c_bound / (npts - 1);
    double best_v = 1e300, best_c = 0.0;
    int best_i = 0;
    for (int i = 0; i < npts; ++i) {
        double c = -c_bound + step * i;
        double v = g(c);
        if (v < best_v) {
            best_v = v;
            best_c = c;
            best_i = i;
        }
    }
    EtildeResult out;
    if (best_i == 0 || best_i == npts - 1) {
        // endpoint minimum: unbounded when the profile still decreases there
        double inner = g(best_c + (best_i == 0 ? step : -step) * 0.5);
        out.unbounded = best_v < inner - 1e-14;
        out.value = best_v;
        out.c_star = best_c;
        return out;
    }
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = best_c - step, b = best_c + step;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = g(x1), f2 = g(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = g(x2);
        }
    }
    out.c_star = 0.5 * (a + b);
    out.value = g(out.c_star);
    return out;
}

double eval_h_C(const RiskPoint& e, double q1, double q2) {
    if (q1 + q2 < -1e-12) throw input_error("h_C unbounded direction");
    double top = q1 * std::min(e.er, 2.0 * e.eb - e.er) + q2 * e.eb;
    double bot = q1 * e.er + q2 * std::min(e.eb, 2.0 * e.er - e.eb);
    return std::max(top, bot);
}

double risk_bound_C(const Dataset& data, const LossSpec& loss) {
    double accr = 0.0, accb = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        double m = std::max(std::abs(loss(0, data.y(i))), std::abs(loss(1, data.y(i))));
        (data.is_r(i) ? accr : accb) += m;
    }
    GroupScale s = group_proportions(data);
    double n = static_cast<double>(data.n());
    return std::sqrt(2.0) * std::max(accr / (n * s.mu_r), accb / (n * s.mu_b));
}

AngularKernel::AngularKernel(const ScoreMaterial& m) : n_(m.n()) {
    l0r_ = m.l0r;
    l0b_ = m.l0b;
    is_r_ = m.is_r;
    std::vector<std::uint32_t> keep;
    keep.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i)
        if (m.dthr[i] != 0.0 || m.dthb[i] != 0.0) keep.push_back(static_cast<std::uint32_t>(i));
    std::vector<double> psi(keep.size());
    for (std::size_t t = 0; t < keep.size(); ++t)
        psi[t] = std::atan2(m.dthb[keep[t]], m.dthr[keep[t]]);
    std::vector<std::uint32_t> idx(keep.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return psi[a] < psi[b]; });
    order_.resize(idx.size());
    psi_.resize(idx.size());
    dlr_sorted_.resize(idx.size());
    dlb_sorted_.resize(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        std::uint32_t row = keep[idx[t]];
        order_[t] = row;
        psi_[t] = psi[idx[t]];
        dlr_sorted_[t] = m.dlr[row];
        dlb_sorted_[t] = m.dlb[row];
    }
}

void AngularKernel::prepare(const double* w, DrawState& st) const {
    const std::size_t m = order_.size();
    st.pre_dlr.assign(m + 1, 0.0);
    st.pre_dlb.assign(m + 1, 0.0);
    double sw = 0.0, swr = 0.0, l0r = 0.0, l0b = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double wi = w ? w[i] : 1.0;
        sw += wi;
        if (is_r_[i]) swr += wi;
        l0r += wi * l0r_[i];
        l0b += wi * l0b_[i];
    }
    st.sum_w = sw;
    st.wbar = sw / static_cast<double>(n_);
    st.mu_r = swr / sw;
    st.mu_b = 1.0 - st.mu_r;
    st.tot_l0r = l0r;
    st.tot_l0b = l0b;
    for (std::size_t t = 0; t < m; ++t) {
        double wi = w ? w[order_[t]] : 1.0;
        st.pre_dlr[t + 1] = st.pre_dlr[t] + wi * dlr_sorted_[t];
        st.pre_dlb[t + 1] = st.pre_dlb[t] + wi * dlb_sorted_[t];
    }
}

double AngularKernel::arc_sum(const std::vector<double>& pre, double lo, double hi) const {
    // sum over sorted psi in the open interval (lo, hi), with wrap-around
    auto range = [&](double a, double b) {
        // (a, b) within [-pi, pi]
        std::size_t i0 = std::upper_bound(psi_.begin(), psi_.end(), a) - psi_.begin();
        std::size_t i1 = std::lower_bound(psi_.begin(), psi_.end(), b) - psi_.begin();
        return i1 > i0 ? pre[i1] - pre[i0] : 0.0;
    };
    if (lo < -kPi) return range(-kPi - 1.0, hi) + range(lo + 2.0 * kPi, kPi + 1.0);
    if (hi > kPi) return range(lo, kPi + 1.0) + range(-kPi - 1.0, hi - 2.0 * kPi);
    return range(lo, hi);
}

double AngularKernel::h(const DrawState& st, double q1, double q2) const {
    const double vr = q1 / st.mu_r, vb = q2 / st.mu_b;
    const double a = std::atan2(vb, vr);
    const double lo = a - 0.5 * kPi, hi = a + 0.5 * kPi;
    double sumr = st.tot_l0r + arc_sum(st.pre_dlr, lo, hi);
    double sumb = st.tot_l0b + arc_sum(st.pre_dlb, lo, hi);
    return (vr * sumr + vb * sumb) / st.sum_w;
}

double AngularKernel::h_vec(const DrawState& st, double w1, double w2) const {
    double nrm = std::sqrt(w1 * w1 + w2 * w2);
    if (!(nrm > 0.0)) throw input_error("zero direction");
    return nrm * h(st, w1 / nrm, w2 / nrm);
}

void AngularKernel::h_grid(const DrawState& st, const DirectionGrid& grid, double* out) const {
    for (std::size_t j = 0; j < grid.size(); ++j) out[j] = h(st, grid[j].q1, grid[j].q2);
}

}  // namespace faf
