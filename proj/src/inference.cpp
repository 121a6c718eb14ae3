#include "faf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace faf {

namespace {

double quantile_sorted_copy(std::vector<double> v, double beta) {
    if (v.empty()) throw numeric_error("quantile of empty sample");
    std::size_t idx = static_cast<std::size_t>(std::ceil(beta * static_cast<double>(v.size())));
    idx = std::min(std::max<std::size_t>(idx, 1), v.size());
    std::nth_element(v.begin(), v.begin() + (idx - 1), v.end());
    return v[idx - 1];
}

// golden-section minimum of the 45-degree profile c -> f(u1 - c(1,-1))
double minimize_profile(const std::function<double(double, double)>& h_vec, double c_bound,
                        double tol) {
    auto g = [&](double c) { return h_vec(-1.0 - c, c); };
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
    if (best_i == 0 || best_i == npts - 1) return best_v;
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
    return g(0.5 * (a + b));
}

}  // namespace

void BootstrapConfig::validate(std::size_t n) const {
    if (draws < 100) throw input_error("bootstrap needs B >= 100");
    double s = resolve_step(n);
    if (!(s > 0.0) || std::sqrt(static_cast<double>(n)) * s < 1.0)
        throw input_error("bootstrap step must satisfy sqrt(n) * s_n >= 1");
    if (varsigma < 0.0) throw input_error("varsigma must be >= 0");
}

StatusQuoRisk estimate_status_quo(const Dataset& data, const LossSpec& loss,
                                  const std::vector<double>& a_scores) {
    if (a_scores.size() != data.n()) throw input_error("policy scores not aligned to dataset");
    StatusQuoRisk out;
    out.scale = group_proportions(data);
    const std::size_t n = data.n();
    out.z_r.assign(n, 0.0);
    out.z_b.assign(n, 0.0);
    double sum_r = 0.0, sum_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = a_scores[i];
        if (!(a >= 0.0 && a <= 1.0))
            throw input_error("policy score outside [0,1] at row " + std::to_string(i));
        double z = a * loss(1, data.y(i)) + (1.0 - a) * loss(0, data.y(i));
        if (data.is_r(i)) {
            out.z_r[i] = z;
            sum_r += z;
        } else {
            out.z_b[i] = z;
            sum_b += z;
        }
    }
    out.e_star.er = sum_r / static_cast<double>(out.scale.n_r);
    out.e_star.eb = sum_b / static_cast<double>(out.scale.n_b);
    const double mean_r = sum_r / static_cast<double>(n);
    const double mean_b = sum_b / static_cast<double>(n);
    out.infl_r.resize(n);
    out.infl_b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double gr = data.is_r(i) ? 1.0 : 0.0;
        out.infl_r[i] = out.z_r[i] / out.scale.mu_r - mean_r / sqr(out.scale.mu_r) * gr;
        out.infl_b[i] = out.z_b[i] / out.scale.mu_b - mean_b / sqr(out.scale.mu_b) * (1.0 - gr);
    }
    return out;
}

StatGrids build_stat_grids(const SupportFunctionEstimate& sfe, std::size_t n_circle,
                           std::size_t n_half, std::size_t n_pareto, int threads) {
    StatGrids g;
    g.circle = sfe.eval_grid(make_full_circle_grid(n_circle), threads);
    g.half = make_half_grid(n_half);
    g.h_neg_half.resize(g.half.size());
    parallel_for(g.half.size(), threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) {
            Direction mq;
            mq.q1 = -g.half[j].q1;
            mq.q2 = -g.half[j].q2;
            g.h_neg_half[j] = sfe.eval_h(mq);
        }
    });
    g.pareto = make_pareto_grid(n_pareto);
    g.h_pareto.resize(g.pareto.size());
    parallel_for(g.pareto.size(), threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) g.h_pareto[j] = sfe.eval_h(g.pareto[j]);
    });
    g.h_u1 = sfe.eval_h(dir_u1());
    g.h_u2 = sfe.eval_h(dir_u2());
    const double rt = 1.0 / std::sqrt(2.0);
    Direction vp, vm;
    vp.q1 = rt;
    vp.q2 = -rt;
    vm.q1 = -rt;
    vm.q2 = rt;
    g.h_vp = sfe.eval_h(vp);
    g.h_vm = sfe.eval_h(vm);
    return g;
}

namespace {

double max_support_gap(const SupportFunctionEstimate::GridEval& circle, const RiskPoint& e) {
    double m = -1e300;
    for (std::size_t j = 0; j < circle.grid.size(); ++j)
        m = std::max(m, dot(circle.grid[j], e) - circle.h[j]);
    return m;
}

double max_separation(const DirectionGrid& half, const std::vector<double>& h_neg,
                      const RiskPoint& e) {
    double m = -1e300;
    for (std::size_t j = 0; j < half.size(); ++j)
        m = std::max(m, -eval_h_C(e, half[j].q1, half[j].q2) - h_neg[j]);
    return m;
}

}  // namespace

double stat_frontier(const SupportFunctionEstimate& sfe, const StatGrids& g, const RiskPoint& e) {
    if (!std::isfinite(e.er) || !std::isfinite(e.eb)) throw input_error("non-finite point");
    double a = positive_part(max_support_gap(g.circle, e));
    double s = negative_part(max_separation(g.half, g.h_neg_half, e));
    return std::sqrt(static_cast<double>(sfe.n())) * (a + s);
}

double stat_pareto(const SupportFunctionEstimate& sfe, const StatGrids& g, const RiskPoint& e) {
    double a = positive_part(max_support_gap(g.circle, e));
    double m = -1e300;
    for (std::size_t j = 0; j < g.pareto.size(); ++j)
        m = std::max(m, dot(g.pareto[j], e) - g.h_pareto[j]);
    return std::sqrt(static_cast<double>(sfe.n())) * (a + negative_part(m));
}

double stat_lda(const SupportFunctionEstimate& sfe, const StatGrids& g, const StatusQuoRisk& sq) {
    return stat_frontier(sfe, g, sq.e_star);
}

BootstrapDraws run_bootstrap_draws(const SupportFunctionEstimate& sfe, const StatGrids& grids,
                                   const BootstrapConfig& cfg, const StatusQuoRisk* sq,
                                   bool want_etilde, int threads) {
    const std::size_t n = sfe.n();
    cfg.validate(n);
    const std::size_t B = cfg.draws;
    const std::size_t nc = grids.circle.grid.size();
    const std::size_t nh = grids.half.size();

    BootstrapDraws bd;
    bd.B = B;
    bd.sqrt_n = std::sqrt(static_cast<double>(n));
    bd.step = cfg.resolve_step(n);
    bd.has_estar = sq != nullptr;
    bd.has_etilde = want_etilde;

    AngularKernel kern(sfe.material());
    AngularKernel::DrawState base;
    kern.prepare(nullptr, base);

    bd.base_circle.resize(nc);
    kern.h_grid(base, grids.circle.grid, bd.base_circle.data());
    bd.base_neg_half.resize(nh);
    for (std::size_t j = 0; j < nh; ++j)
        bd.base_neg_half[j] = kern.h(base, -grids.half[j].q1, -grids.half[j].q2);
    bd.base_u1 = kern.h(base, -1.0, 0.0);
    bd.base_u2 = kern.h(base, 0.0, -1.0);
    const double rt = 1.0 / std::sqrt(2.0);
    bd.base_vp = kern.h(base, rt, -rt);
    bd.base_vm = kern.h(base, -rt, rt);
    if (want_etilde) {
        bd.base_etilde = minimize_profile(
            [&](double w1, double w2) { return kern.h_vec(base, w1, w2); }, 50.0, 1e-8);
    }
    if (sq) bd.estar_base = sq->e_star;

    bd.circle.assign(B * nc, 0.0);
    bd.neg_half.assign(B * nh, 0.0);
    bd.u1.assign(B, 0.0);
    bd.u2.assign(B, 0.0);
    bd.vp.assign(B, 0.0);
    bd.vm.assign(B, 0.0);
    if (sq) {
        bd.estar_r.assign(B, 0.0);
        bd.estar_b.assign(B, 0.0);
    }
    if (want_etilde) bd.etilde.assign(B, 0.0);

    const double factor = bd.step * bd.sqrt_n;
    std::vector<std::string> errors(B);
    parallel_for(B, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> w(n);
        AngularKernel::DrawState st;
        for (std::size_t b = lo; b < hi; ++b) {
            std::mt19937_64 rng(derive_seed(cfg.seed, 0xb00 + b));
            if (cfg.unit_weights) {
                std::fill(w.begin(), w.end(), 1.0);
            } else {
                std::exponential_distribution<double> ed(1.0);
                for (std::size_t i = 0; i < n; ++i) w[i] = ed(rng);
            }
            kern.prepare(w.data(), st);
            double* row = bd.circle.data() + b * nc;
            kern.h_grid(st, grids.circle.grid, row);
            for (std::size_t j = 0; j < nc; ++j) {
                if (!std::isfinite(row[j])) {
                    errors[b] = "non-finite bootstrap value at draw " + std::to_string(b);
                    break;
                }
            }
            double* nrow = bd.neg_half.data() + b * nh;
            for (std::size_t j = 0; j < nh; ++j)
                nrow[j] = kern.h(st, -grids.half[j].q1, -grids.half[j].q2);
            bd.u1[b] = kern.h(st, -1.0, 0.0);
            bd.u2[b] = kern.h(st, 0.0, -1.0);
            bd.vp[b] = kern.h(st, rt, -rt);
            bd.vm[b] = kern.h(st, -rt, rt);
            if (sq) {
                double zr = 0.0, zb = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    zr += w[i] * sq->z_r[i];
                    zb += w[i] * sq->z_b[i];
                }
                bd.estar_r[b] = zr / (st.sum_w * st.mu_r);
                bd.estar_b[b] = zb / (st.sum_w * st.mu_b);
            }
            if (want_etilde) {
                bd.etilde[b] = minimize_profile(
                    [&](double w1, double w2) {
                        double hb = kern.h_vec(base, w1, w2);
                        return hb + factor * (kern.h_vec(st, w1, w2) - hb);
                    },
                    50.0, 1e-8);
            }
        }
    }, 4);
    for (const auto& e : errors)
        if (!e.empty()) throw numeric_error(e);

    double dmax = 0.0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < nc; ++j)
            dmax = std::max(dmax, std::abs(bd.circle[b * nc + j] - bd.base_circle[j]));
    bd.dev_circle_max = bd.sqrt_n * dmax;
    if (sq) {
        double de = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            de = std::max(de, std::abs(bd.estar_r[b] - sq->e_star.er));
            de = std::max(de, std::abs(bd.estar_b[b] - sq->e_star.eb));
        }
        bd.dev_estar_max = bd.sqrt_n * de;
    }
    return bd;
}

namespace {

// Active grid indices for max_q (q'e - h(q)) under perturbations bounded by
// `slack` in the h array: every index within 2*slack of the base max.
std::vector<std::uint32_t> active_indices(const DirectionGrid& grid, const std::vector<double>& h,
                                          const RiskPoint& e, double slack, double* base_max) {
    double m = -1e300;
    const std::size_t ng = grid.size();
    std::vector<double> val(ng);
    for (std::size_t j = 0; j < ng; ++j) {
        val[j] = dot(grid[j], e) - h[j];
        m = std::max(m, val[j]);
    }
    std::vector<std::uint32_t> act;
    for (std::size_t j = 0; j < ng; ++j)
        if (val[j] >= m - 2.0 * slack - 1e-12) act.push_back(static_cast<std::uint32_t>(j));
    *base_max = m;
    return act;
}

struct FrontierFunctional {
    // Directional-derivative draws of the frontier-membership functional at a
    // fixed point, with optional status-quo perturbation (the LDA case).
    static std::vector<double> draws(const StatGrids& g, const BootstrapDraws& bd,
                                     const RiskPoint& e, const StatusQuoRisk* sq) {
        const std::size_t B = bd.B;
        const std::size_t nc = g.circle.grid.size();
        const std::size_t nh = g.half.size();
        const double s = bd.step, f = bd.step * bd.sqrt_n;
        const double e_slack = sq ? 3.0 * s * bd.dev_estar_max : 0.0;

        double base_gap = 0.0;
        auto act_c = active_indices(g.circle.grid, bd.base_circle, e,
                                    s * bd.dev_circle_max + e_slack, &base_gap);
        // separation term: -h_C(e)(q) - h(-q); active set under the same logic
        std::vector<double> sep_base(nh);
        double base_sep = -1e300;
        for (std::size_t j = 0; j < nh; ++j) {
            sep_base[j] = -eval_h_C(e, g.half[j].q1, g.half[j].q2) - bd.base_neg_half[j];
            base_sep = std::max(base_sep, sep_base[j]);
        }
        double dev_neg_max = 0.0;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < nh; ++j)
                dev_neg_max = std::max(
                    dev_neg_max, std::abs(bd.neg_half[b * nh + j] - bd.base_neg_half[j]));
        dev_neg_max *= bd.sqrt_n;
        std::vector<std::uint32_t> act_h;
        for (std::size_t j = 0; j < nh; ++j)
            if (sep_base[j] >= base_sep - 2.0 * (s * dev_neg_max + 3.0 * e_slack) - 1e-12)
                act_h.push_back(static_cast<std::uint32_t>(j));

        const double phi_base = positive_part(base_gap) + negative_part(base_sep);
        std::vector<double> out(B);
        for (std::size_t b = 0; b < B; ++b) {
            RiskPoint ep = e;
            if (sq) {
                ep.er = sq->e_star.er + f * (bd.estar_r[b] - sq->e_star.er);
                ep.eb = sq->e_star.eb + f * (bd.estar_b[b] - sq->e_star.eb);
            }
            const double* row = bd.circle.data() + b * nc;
            double gap = -1e300;
            for (std::uint32_t j : act_c) {
                double ph = bd.base_circle[j] + f * (row[j] - bd.base_circle[j]);
                gap = std::max(gap, dot(g.circle.grid[j], ep) - ph);
            }
            const double* nrow = bd.neg_half.data() + b * nh;
            double sep = -1e300;
            for (std::uint32_t j : act_h) {
                double ph = bd.base_neg_half[j] + f * (nrow[j] - bd.base_neg_half[j]);
                sep = std::max(sep, -eval_h_C(ep, g.half[j].q1, g.half[j].q2) - ph);
            }
            out[b] = (positive_part(gap) + negative_part(sep) - phi_base) / s;
        }
        return out;
    }
};

TestResult frontier_style_test(const char* name, double statistic, const StatGrids& g,
                               const BootstrapDraws& bd, const RiskPoint& e,
                               const StatusQuoRisk* sq, double alpha, double varsigma) {
    auto d = FrontierFunctional::draws(g, bd, e, sq);
    TestResult r;
    r.test = name;
    r.statistic = statistic;
    r.alpha = alpha;
    r.varsigma = varsigma;
    r.draws = bd.B;
    r.step = bd.step;
    r.critical_value = quantile_sorted_copy(std::move(d), 1.0 - alpha + varsigma) + varsigma;
    r.reject = r.statistic > r.critical_value;
    return r;
}

}  // namespace

TestResult test_frontier_point(const SupportFunctionEstimate& sfe, const StatGrids& g,
                               const BootstrapDraws& bd, const RiskPoint& e, double alpha,
                               double varsigma) {
    return frontier_style_test("frontier-point", stat_frontier(sfe, g, e), g, bd, e, nullptr,
                               alpha, varsigma);
}

TestResult test_lda(const SupportFunctionEstimate& sfe, const StatGrids& g,
                    const BootstrapDraws& bd, const StatusQuoRisk& sq, double alpha,
                    double varsigma) {
    if (!bd.has_estar) throw input_error("bootstrap draws lack status-quo material");
    return frontier_style_test("lda", stat_lda(sfe, g, sq), g, bd, sq.e_star, &sq, alpha,
                               varsigma);
}

namespace {

// Per-point material for the weak-skew confidence set: the statistic and the
// derivative draws of sqrt(n)([max_q q'e - h]_+ + [u'e - h(u)]_-).
struct PointCS {
    double stat = 0.0;
    std::vector<double> draws;
    // screening bounds for the pair quantile, filled by finalize()
    double q = 0.0, dmin = 0.0, dmax = 0.0;

    void finalize(double beta) {
        std::vector<double> v(draws);
        std::size_t idx = static_cast<std::size_t>(std::ceil(beta * v.size()));
        idx = std::min(std::max<std::size_t>(idx, 1), v.size());
        std::nth_element(v.begin(), v.begin() + (idx - 1), v.end());
        q = v[idx - 1];
        dmin = *std::min_element(draws.begin(), draws.end());
        dmax = *std::max_element(draws.begin(), draws.end());
    }
};

// Pair retention t_a + t_b <= beta-quantile of (d_a + d_b), with constant-
// time screens: the quantile of the sum is between max(q_a + min_b,
// q_b + min_a) and min(q_a + max_b, q_b + max_a).
bool pair_retained_exact(const PointCS& a, const PointCS& b, double beta,
                         std::vector<double>& scratch) {
    double t = a.stat + b.stat;
    if (t <= std::max(a.q + b.dmin, b.q + a.dmin)) return true;
    if (t > std::min(a.q + b.dmax, b.q + a.dmax)) return false;
    const std::size_t B = a.draws.size();
    for (std::size_t k = 0; k < B; ++k) scratch[k] = a.draws[k] + b.draws[k];
    std::size_t idx = static_cast<std::size_t>(std::ceil(beta * B));
    idx = std::min(std::max<std::size_t>(idx, 1), B);
    std::nth_element(scratch.begin(), scratch.begin() + (idx - 1), scratch.end());
    return t <= scratch[idx - 1];
}

PointCS point_cs(const StatGrids& g, const BootstrapDraws& bd, const RiskPoint& e,
                 const Direction& u, double h_u_direct, double base_u,
                 const std::vector<double>& draws_u) {
    PointCS out;
    const std::size_t B = bd.B;
    const std::size_t nc = g.circle.grid.size();
    const double s = bd.step, f = bd.step * bd.sqrt_n;

    double gap_direct = max_support_gap(g.circle, e);
    out.stat = bd.sqrt_n * (positive_part(gap_direct) + negative_part(dot(u, e) - h_u_direct));

    double base_gap = 0.0;
    auto act = active_indices(g.circle.grid, bd.base_circle, e, s * bd.dev_circle_max, &base_gap);
    const double eq_base = dot(u, e) - base_u;
    const double phi_base = positive_part(base_gap) + negative_part(eq_base);
    out.draws.resize(B);
    for (std::size_t b = 0; b < B; ++b) {
        const double* row = bd.circle.data() + b * nc;
        double gap = -1e300;
        for (std::uint32_t j : act) {
            double ph = bd.base_circle[j] + f * (row[j] - bd.base_circle[j]);
            gap = std::max(gap, dot(g.circle.grid[j], e) - ph);
        }
        double eq = dot(u, e) - (base_u + f * (draws_u[b] - base_u));
        out.draws[b] = (positive_part(gap) + negative_part(eq) - phi_base) / s;
    }
    return out;
}

// clip polygon by halfplane a'z <= c
Polygon clip_halfplane(const Polygon& poly, double a1, double a2, double c) {
    Polygon out;
    const std::size_t m = poly.vertices.size();
    if (m == 0) return out;
    for (std::size_t i = 0; i < m; ++i) {
        const RiskPoint& p = poly.vertices[i];
        const RiskPoint& q = poly.vertices[(i + 1) % m];
        double dp = a1 * p.er + a2 * p.eb - c;
        double dq = a1 * q.er + a2 * q.eb - c;
        if (dp <= 0.0) out.vertices.push_back(p);
        if ((dp <= 0.0) != (dq <= 0.0)) {
            double t = dp / (dp - dq);
            out.vertices.push_back({p.er + t * (q.er - p.er), p.eb + t * (q.eb - p.eb)});
        }
    }
    return out;
}

struct CandidateBox {
    double r_lo, r_hi, b_lo, b_hi;
};

// Covering box for points retainable under a budget `bound` on the scaled
// statistic: the inflated feasible polygon clipped to the halfplane where the
// equality moment can still pass.
CandidateBox candidate_box(const StatGrids& g, const RiskPoint& center, double a1, double a2,
                           double level, double slack) {
    std::vector<double> h_infl(g.circle.h);
    for (auto& v : h_infl) v += slack;
    Polygon poly = halfspace_intersection(g.circle.grid, h_infl, 1e6);
    poly = clip_halfplane(poly, a1, a2, level + slack);
    CandidateBox box;
    if (poly.empty()) {
        box = {center.er - slack, center.er + slack, center.eb - slack, center.eb + slack};
    } else {
        auto bb = poly.bbox();
        box = {bb[0] - slack, bb[2] + slack, bb[1] - slack, bb[3] + slack};
    }
    return box;
}

}  // namespace

SkewOutput test_weak_skew(const SupportFunctionEstimate& sfe, const StatGrids& g,
                          const BootstrapDraws& bd, double alpha, std::size_t grid_per_axis,
                          const RiskPoint* true_R, const RiskPoint* true_B) {
    SkewOutput out;
    const std::size_t B = bd.B;
    const double beta = 1.0 - alpha;
    const double s = bd.step;

    RiskPoint Rhat = sfe.eval_support_set(dir_u1());
    RiskPoint Bhat = sfe.eval_support_set(dir_u2());

    // uniform bound on any pair critical value
    double dev_u1 = 0.0, dev_u2 = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        dev_u1 = std::max(dev_u1, std::abs(bd.u1[b] - bd.base_u1));
        dev_u2 = std::max(dev_u2, std::abs(bd.u2[b] - bd.base_u2));
    }
    dev_u1 *= bd.sqrt_n;
    dev_u2 *= bd.sqrt_n;
    const double cb = 2.0 * bd.dev_circle_max + dev_u1 + dev_u2 + 1.0;
    const double slack = cb / bd.sqrt_n;

    // candidate boxes: equality coordinate pinned near the support value, the
    // free coordinate covered by the inflated-polygon lens; the u1 equality
    // needs u1'e >= h(u1) - slack, i.e. e_r <= -h(u1) + slack
    CandidateBox boxR = candidate_box(g, Rhat, 1.0, 0.0, -g.h_u1, slack);
    boxR.r_lo = std::max(boxR.r_lo, -g.h_u1 - slack);
    boxR.r_hi = std::min(boxR.r_hi, -g.h_u1 + slack);
    CandidateBox boxB = candidate_box(g, Bhat, 0.0, 1.0, -g.h_u2, slack);
    boxB.b_lo = std::max(boxB.b_lo, -g.h_u2 - slack);
    boxB.b_hi = std::min(boxB.b_hi, -g.h_u2 + slack);

    out.grid_R = {{0.5 * (boxR.r_lo + boxR.r_hi), 0.5 * (boxR.b_lo + boxR.b_hi)},
                  0.5 * (boxR.r_hi - boxR.r_lo),
                  0.5 * (boxR.b_hi - boxR.b_lo),
                  grid_per_axis};
    out.grid_B = {{0.5 * (boxB.r_lo + boxB.r_hi), 0.5 * (boxB.b_lo + boxB.b_hi)},
                  0.5 * (boxB.r_hi - boxB.r_lo),
                  0.5 * (boxB.b_hi - boxB.b_lo),
                  grid_per_axis};

    auto collect = [&](const CandidateBox& box, const Direction& u, double h_u, double base_u,
                       const std::vector<double>& draws_u) {
        std::vector<std::pair<RiskPoint, PointCS>> kept;
        const std::size_t m = grid_per_axis;
        for (std::size_t ir = 0; ir < m; ++ir) {
            double er = box.r_lo + (box.r_hi - box.r_lo) * ir / static_cast<double>(m - 1);
            for (std::size_t ib = 0; ib < m; ++ib) {
                double eb = box.b_lo + (box.b_hi - box.b_lo) * ib / static_cast<double>(m - 1);
                RiskPoint e{er, eb};
                // cheap screen on the direct statistic before draws
                double gap_direct = max_support_gap(g.circle, e);
                double t = bd.sqrt_n *
                           (positive_part(gap_direct) + negative_part(dot(u, e) - h_u));
                if (t > cb) continue;
                PointCS cs = point_cs(g, bd, e, u, h_u, base_u, draws_u);
                cs.finalize(beta);
                kept.emplace_back(e, std::move(cs));
            }
        }
        return kept;
    };

    auto SR = collect(boxR, dir_u1(), g.h_u1, bd.base_u1, bd.u1);
    auto SB = collect(boxB, dir_u2(), g.h_u2, bd.base_u2, bd.u2);

    std::vector<double> sum(B);
    auto pair_retained = [&](const PointCS& a, const PointCS& b) {
        return pair_retained_exact(a, b, beta, sum);
    };

    // scan pairs in descending product order; the first retained pair fixes
    // the supremum of the product over the confidence set
    struct PairRef {
        double product;
        std::size_t i, j;
    };
    std::vector<PairRef> pairs;
    pairs.reserve(SR.size() * SB.size());
    for (std::size_t i = 0; i < SR.size(); ++i) {
        double pr = SR[i].first.eb - SR[i].first.er;  // (u1 - u2)' e
        for (std::size_t j = 0; j < SB.size(); ++j) {
            double pb = SB[j].first.eb - SB[j].first.er;
            pairs.push_back({pr * pb, i, j});
        }
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const PairRef& a, const PairRef& b) { return a.product > b.product; });
    out.cs_empty = true;
    out.sup_product = -1e300;
    for (const auto& pr : pairs) {
        if (pair_retained(SR[pr.i].second, SB[pr.j].second)) {
            out.cs_empty = false;
            out.sup_product = pr.product;
            break;
        }
    }

    if (true_R && true_B) {
        out.truth_checked = true;
        PointCS a = point_cs(g, bd, *true_R, dir_u1(), g.h_u1, bd.base_u1, bd.u1);
        PointCS b = point_cs(g, bd, *true_B, dir_u2(), g.h_u2, bd.base_u2, bd.u2);
        a.finalize(beta);
        b.finalize(beta);
        out.truth_covered = pair_retained(a, b);
    }

    TestResult r;
    r.test = "weak-skew";
    r.statistic = out.cs_empty ? 1e300 : -out.sup_product;
    r.critical_value = 0.0;
    r.alpha = alpha;
    r.varsigma = 0.0;
    r.draws = B;
    r.step = s;
    r.reject = r.statistic > r.critical_value;
    if (out.cs_empty) r.notes = "empty confidence set";
    out.result = r;
    return out;
}

double distance_value(DistanceKind k, const RiskPoint& a, const RiskPoint& b) {
    double dr = a.er - b.er, db = a.eb - b.eb;
    switch (k) {
        case DistanceKind::squared_euclidean:
            return dr * dr + db * db;
        case DistanceKind::euclidean:
            return std::sqrt(dr * dr + db * db);
        case DistanceKind::manhattan:
            return std::abs(dr) + std::abs(db);
        case DistanceKind::chebyshev:
            return std::max(std::abs(dr), std::abs(db));
    }
    return 0.0;
}

DistanceCI distance_to_F_ci(const SupportFunctionEstimate& sfe, const StatGrids& g,
                            const BootstrapDraws& bd, const StatusQuoRisk& sq, DistanceKind rho,
                            double alpha, std::size_t grid_per_axis) {
    if (!bd.has_estar || !bd.has_etilde)
        throw input_error("bootstrap draws lack status-quo or 45-degree material");
    DistanceCI out;
    out.alpha = alpha;
    const std::size_t B = bd.B;
    const double s = bd.step, f = bd.step * bd.sqrt_n;
    const double varsigma = 1e-3;
    out.varsigma = varsigma;

    double lo = 1e300, hi = -1e300;
    bool any = false;

    // 45-degree branch: test inversion of sqrt(n)|rho_hat - t|
    auto et = sfe.eval_h_Etilde();
    RiskPoint F_direct{-et.value, -et.value};
    out.point = distance_value(rho, sq.e_star, F_direct);
    if (!et.unbounded) {
        RiskPoint F_base{-bd.base_etilde, -bd.base_etilde};
        double phi_base = distance_value(rho, sq.e_star, F_base);
        std::vector<double> d(B);
        for (std::size_t b = 0; b < B; ++b) {
            RiskPoint ep{sq.e_star.er + f * (bd.estar_r[b] - sq.e_star.er),
                         sq.e_star.eb + f * (bd.estar_b[b] - sq.e_star.eb)};
            RiskPoint Fp{-bd.etilde[b], -bd.etilde[b]};
            d[b] = std::abs((distance_value(rho, ep, Fp) - phi_base) / s);
        }
        double c45 = quantile_sorted_copy(std::move(d), 1.0 - alpha + varsigma) + varsigma;
        double w = c45 / bd.sqrt_n;
        lo = std::min(lo, std::max(0.0, out.point - w));
        hi = std::max(hi, out.point + w);
        out.branch45 = true;
        any = true;
    }

    // halfspace branches: moment systems with support equality at v
    auto run_branch = [&](bool above) -> std::optional<std::array<double, 2>> {
        const double rt = 1.0 / std::sqrt(2.0);
        Direction v;
        v.q1 = above ? rt : -rt;
        v.q2 = above ? -rt : rt;
        double h_v = above ? g.h_vp : g.h_vm;
        double base_v = above ? bd.base_vp : bd.base_vm;
        const std::vector<double>& draws_v = above ? bd.vp : bd.vm;

        double dev_v = 0.0;
        for (std::size_t b = 0; b < B; ++b)
            dev_v = std::max(dev_v, std::abs(draws_v[b] - base_v));
        dev_v *= bd.sqrt_n;
        const double cb = 2.0 * (bd.dev_circle_max + dev_v + 2.0 * bd.dev_estar_max) + 1.0;
        const double slack = cb / bd.sqrt_n;

        // e~ candidates around e*
        out.grid_e = {sq.e_star, slack, slack, grid_per_axis};
        // F~ candidates: inflated polygon near the v-support face, on the
        // branch's side of the 45-degree line
        CandidateBox boxF = candidate_box(g, sfe.eval_support_set(v), -v.q1, -v.q2,
                                          -(h_v)-0.0, slack);
        (above ? out.grid_Fp : out.grid_Fm) = {
            {0.5 * (boxF.r_lo + boxF.r_hi), 0.5 * (boxF.b_lo + boxF.b_hi)},
            0.5 * (boxF.r_hi - boxF.r_lo),
            0.5 * (boxF.b_hi - boxF.b_lo),
            grid_per_axis};

        const double beta = 1.0 - alpha;

        // e-part: statistic and draws per candidate (no grid max involved)
        struct ECand {
            RiskPoint e;
            PointCS cs;
        };
        std::vector<ECand> ecands;
        const std::size_t m = grid_per_axis;
        for (std::size_t ir = 0; ir < m; ++ir) {
            double er = sq.e_star.er - slack + 2.0 * slack * ir / static_cast<double>(m - 1);
            for (std::size_t ib = 0; ib < m; ++ib) {
                double eb = sq.e_star.eb - slack + 2.0 * slack * ib / static_cast<double>(m - 1);
                double st = bd.sqrt_n *
                            (std::abs(sq.e_star.er - er) + std::abs(sq.e_star.eb - eb));
                if (st > cb) continue;
                ECand ec;
                ec.e = {er, eb};
                ec.cs.stat = st;
                double phi_e_base = std::abs(sq.e_star.er - er) + std::abs(sq.e_star.eb - eb);
                ec.cs.draws.resize(B);
                for (std::size_t b = 0; b < B; ++b) {
                    double er_p = sq.e_star.er + f * (bd.estar_r[b] - sq.e_star.er);
                    double eb_p = sq.e_star.eb + f * (bd.estar_b[b] - sq.e_star.eb);
                    ec.cs.draws[b] =
                        (std::abs(er_p - er) + std::abs(eb_p - eb) - phi_e_base) / s;
                }
                ec.cs.finalize(beta);
                ecands.push_back(std::move(ec));
            }
        }
        if (ecands.empty()) return std::nullopt;

        // F-part candidates with statistic and draws
        struct FCand {
            RiskPoint e;
            PointCS cs;
        };
        std::vector<FCand> fcands;
        for (std::size_t ir = 0; ir < m; ++ir) {
            double er = boxF.r_lo + (boxF.r_hi - boxF.r_lo) * ir / static_cast<double>(m - 1);
            for (std::size_t ib = 0; ib < m; ++ib) {
                double eb = boxF.b_lo + (boxF.b_hi - boxF.b_lo) * ib / static_cast<double>(m - 1);
                if (above ? (er > eb) : (er < eb)) continue;  // closure of the halfspace
                RiskPoint e{er, eb};
                double gap_direct = max_support_gap(g.circle, e);
                double st = bd.sqrt_n * (positive_part(gap_direct) +
                                         negative_part(dot(v, e) - h_v));
                if (st > cb) continue;
                FCand fc;
                fc.e = e;
                fc.cs = point_cs(g, bd, e, v, h_v, base_v, draws_v);
                fc.cs.finalize(beta);
                fcands.push_back(std::move(fc));
            }
        }
        if (fcands.empty()) return std::nullopt;

        std::vector<double> sum(B);
        double blo = 1e300, bhi = -1e300;
        bool kept = false;
        for (const auto& ec : ecands) {
            for (const auto& fc : fcands) {
                if (ec.cs.stat + fc.cs.stat > cb) continue;
                if (pair_retained_exact(ec.cs, fc.cs, beta, sum)) {
                    double val = distance_value(rho, ec.e, fc.e);
                    blo = std::min(blo, val);
                    bhi = std::max(bhi, val);
                    kept = true;
                }
            }
        }
        if (!kept) return std::nullopt;
        return std::array<double, 2>{blo, bhi};
    };

    if (auto r = run_branch(true)) {
        lo = std::min(lo, (*r)[0]);
        hi = std::max(hi, (*r)[1]);
        out.branch_plus = true;
        any = true;
    }
    if (auto r = run_branch(false)) {
        lo = std::min(lo, (*r)[0]);
        hi = std::max(hi, (*r)[1]);
        out.branch_minus = true;
        any = true;
    }

    if (!any) {
        out.empty = true;
        return out;
    }
    out.lo = lo;
    out.hi = hi;
    return out;
}

double BootstrapLaw::quantile(double beta) const { return quantile_sorted_copy(values, beta); }

BootstrapLaw multiplier_bootstrap(const SupportFunctionEstimate& sfe, const StatusQuoRisk* sq,
                                  const std::function<double(const HView&, const RiskPoint&)>& phi,
                                  const BootstrapConfig& cfg, int threads) {
    const std::size_t n = sfe.n();
    cfg.validate(n);
    const std::size_t B = cfg.draws;
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double s = cfg.resolve_step(n);
    const double factor = s * sqrt_n;

    AngularKernel kern(sfe.material());
    AngularKernel::DrawState base;
    kern.prepare(nullptr, base);
    RiskPoint e0 = sq ? sq->e_star : RiskPoint{0.0, 0.0};
    HView base_view(kern, base, nullptr, 0.0);
    const double phi_base = phi(base_view, e0);

    BootstrapLaw law;
    law.values.assign(B, 0.0);
    std::vector<std::string> errors(B);
    parallel_for(B, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> w(n);
        AngularKernel::DrawState st;
        for (std::size_t b = lo; b < hi; ++b) {
            std::mt19937_64 rng(derive_seed(cfg.seed, 0xb00 + b));
            if (cfg.unit_weights) {
                std::fill(w.begin(), w.end(), 1.0);
            } else {
                std::exponential_distribution<double> ed(1.0);
                for (std::size_t i = 0; i < n; ++i) w[i] = ed(rng);
            }
            kern.prepare(w.data(), st);
            RiskPoint ep = e0;
            if (sq) {
                double zr = 0.0, zb = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    zr += w[i] * sq->z_r[i];
                    zb += w[i] * sq->z_b[i];
                }
                double er = zr / (st.sum_w * st.mu_r);
                double eb = zb / (st.sum_w * st.mu_b);
                ep.er = e0.er + factor * (er - e0.er);
                ep.eb = e0.eb + factor * (eb - e0.eb);
            }
            HView view(kern, base, &st, factor);
            double val = (phi(view, ep) - phi_base) / s;
            if (!std::isfinite(val)) {
                errors[b] = "non-finite bootstrap draw " + std::to_string(b);
                continue;
            }
            law.values[b] = val;
        }
    }, 4);
    for (const auto& e : errors)
        if (!e.empty()) throw numeric_error(e);
    return law;
}

}  // namespace faf
