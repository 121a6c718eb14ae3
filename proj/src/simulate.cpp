#include "faf/simulate.hpp"

#include <cmath>
#include <mutex>

namespace faf {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Beta(2,2) by inverse CDF: F(x) = 3x^2 - 2x^3 solved by bisection-guarded
// Newton to 1e-6.
double beta22_icdf(double u) {
    double lo = 0.0, hi = 1.0, x = 0.5;
    for (int it = 0; it < 100; ++it) {
        double f = x * x * (3.0 - 2.0 * x) - u;
        if (f > 0.0) hi = x; else lo = x;
        double d = 6.0 * x * (1.0 - x);
        double step = d > 1e-12 ? f / d : 0.0;
        double nx = x - step;
        if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
        if (std::abs(nx - x) < 1e-6) { x = nx; break; }
        x = nx;
    }
    return x;
}

// Standard normal truncated to [-3,3] by rejection.
double trunc_normal(std::mt19937_64& rng, std::normal_distribution<double>& nd) {
    for (;;) {
        double z = nd(rng);
        if (z >= -3.0 && z <= 3.0) return z;
    }
}

void draw_covariates(double* x, std::mt19937_64& rng,
                     std::normal_distribution<double>& nd,
                     std::uniform_real_distribution<double>& ud) {
    for (std::size_t j = 0; j < DgpSpec::d_x; ++j) {
        if (j == 1) x[j] = ud(rng);
        else if (j == 2) x[j] = beta22_icdf(ud(rng));
        else x[j] = trunc_normal(rng, nd);
    }
}

}  // namespace

double DgpSpec::p_outcome(Group g, const double* x) const {
    if (kind == DgpKind::balanced) {
        if (g == Group::r) return logistic(x[0] + x[1] + 0.5 * x[2]);
        return logistic(-x[0] - 0.5 * x[1] + x[3]);
    }
    if (g == Group::r) return logistic(2.0 * (x[0] + x[1] + x[2]));
    return logistic(0.7 * (x[0] + 0.5 * x[1] + 0.6 * x[3]));
}

std::array<double, 2> DgpSpec::delta_theta(const double* x) const {
    double pr = p_outcome(Group::r, x);
    double pb = p_outcome(Group::b, x);
    return {p_group_r * (1.0 - 2.0 * pr), (1.0 - p_group_r) * (1.0 - 2.0 * pb)};
}

Dataset generate(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw input_error("generate needs n >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<double> y(n), x(n * DgpSpec::d_x);
    std::vector<std::uint8_t> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* xi = x.data() + i * DgpSpec::d_x;
        draw_covariates(xi, rng, nd, ud);
        bool is_r = ud(rng) < DgpSpec::p_group_r;
        g[i] = is_r ? 0 : 1;
        double p = dgp.p_outcome(is_r ? Group::r : Group::b, xi);
        y[i] = ud(rng) < p ? 1.0 : 0.0;
    }
    return Dataset(std::move(y), std::move(g), std::move(x), DgpSpec::d_x);
}

double StatusQuoLogit::score(const double* x, std::size_t d) const {
    double t = beta[0];
    for (std::size_t j = 0; j < d && j + 1 < beta.size(); ++j) t += beta[j + 1] * x[j];
    return logistic(t);
}

std::vector<double> StatusQuoLogit::scores(const Dataset& data) const {
    std::vector<double> out(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) out[i] = score(data.x_row(i), data.d_x());
    return out;
}

StatusQuoLogit status_quo_logit(std::uint64_t seed) {
    Dataset bal = generate(DgpSpec::balanced(), 5000, derive_seed(seed, 0));
    Dataset skw = generate(DgpSpec::r_skew(), 5000, derive_seed(seed, 1));
    std::size_t n = bal.n() + skw.n();
    std::size_t d = DgpSpec::d_x;
    std::vector<double> X((d + 1) * n);
    std::vector<double> Y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Dataset& src = i < bal.n() ? bal : skw;
        std::size_t k = i < bal.n() ? i : i - bal.n();
        X[i * (d + 1)] = 1.0;
        for (std::size_t j = 0; j < d; ++j) X[i * (d + 1) + 1 + j] = src.x(k, j);
        Y[i] = src.y(k);
    }
    // Newton iterations on the unpenalized logistic log-likelihood.
    std::size_t p = d + 1;
    std::vector<double> beta(p, 0.0), grad(p), hess(p * p), step(p);
    double prev_nll = 1e300;
    for (int it = 0; it < 50; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        double nll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = X.data() + i * p;
            double t = 0.0;
            for (std::size_t j = 0; j < p; ++j) t += beta[j] * xi[j];
            double mu = logistic(t);
            nll -= Y[i] * std::log(std::max(mu, 1e-300)) +
                   (1.0 - Y[i]) * std::log(std::max(1.0 - mu, 1e-300));
            double r = mu - Y[i];
            double w = mu * (1.0 - mu);
            for (std::size_t j = 0; j < p; ++j) {
                grad[j] += r * xi[j];
                for (std::size_t k = j; k < p; ++k) hess[j * p + k] += w * xi[j] * xi[k];
            }
        }
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = 0; k < j; ++k) hess[j * p + k] = hess[k * p + j];
        // Cholesky solve of H step = grad, with a small ridge for safety.
        for (std::size_t j = 0; j < p; ++j) hess[j * p + j] += 1e-10 * n;
        std::vector<double> L(hess);
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = 0; k < j; ++k) {
                double s = L[j * p + k];
                for (std::size_t m = 0; m < k; ++m) s -= L[j * p + m] * L[k * p + m];
                L[j * p + k] = s / L[k * p + k];
            }
            double s = L[j * p + j];
            for (std::size_t m = 0; m < j; ++m) s -= L[j * p + m] * L[j * p + m];
            if (s <= 0.0) throw numeric_error("status-quo logit: Hessian not positive definite");
            L[j * p + j] = std::sqrt(s);
        }
        for (std::size_t j = 0; j < p; ++j) {
            double s = grad[j];
            for (std::size_t m = 0; m < j; ++m) s -= L[j * p + m] * step[m];
            step[j] = s / L[j * p + j];
        }
        for (std::size_t jj = p; jj-- > 0;) {
            double s = step[jj];
            for (std::size_t m = jj + 1; m < p; ++m) s -= L[m * p + jj] * step[m];
            step[jj] = s / L[jj * p + jj];
        }
        double max_step = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            beta[j] -= step[j];
            max_step = std::max(max_step, std::abs(step[j]));
        }
        if (max_step < 1e-10 || std::abs(prev_nll - nll) < 1e-10 * n) {
            StatusQuoLogit out;
            out.beta = beta;
            return out;
        }
        prev_nll = nll;
    }
    throw numeric_error("status-quo logit did not converge");
}

OracleGeometry oracle_geometry(const DgpSpec& dgp, std::size_t m_draws, std::uint64_t seed,
                               const DirectionGrid& grid, const StatusQuoLogit* policy,
                               int threads) {
    if (m_draws < 100000) throw input_error("oracle geometry needs m_draws >= 1e5");
    const std::size_t chunk = 100000;
    const std::size_t nchunks = (m_draws + chunk - 1) / chunk;

    // Streamed generation: per chunk accumulate grid support sums and the
    // policy risks; keep (p_r, p_b) as floats for the 45-degree optimization.
    std::vector<float> pr_all(m_draws), pb_all(m_draws);
    const std::size_t ng = grid.size();
    std::vector<std::vector<double>> chunk_h(nchunks);
    std::vector<std::array<double, 2>> chunk_estar(nchunks, {0.0, 0.0});

    parallel_for(nchunks, threads, [&](std::size_t c0, std::size_t c1) {
        std::vector<double> x(DgpSpec::d_x);
        for (std::size_t c = c0; c < c1; ++c) {
            std::mt19937_64 rng(derive_seed(seed, c));
            std::normal_distribution<double> nd(0.0, 1.0);
            std::uniform_real_distribution<double> ud(0.0, 1.0);
            std::size_t lo = c * chunk, hi = std::min(m_draws, (c + 1) * chunk);
            std::vector<double> hsum(ng, 0.0);
            double er = 0.0, eb = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                draw_covariates(x.data(), rng, nd, ud);
                double pr = dgp.p_outcome(Group::r, x.data());
                double pb = dgp.p_outcome(Group::b, x.data());
                pr_all[i] = static_cast<float>(pr);
                pb_all[i] = static_cast<float>(pb);
                // M * theta_0 = (p_r, p_b); M * (theta_1 - theta_0) = (1-2p_r, 1-2p_b)
                double ar = 1.0 - 2.0 * pr, ab = 1.0 - 2.0 * pb;
                for (std::size_t j = 0; j < ng; ++j) {
                    double q1 = grid[j].q1, q2 = grid[j].q2;
                    double base = q1 * pr + q2 * pb;
                    double k = q1 * ar + q2 * ab;
                    hsum[j] += k > 0.0 ? base + k : base;
                }
                if (policy) {
                    double a = policy->score(x.data(), DgpSpec::d_x);
                    er += a * (1.0 - pr) + (1.0 - a) * pr;
                    eb += a * (1.0 - pb) + (1.0 - a) * pb;
                }
            }
            chunk_h[c] = std::move(hsum);
            chunk_estar[c] = {er, eb};
        }
    }, 1);

    OracleGeometry out;
    out.grid = grid;
    out.h_grid.assign(ng, 0.0);
    double er = 0.0, eb = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) {
        for (std::size_t j = 0; j < ng; ++j) out.h_grid[j] += chunk_h[c][j];
        er += chunk_estar[c][0];
        eb += chunk_estar[c][1];
    }
    for (std::size_t j = 0; j < ng; ++j) out.h_grid[j] /= static_cast<double>(m_draws);
    if (policy) out.e_star = RiskPoint{er / m_draws, eb / m_draws};

    // Support sets at u1, u2 and the h-value of any unit direction, all from
    // the stored probabilities.
    auto s_at = [&](double q1, double q2) {
        double sr = 0.0, sb = 0.0;
        const std::size_t bs = 1 << 16;
        for (std::size_t lo = 0; lo < m_draws; lo += bs) {
            std::size_t hi2 = std::min(m_draws, lo + bs);
            double br = 0.0, bb = 0.0;
            for (std::size_t i = lo; i < hi2; ++i) {
                double pr = pr_all[i], pb = pb_all[i];
                double ar = 1.0 - 2.0 * pr, ab = 1.0 - 2.0 * pb;
                double k = q1 * ar + q2 * ab;
                if (k > 0.0) {
                    br += 1.0 - pr;
                    bb += 1.0 - pb;
                } else {
                    br += pr;
                    bb += pb;
                }
            }
            sr += br;
            sb += bb;
        }
        return RiskPoint{sr / m_draws, sb / m_draws};
    };
    out.R = s_at(-1.0, 0.0);
    out.B = s_at(0.0, -1.0);

    auto h_unit = [&](double q1, double q2) {
        double s = 0.0;
        const std::size_t bs = 1 << 16;
        for (std::size_t lo = 0; lo < m_draws; lo += bs) {
            std::size_t hi2 = std::min(m_draws, lo + bs);
            double acc = 0.0;
            for (std::size_t i = lo; i < hi2; ++i) {
                double pr = pr_all[i], pb = pb_all[i];
                double base = q1 * pr + q2 * pb;
                double k = q1 * (1.0 - 2.0 * pr) + q2 * (1.0 - 2.0 * pb);
                acc += k > 0.0 ? base + k : base;
            }
            s += acc;
        }
        return s / m_draws;
    };
    // h at u1 - c (1,-1), positively homogeneous extension.
    auto g_of_c = [&](double c) {
        double w1 = -1.0 - c, w2 = c;
        double nrm = std::sqrt(w1 * w1 + w2 * w2);
        return nrm * h_unit(w1 / nrm, w2 / nrm);
    };
    const double c_bound = 50.0;
    const int npts = 201;
    double best_c = 0.0, best_v = 1e300;
    int best_i = 0;
    for (int i = 0; i < npts; ++i) {
        double c = -c_bound + 2.0 * c_bound * i / (npts - 1);
        double v = g_of_c(c);
        if (v < best_v) {
            best_v = v;
            best_c = c;
            best_i = i;
        }
    }
    if (best_i == 0 || best_i == npts - 1) {
        out.f_unbounded = true;
        out.h_tilde = best_v;
        out.c_star = best_c;
    } else {
        double step = 2.0 * c_bound / (npts - 1);
        double lo = best_c - step, hi = best_c + step;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = lo, b = hi;
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        double f1 = g_of_c(x1), f2 = g_of_c(x2);
        while (b - a > 1e-8) {
            if (f1 < f2) {
                b = x2; x2 = x1; f2 = f1;
                x1 = b - gr * (b - a);
                f1 = g_of_c(x1);
            } else {
                a = x1; x1 = x2; f1 = f2;
                x2 = a + gr * (b - a);
                f2 = g_of_c(x2);
            }
        }
        out.c_star = 0.5 * (a + b);
        out.h_tilde = g_of_c(out.c_star);
    }
    out.F = RiskPoint{-out.h_tilde, -out.h_tilde};
    return out;
}

}  // namespace faf
