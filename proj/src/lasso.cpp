#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "faf/nuisance.hpp"

namespace faf {
namespace detail {

int class_id(bool is_r, double y) {
    int base = is_r ? 0 : 2;
    return base + (y == 1.0 ? 0 : 1);
}

std::array<double, 4> MultinomialLassoModel::probs(const double* x) const {
    const std::size_t d = mean.size();
    const std::size_t nc = classes.size();
    double eta[4];
    double emax = -1e300;
    for (std::size_t c = 0; c < nc; ++c) {
        double t = b0[c];
        const double* bc = beta.data() + c * d;
        for (std::size_t j = 0; j < d; ++j) {
            if (sd[j] > 0.0) t += bc[j] * (x[j] - mean[j]) / sd[j];
        }
        eta[c] = t;
        emax = std::max(emax, t);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
        eta[c] = std::exp(eta[c] - emax);
        denom += eta[c];
    }
    std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < nc; ++c) out[classes[c]] = eta[c] / denom;
    return out;
}

std::array<double, 2> MultinomialLassoModel::delta_theta(const double* x) const {
    auto p = probs(x);
    return {p[1] - p[0], p[3] - p[2]};
}

namespace {

struct Standardizer {
    std::vector<double> mean, sd;
};

Standardizer standardize(const Dataset& data, std::vector<double>& z) {
    const std::size_t n = data.n(), d = data.d_x();
    Standardizer st;
    st.mean.assign(d, 0.0);
    st.sd.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) st.mean[j] += data.x(i, j);
    for (std::size_t j = 0; j < d; ++j) st.mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) st.sd[j] += sqr(data.x(i, j) - st.mean[j]);
    for (std::size_t j = 0; j < d; ++j) st.sd[j] = std::sqrt(st.sd[j] / static_cast<double>(n));
    z.assign(n * d, 0.0);
    // column-major so coordinate sweeps stream contiguously
    for (std::size_t j = 0; j < d; ++j) {
        if (st.sd[j] == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) z[j * n + i] = (data.x(i, j) - st.mean[j]) / st.sd[j];
    }
    return st;
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Multinomial fit state over the compact class set.
struct MnState {
    std::size_t n = 0, d = 0, nc = 0;
    const double* z = nullptr;              // column-major standardized design
    std::vector<std::uint8_t> yclass;       // compact class per row
    std::vector<double> eta;                // nc x n
    std::vector<double> expeta;             // nc x n
    std::vector<double> denom;              // n
    std::vector<double> b0;                 // nc
    std::vector<double> beta;               // nc x d
    std::vector<double> counts;             // per-class counts
    std::vector<int> classes;               // compact -> class id

    void refresh_exp() {
        for (std::size_t i = 0; i < n; ++i) denom[i] = 0.0;
        for (std::size_t c = 0; c < nc; ++c) {
            double* e = expeta.data() + c * n;
            const double* h = eta.data() + c * n;
            for (std::size_t i = 0; i < n; ++i) {
                e[i] = std::exp(h[i]);
                denom[i] += e[i];
            }
        }
    }

    void recenter() {
        double m = std::accumulate(b0.begin(), b0.end(), 0.0) / static_cast<double>(nc);
        for (std::size_t c = 0; c < nc; ++c) {
            b0[c] -= m;
            double* h = eta.data() + c * n;
            for (std::size_t i = 0; i < n; ++i) h[i] -= m;
        }
        refresh_exp();
    }

    double penalized_objective(double lambda) const {
        double nll = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            nll += std::log(denom[i]) - eta[yclass[i] * n + i];
        nll /= static_cast<double>(n);
        double pen = 0.0;
        for (double b : beta) pen += std::abs(b);
        return nll + lambda * pen;
    }
};

// One majorization step for class block c at penalty lambda: coordinate
// descent on the curvature-1/4 quadratic upper bound, over the given
// coordinate set (d == intercept appended as index d). Returns max
// coefficient change.
double mn_class_block(MnState& s, std::size_t c, double lambda,
                      const std::vector<std::uint32_t>& coords,
                      std::vector<double>& res) {
    const std::size_t n = s.n, d = s.d;
    double* etac = s.eta.data() + c * n;
    double* ec = s.expeta.data() + c * n;
    // residual of the working response: res_i = 4 * (y_ic - p_ic) initially
    for (std::size_t i = 0; i < n; ++i) {
        double p = ec[i] / s.denom[i];
        double y = s.yclass[i] == c ? 1.0 : 0.0;
        res[i] = 4.0 * (y - p);
    }
    double* bc = s.beta.data() + c * d;
    double max_change = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int cycle = 0; cycle < 50; ++cycle) {
        double cyc_change = 0.0;
        for (std::uint32_t j : coords) {
            if (j == d) {  // intercept, unpenalized, unit column
                double g = 0.0;
                for (std::size_t i = 0; i < n; ++i) g += res[i];
                double delta = g * inv_n;
                if (delta != 0.0) {
                    s.b0[c] += delta;
                    for (std::size_t i = 0; i < n; ++i) res[i] -= delta;
                    cyc_change = std::max(cyc_change, std::abs(delta));
                }
                continue;
            }
            const double* zj = s.z + static_cast<std::size_t>(j) * n;
            double g = 0.0;
            for (std::size_t i = 0; i < n; ++i) g += zj[i] * res[i];
            // (1/(4n)) z'res + beta/4, thresholded, rescaled by 4
            double a = 0.25 * (g * inv_n) + 0.25 * bc[j];
            double bnew = 4.0 * soft_threshold(a, lambda);
            double delta = bnew - bc[j];
            if (delta != 0.0) {
                bc[j] = bnew;
                for (std::size_t i = 0; i < n; ++i) res[i] -= delta * zj[i];
                cyc_change = std::max(cyc_change, std::abs(delta));
            }
        }
        max_change = std::max(max_change, cyc_change);
        if (cyc_change < 1e-10) break;
    }
    // commit: eta_c rises by (4u - res); refresh this block's exp and denom
    for (std::size_t i = 0; i < n; ++i) {
        double p = ec[i] / s.denom[i];
        double y = s.yclass[i] == c ? 1.0 : 0.0;
        double delta = 4.0 * (y - p) - res[i];
        etac[i] += delta;
        double enew = std::exp(etac[i]);
        s.denom[i] += enew - ec[i];
        ec[i] = enew;
    }
    return max_change;
}

// Full gradient of the unpenalized NLL wrt standardized coefficients.
void mn_gradient(const MnState& s, std::vector<double>& grad) {
    const std::size_t n = s.n, d = s.d;
    grad.assign(s.nc * d, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < s.nc; ++c) {
        const double* ec = s.expeta.data() + c * n;
        double* gc = grad.data() + c * d;
        for (std::size_t j = 0; j < d; ++j) {
            const double* zj = s.z + j * n;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double p = ec[i] / s.denom[i];
                double y = s.yclass[i] == c ? 1.0 : 0.0;
                acc += (p - y) * zj[i];
            }
            gc[j] = acc * inv_n;
        }
    }
}

struct MnPathPoint {
    std::vector<double> b0, beta;
    std::size_t sweeps = 0;
};

// Lasso path with warm starts and an active-set strategy. Throws when a
// penalty point fails to converge within max_sweeps.
std::vector<MnPathPoint> mn_path(MnState& s, const std::vector<double>& lambdas,
                                 const NuisanceLearner& cfg, const char* where) {
    const std::size_t n = s.n, d = s.d;
    std::vector<double> res(n);
    std::vector<double> grad;
    std::vector<std::uint32_t> all_coords(d + 1);
    for (std::size_t j = 0; j <= d; ++j) all_coords[j] = static_cast<std::uint32_t>(j);
    std::vector<MnPathPoint> path;
    path.reserve(lambdas.size());

    for (double lambda : lambdas) {
        std::size_t sweeps = 0;
        double prev_obj = s.penalized_objective(lambda);
        bool converged = false;
        double last_change = 0.0;
        while (sweeps < cfg.max_sweeps) {
            // active coordinates: nonzero anywhere in the class block, plus
            // the intercept; a full pass runs when the active pass stalls
            bool full_pass = (sweeps % 8 == 0);
            double sweep_change = 0.0;
            for (std::size_t c = 0; c < s.nc; ++c) {
                if (full_pass) {
                    sweep_change = std::max(sweep_change, mn_class_block(s, c, lambda, all_coords, res));
                } else {
                    std::vector<std::uint32_t> act;
                    act.reserve(d + 1);
                    const double* bc = s.beta.data() + c * d;
                    for (std::size_t j = 0; j < d; ++j)
                        if (bc[j] != 0.0) act.push_back(static_cast<std::uint32_t>(j));
                    act.push_back(static_cast<std::uint32_t>(d));
                    sweep_change = std::max(sweep_change, mn_class_block(s, c, lambda, act, res));
                }
            }
            ++sweeps;
            s.recenter();
            double obj = s.penalized_objective(lambda);
            if (obj > prev_obj + 1e-8 * (1.0 + std::abs(prev_obj)))
                throw numeric_error(std::string(where) + ": penalized objective increased within a sweep");
            prev_obj = obj;
            last_change = sweep_change;
            if (sweep_change < cfg.tol) {
                if (!full_pass) {
                    // confirm on a full KKT pass before declaring convergence
                    mn_gradient(s, grad);
                    bool viol = false;
                    for (std::size_t c = 0; c < s.nc && !viol; ++c)
                        for (std::size_t j = 0; j < d && !viol; ++j)
                            if (s.beta[c * d + j] == 0.0 &&
                                std::abs(grad[c * d + j]) > lambda * (1.0 + 1e-6) + 1e-12)
                                viol = true;
                    if (!viol) {
                        converged = true;
                        break;
                    }
                    // force a full pass next sweep
                    double ch = 0.0;
                    for (std::size_t c = 0; c < s.nc; ++c)
                        ch = std::max(ch, mn_class_block(s, c, lambda, all_coords, res));
                    ++sweeps;
                    s.recenter();
                    double obj2 = s.penalized_objective(lambda);
                    if (obj2 > prev_obj + 1e-8 * (1.0 + std::abs(prev_obj)))
                        throw numeric_error(std::string(where) +
                                            ": penalized objective increased within a sweep");
                    prev_obj = obj2;
                    if (ch < cfg.tol) {
                        converged = true;
                        break;
                    }
                } else {
                    converged = true;
                    break;
                }
            }
        }
        if (!converged)
            throw numeric_error(std::string(where) + ": no convergence after " +
                                std::to_string(cfg.max_sweeps) +
                                " sweeps, last max change " + std::to_string(last_change));
        path.push_back(MnPathPoint{s.b0, s.beta, sweeps});
    }
    return path;
}

MnState mn_init(const Dataset& data, const std::vector<double>& z) {
    MnState s;
    s.n = data.n();
    s.d = data.d_x();
    s.z = z.data();
    // compact class set over present classes
    std::array<std::size_t, 4> count{0, 0, 0, 0};
    std::vector<std::uint8_t> raw(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        double y = data.y(i);
        if (y != 0.0 && y != 1.0)
            throw input_error("multinomial learner requires binary 0/1 outcomes");
        int cid = class_id(data.is_r(i), y);
        raw[i] = static_cast<std::uint8_t>(cid);
        ++count[cid];
    }
    std::array<int, 4> compact{-1, -1, -1, -1};
    std::vector<int> classes;
    for (int cid = 0; cid < 4; ++cid) {
        if (count[cid] > 0) {
            compact[cid] = static_cast<int>(classes.size());
            classes.push_back(cid);
        }
    }
    s.nc = classes.size();
    s.yclass.resize(s.n);
    for (std::size_t i = 0; i < s.n; ++i) s.yclass[i] = static_cast<std::uint8_t>(compact[raw[i]]);
    s.b0.assign(s.nc, 0.0);
    s.beta.assign(s.nc * s.d, 0.0);
    s.eta.assign(s.nc * s.n, 0.0);
    s.expeta.assign(s.nc * s.n, 0.0);
    s.denom.assign(s.n, 0.0);
    s.counts.assign(s.nc, 0.0);
    for (std::size_t c = 0; c < s.nc; ++c) s.counts[c] = static_cast<double>(count[classes[c]]);
    // intercept-only start at the log frequencies, centered
    double logmean = 0.0;
    for (std::size_t c = 0; c < s.nc; ++c) logmean += std::log(s.counts[c] / s.n);
    logmean /= static_cast<double>(s.nc);
    for (std::size_t c = 0; c < s.nc; ++c) {
        s.b0[c] = std::log(s.counts[c] / s.n) - logmean;
        double* h = s.eta.data() + c * s.n;
        for (std::size_t i = 0; i < s.n; ++i) h[i] = s.b0[c];
    }
    s.refresh_exp();
    s.classes = classes;
    return s;
}

std::vector<double> lambda_path(double lambda_max, const NuisanceLearner& cfg) {
    std::vector<double> out;
    if (cfg.lambda_override) {
        out.push_back(*cfg.lambda_override);
        return out;
    }
    const std::size_t m = std::max<std::size_t>(cfg.path_size, 2);
    out.reserve(m);
    double lmin = lambda_max * cfg.lambda_min_ratio;
    for (std::size_t t = 0; t < m; ++t) {
        double frac = static_cast<double>(t) / static_cast<double>(m - 1);
        out.push_back(lambda_max * std::pow(lmin / lambda_max, frac));
    }
    return out;
}

// Held-out multinomial deviance of a fitted path point.
double mn_deviance(const MnPathPoint& pt, const std::vector<int>& classes,
                   const Standardizer& st, const Dataset& val) {
    MultinomialLassoModel m;
    m.mean = st.mean;
    m.sd = st.sd;
    m.classes = classes;
    m.b0 = pt.b0;
    m.beta = pt.beta;
    double dev = 0.0;
    for (std::size_t i = 0; i < val.n(); ++i) {
        auto p = m.probs(val.x_row(i));
        int cid = class_id(val.is_r(i), val.y(i));
        dev -= std::log(std::max(p[cid], 1e-12));
    }
    return dev;
}

}  // namespace

MultinomialLassoModel fit_multinomial_lasso(const Dataset& data, const NuisanceLearner& cfg,
                                            std::uint64_t seed) {
    std::vector<double> z;
    Standardizer st = standardize(data, z);
    MnState s = mn_init(data, z);

    // lambda_max: largest unpenalized-gradient entry at the intercept-only fit
    std::vector<double> grad;
    mn_gradient(s, grad);
    double lambda_max = 0.0;
    for (double g : grad) lambda_max = std::max(lambda_max, std::abs(g));
    if (lambda_max <= 0.0) lambda_max = 1.0;
    std::vector<double> lambdas = lambda_path(lambda_max, cfg);

    std::size_t chosen = 0;
    if (lambdas.size() > 1) {
        // nested cross-validation on the shared lambda sequence
        FoldAssignment cv = assign_folds(data.n(), cfg.cv_folds, derive_seed(seed, 91));
        std::vector<double> dev(lambdas.size(), 0.0);
        for (std::size_t k = 0; k < cv.K; ++k) {
            Dataset train = data.subset(cv.complement_rows(k));
            Dataset val = data.subset(cv.fold_rows(k));
            std::vector<double> zk;
            Standardizer stk = standardize(train, zk);
            MnState sk = mn_init(train, zk);
            auto path = mn_path(sk, lambdas, cfg, "multinomial lasso (cv)");
            for (std::size_t t = 0; t < lambdas.size(); ++t)
                dev[t] += mn_deviance(path[t], sk.classes, stk, val);
        }
        for (std::size_t t = 1; t < lambdas.size(); ++t)
            if (dev[t] < dev[chosen]) chosen = t;
    }

    std::vector<double> final_lambdas(lambdas.begin(), lambdas.begin() + chosen + 1);
    auto path = mn_path(s, final_lambdas, cfg, "multinomial lasso");
    MultinomialLassoModel out;
    out.mean = st.mean;
    out.sd = st.sd;
    out.classes = s.classes;
    out.b0 = path.back().b0;
    out.beta = path.back().beta;
    out.lambda = final_lambdas.back();
    for (const auto& pt : path) out.sweeps += pt.sweeps;
    return out;
}

GaussianLassoModel fit_gaussian_lasso(const Dataset& data, const std::vector<double>& target,
                                      const NuisanceLearner& cfg, std::uint64_t seed) {
    const std::size_t n = data.n(), d = data.d_x();
    std::vector<double> z;
    Standardizer st = standardize(data, z);

    struct State {
        double b0 = 0.0;
        std::vector<double> beta;
    };
    // residual-maintaining coordinate descent for one lambda, warm started
    auto fit_path = [&](const std::vector<double>& zz, const std::vector<double>& t,
                        std::size_t nn, const std::vector<double>& lambdas)
        -> std::vector<State> {
        State s;
        s.beta.assign(d, 0.0);
        double tmean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(nn);
        s.b0 = tmean;
        std::vector<double> res(nn);
        for (std::size_t i = 0; i < nn; ++i) res[i] = t[i] - s.b0;
        std::vector<State> path;
        const double inv_n = 1.0 / static_cast<double>(nn);
        for (double lambda : lambdas) {
            std::size_t sweeps = 0;
            for (; sweeps < cfg.max_sweeps; ++sweeps) {
                double change = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double* zj = zz.data() + j * nn;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < nn; ++i) dot += zj[i] * res[i];
                    double norm2 = 0.0;
                    for (std::size_t i = 0; i < nn; ++i) norm2 += zj[i] * zj[i];
                    if (norm2 == 0.0) continue;
                    double a = dot * inv_n + (norm2 * inv_n) * s.beta[j];
                    double bnew = soft_threshold(a, lambda) / (norm2 * inv_n);
                    double delta = bnew - s.beta[j];
                    if (delta != 0.0) {
                        s.beta[j] = bnew;
                        for (std::size_t i = 0; i < nn; ++i) res[i] -= delta * zj[i];
                        change = std::max(change, std::abs(delta));
                    }
                }
                double g = std::accumulate(res.begin(), res.end(), 0.0) * inv_n;
                if (g != 0.0) {
                    s.b0 += g;
                    for (std::size_t i = 0; i < nn; ++i) res[i] -= g;
                    change = std::max(change, std::abs(g));
                }
                if (change < cfg.tol) break;
            }
            if (sweeps >= cfg.max_sweeps)
                throw numeric_error("gaussian lasso: no convergence");
            path.push_back(s);
        }
        return path;
    };

    double tmean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);
    double lambda_max = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double* zj = z.data() + j * n;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += zj[i] * (target[i] - tmean);
        lambda_max = std::max(lambda_max, std::abs(dot) / static_cast<double>(n));
    }
    if (lambda_max <= 0.0) lambda_max = 1.0;
    std::vector<double> lambdas = lambda_path(lambda_max, cfg);

    std::size_t chosen = 0;
    if (lambdas.size() > 1) {
        FoldAssignment cv = assign_folds(n, cfg.cv_folds, derive_seed(seed, 92));
        std::vector<double> sse(lambdas.size(), 0.0);
        for (std::size_t k = 0; k < cv.K; ++k) {
            auto tr_rows = cv.complement_rows(k);
            auto va_rows = cv.fold_rows(k);
            Dataset train = data.subset(tr_rows);
            std::vector<double> t_tr(tr_rows.size());
            for (std::size_t i = 0; i < tr_rows.size(); ++i) t_tr[i] = target[tr_rows[i]];
            std::vector<double> zk;
            Standardizer stk = standardize(train, zk);
            auto path = fit_path(zk, t_tr, tr_rows.size(), lambdas);
            for (std::size_t t = 0; t < lambdas.size(); ++t) {
                for (std::size_t v : va_rows) {
                    double pred = path[t].b0;
                    for (std::size_t j = 0; j < d; ++j)
                        if (stk.sd[j] > 0.0)
                            pred += path[t].beta[j] * (data.x(v, j) - stk.mean[j]) / stk.sd[j];
                    sse[t] += sqr(target[v] - pred);
                }
            }
        }
        for (std::size_t t = 1; t < lambdas.size(); ++t)
            if (sse[t] < sse[chosen]) chosen = t;
    }

    std::vector<double> final_lambdas(lambdas.begin(), lambdas.begin() + chosen + 1);
    auto path = fit_path(z, target, n, final_lambdas);
    GaussianLassoModel out;
    out.mean = st.mean;
    out.sd = st.sd;
    out.b0 = path.back().b0;
    out.beta = path.back().beta;
    out.lambda = final_lambdas.back();
    return out;
}

double GaussianLassoModel::predict(const double* x) const {
    double t = b0;
    for (std::size_t j = 0; j < mean.size(); ++j)
        if (sd[j] > 0.0) t += beta[j] * (x[j] - mean[j]) / sd[j];
    return t;
}

}  // namespace detail
}  // namespace faf
