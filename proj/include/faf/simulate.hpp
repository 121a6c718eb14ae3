#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "faf/core.hpp"

namespace faf {

enum class DgpKind { balanced, r_skew };

// The two simulation designs: 20 covariates with X2 ~ Unif(0,1),
// X3 ~ Beta(2,2), the rest standard normal truncated to [-3,3], and
// G ~ Bern(0.6) independent of X (G = 1 mapped to r). The outcome is
// Bernoulli with a group-specific logistic index.
struct DgpSpec {
    DgpKind kind = DgpKind::balanced;
    static constexpr std::size_t d_x = 20;
    static constexpr double p_group_r = 0.6;

    // P(Y = 1 | G = g, X = x).
    double p_outcome(Group g, const double* x) const;
    // Closed-form nuisance: delta_theta^g(x) = mu_g * (1 - 2 * p_g(x)) under
    // classification loss.
    std::array<double, 2> delta_theta(const double* x) const;

    static DgpSpec balanced() { return DgpSpec{DgpKind::balanced}; }
    static DgpSpec r_skew() { return DgpSpec{DgpKind::r_skew}; }
};

// Deterministic draws given (spec, n, seed); single RNG stream in row order.
Dataset generate(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);

// Unpenalized logistic score a*(x) = logistic(b0 + b'x), trained once on a
// 50/50 mixture of the two designs; frozen thereafter.
struct StatusQuoLogit {
    std::vector<double> beta;  // intercept first

    double score(const double* x, std::size_t d) const;
    std::vector<double> scores(const Dataset& data) const;
};

StatusQuoLogit status_quo_logit(std::uint64_t seed);

// Population geometry computed from the closed-form nuisance on a fresh
// m-draw sample: best group-specific points, fairest point, feasible-set
// support values over a grid, and the risks of a fixed score policy.
struct OracleGeometry {
    RiskPoint R, B, F;
    double h_tilde = 0.0;   // support value of the 45-degree restriction at u1
    double c_star = 0.0;
    bool f_unbounded = false;
    std::optional<RiskPoint> e_star;   // present when a policy was supplied
    std::vector<double> h_grid;        // support values per grid direction
    DirectionGrid grid;
};

OracleGeometry oracle_geometry(const DgpSpec& dgp, std::size_t m_draws, std::uint64_t seed,
                               const DirectionGrid& grid,
                               const StatusQuoLogit* policy = nullptr,
                               int threads = 1);

// Monte Carlo driver reproducing the simulation table layout.
struct McConfig {
    DgpKind dgp = DgpKind::balanced;
    std::size_t n = 1000;
    std::size_t replications = 1;
    bool run_skew = true;
    bool run_lda = true;
    bool run_dist = false;
    double alpha = 0.05;
    std::size_t folds = 5;
    std::size_t grid_circle = 1000;
    std::size_t grid_half = 500;
    std::size_t grid_pareto = 250;
    std::size_t bootstrap_draws = 500;
    double varsigma = 1e-3;
    std::uint64_t master_seed = 1;
    std::size_t oracle_draws = 1000000;   // for the population targets
    std::uint64_t status_quo_seed = 7;
    int threads = 1;
    bool use_oracle_learner = false;      // lasso by default
};

struct McCell {
    std::size_t trials = 0;
    std::size_t rejections = 0;
    double rate() const { return trials ? static_cast<double>(rejections) / trials : 0.0; }
    double mc_se() const {
        if (!trials) return 0.0;
        double p = rate();
        return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    }
};

struct McResult {
    McConfig cfg;
    OracleGeometry oracle;
    RiskPoint e_star_true;         // mixture-logit risks under this DGP
    double dist_true = 0.0;        // squared Euclidean distance of e* to F
    McCell skew_noncover;          // true (R,B) outside its confidence set
    McCell skew_reject;
    McCell lda_R, lda_B, lda_mid, lda_estar;
    McCell dist_R, dist_B, dist_mid, dist_estar;
    std::size_t failures = 0;      // replications that threw; excluded with count
    std::vector<std::string> failure_messages;
};

McResult run_mc(const McConfig& cfg);

}  // namespace faf
