#pragma once

/**
 * @file optimizer.hpp
 * @brief Long-only maximum-Sharpe and ESG-weighted-Sharpe allocation.
 *
 * Both problems are solved over the simplex {w : w_i >= 0, sum w_i = 1}:
 *
 *   MV:      maximise  S(w)        = (mu'w - r_f) / sqrt(w' C w)
 *   ESG-MV:  maximise  E(w) * S(w),  E(w) = esg'w
 *
 * The solver is a spectral projected gradient method (Barzilai-Borwein step
 * lengths with a nonmonotone Armijo search, Euclidean projection onto the
 * simplex) restarted from several seeded points. The best start wins; ties
 * go to lower risk, then to the lexicographically smaller weight vector.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esgport/error.hpp"
#include "esgport/market_data.hpp"
#include "esgport/parallel.hpp"
#include "esgport/random.hpp"

namespace esgport::optimizer {

inline constexpr double kTradingDaysPerYear = 252.0;

/// Annualised inputs of one optimisation problem.
struct MarketInputs {
    std::vector<std::string> symbols;
    Eigen::VectorXd muAnnual;
    Eigen::MatrixXd covAnnual;
    Eigen::VectorXd esg;
    double riskFree = 0.0;

    std::size_t size() const { return symbols.size(); }

    void validate() const {
        const auto n = static_cast<Eigen::Index>(symbols.size());
        if (n == 0) throw Error(ErrorKind::DimensionMismatch, "market has no assets");
        if (muAnnual.size() != n || esg.size() != n || covAnnual.rows() != n || covAnnual.cols() != n)
            throw Error(ErrorKind::DimensionMismatch, "market vectors must all have length " + std::to_string(n));
        if (!muAnnual.allFinite() || !covAnnual.allFinite() || !esg.allFinite() || !std::isfinite(riskFree))
            throw Error(ErrorKind::BadNumber, "market inputs must be finite");
        const double scale = std::max(1.0, covAnnual.cwiseAbs().maxCoeff());
        if ((covAnnual - covAnnual.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw Error(ErrorKind::NotPositiveSemidefinite, "covariance is not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covAnnual, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
            throw Error(ErrorKind::NotPositiveSemidefinite,
                        "smallest eigenvalue " + csv::format_double(eig.eigenvalues().minCoeff()));
    }
};

/// mu = 252 * daily mean, C = 252 * daily covariance.
inline MarketInputs annualize(const ReturnsPanel& panel, const EsgTable& esg, double risk_free = 0.0) {
    if (panel.symbols.empty()) throw Error(ErrorKind::EmptyInput, "returns panel has no assets");
    MarketInputs market;
    market.symbols = panel.symbols;
    market.muAnnual = kTradingDaysPerYear * panel.meanDaily;
    market.covAnnual = kTradingDaysPerYear * panel.covDaily;
    market.esg.resize(static_cast<Eigen::Index>(panel.symbols.size()));
    for (std::size_t i = 0; i < panel.symbols.size(); ++i) {
        auto score = esg.score(panel.symbols[i]);
        if (!score) throw Error(ErrorKind::MissingEsg, panel.symbols[i]);
        market.esg(static_cast<Eigen::Index>(i)) = *score;
    }
    market.riskFree = risk_free;
    return market;
}

enum class SharpeStatus { Finite, Undefined, Infinite };

enum class Objective { Sharpe, EsgSharpe };

inline const char* to_string(Objective objective) { return objective == Objective::Sharpe ? "MV" : "ESG-MV"; }

struct Portfolio {
    Eigen::VectorXd weights;
    double returnAnnual = 0.0;
    double riskAnnual = 0.0;
    double sharpe = 0.0; ///< plain Sharpe ratio, whatever the objective
    SharpeStatus sharpeStatus = SharpeStatus::Finite;
    double esgMean = 0.0;
    double objectiveValue = 0.0; ///< maximised quantity: S, or E * S
    bool converged = false;
    std::size_t iterations = 0;
    bool nonPositiveSharpe = false; ///< optimum has S <= 0; still returned
};

struct SolverConfig {
    std::size_t maxIterations = 500;
    double tolerance = 1e-9;
    std::size_t multistarts = 8;
    std::uint64_t seed = 0;
    unsigned threads = 0;

    void validate() const {
        if (maxIterations < 1 || multistarts < 1 || !(tolerance > 0.0))
            throw Error(ErrorKind::InvalidConfig, "solver settings must be positive");
    }
};

/// Evaluates return, risk, Sharpe and mean ESG for a weight vector.
inline Portfolio portfolio_stats(const Eigen::VectorXd& weights, const MarketInputs& market) {
    const auto n = static_cast<Eigen::Index>(market.size());
    if (weights.size() != n || market.muAnnual.size() != n || market.esg.size() != n || market.covAnnual.rows() != n ||
        market.covAnnual.cols() != n)
        throw Error(ErrorKind::DimensionMismatch, "weights and market sizes differ");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(weights(i) >= -1e-10 && weights(i) <= 1.0 + 1e-10))
            throw Error(ErrorKind::InvalidConfig, "weight " + csv::format_double(weights(i)) + " outside [0, 1]");
        sum += weights(i);
    }
    if (std::abs(sum - 1.0) > 1e-8)
        throw Error(ErrorKind::InvalidConfig, "weights sum to " + csv::format_double(sum));

    Portfolio p;
    p.weights = weights;
    double ret = 0.0, esg = 0.0, var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        ret += weights(i) * market.muAnnual(i);
        esg += weights(i) * market.esg(i);
        double row = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) row += market.covAnnual(i, j) * weights(j);
        var += weights(i) * row;
    }
    p.returnAnnual = ret;
    p.esgMean = esg;
    p.riskAnnual = std::sqrt(std::max(var, 0.0));
    const double excess = ret - market.riskFree;
    if (p.riskAnnual > 0.0) {
        p.sharpe = excess / p.riskAnnual;
        p.sharpeStatus = SharpeStatus::Finite;
    } else if (excess == 0.0) {
        p.sharpe = std::numeric_limits<double>::quiet_NaN();
        p.sharpeStatus = SharpeStatus::Undefined;
    } else {
        p.sharpe = excess > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        p.sharpeStatus = SharpeStatus::Infinite;
    }
    p.objectiveValue = p.sharpe;
    p.nonPositiveSharpe = !(p.sharpe > 0.0);
    return p;
}

/// Euclidean projection onto the probability simplex.
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const auto n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0, theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumulative += u[static_cast<std::size_t>(j)];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Smooth objective (as a quantity to minimise) with its analytic gradient.
/// Portfolio variance is floored at kVarianceFloor so the ratio stays finite
/// at zero-risk points.
class NegativeObjective {
public:
    static constexpr double kVarianceFloor = 1e-18;

    NegativeObjective(const MarketInputs& market, Objective kind) : market_(market), kind_(kind) {}

    double value(const Eigen::VectorXd& w) const {
        const double s = std::sqrt(std::max(w.dot(market_.covAnnual * w), kVarianceFloor));
        const double sharpe = (market_.muAnnual.dot(w) - market_.riskFree) / s;
        return kind_ == Objective::Sharpe ? -sharpe : -market_.esg.dot(w) * sharpe;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& w) const {
        const Eigen::VectorXd cw = market_.covAnnual * w;
        const double q = w.dot(cw);
        const double s = std::sqrt(std::max(q, kVarianceFloor));
        const double excess = market_.muAnnual.dot(w) - market_.riskFree;
        Eigen::VectorXd grad_sharpe = market_.muAnnual / s;
        if (q > kVarianceFloor) grad_sharpe -= (excess / (s * s * s)) * cw;
        if (kind_ == Objective::Sharpe) return -grad_sharpe;
        const double sharpe = excess / s;
        return -(market_.esg * sharpe + market_.esg.dot(w) * grad_sharpe);
    }

private:
    const MarketInputs& market_;
    Objective kind_;
};

namespace detail {

struct LocalResult {
    Eigen::VectorXd weights;
    double value = 0.0; ///< negative objective
    bool converged = false;
    std::size_t iterations = 0;
};

inline double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    return (project_to_simplex(x - g) - x).cwiseAbs().maxCoeff();
}

/// Spectral projected gradient from one starting point.
inline LocalResult spectral_projected_gradient(const NegativeObjective& f, Eigen::VectorXd x,
                                               const SolverConfig& config) {
    constexpr double kStepMin = 1e-12, kStepMax = 1e12;
    constexpr double kArmijo = 1e-4;
    constexpr std::size_t kMemory = 10;
    constexpr double kStationary = 1e-12;
    constexpr double kLoosePg = 1e-7;

    x = project_to_simplex(x);
    double fx = f.value(x);
    Eigen::VectorXd g = f.gradient(x);
    LocalResult result{x, fx, false, 0};

    double pg = projected_gradient_norm(x, g);
    double step = std::clamp(pg > 0.0 ? 1.0 / pg : kStepMax, kStepMin, kStepMax);
    std::deque<double> recent{fx};

    for (std::size_t it = 1; it <= config.maxIterations; ++it) {
        result.iterations = it;
        if (pg <= kStationary) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd d = project_to_simplex(x - step * g) - x;
        const double slope = g.dot(d);
        const double reference = *std::max_element(recent.begin(), recent.end());
        double alpha = 1.0;
        Eigen::VectorXd trial = x + d;
        double f_trial = f.value(trial);
        for (int backtrack = 0; backtrack < 60 && f_trial > reference + kArmijo * alpha * slope; ++backtrack) {
            // safeguarded quadratic interpolation
            const double denom = 2.0 * (f_trial - fx - alpha * slope);
            double next = denom > 0.0 ? -slope * alpha * alpha / denom : 0.5 * alpha;
            alpha = (next >= 0.1 * alpha && next <= 0.9 * alpha) ? next : 0.5 * alpha;
            trial = x + alpha * d;
            f_trial = f.value(trial);
        }
        if (!(f_trial <= reference + kArmijo * alpha * slope)) break; // no descent possible at working precision

        Eigen::VectorXd g_trial = f.gradient(trial);
        const Eigen::VectorXd s = trial - x;
        const Eigen::VectorXd y = g_trial - g;
        const double sy = s.dot(y);
        step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, kStepMin, kStepMax) : kStepMax;

        const double change = std::abs(f_trial - fx);
        x = project_to_simplex(trial);
        fx = f.value(x);
        g = f.gradient(x);
        pg = projected_gradient_norm(x, g);
        recent.push_back(fx);
        if (recent.size() > kMemory) recent.pop_front();
        if (fx < result.value) result = {x, fx, false, it};

        if (change <= config.tolerance * std::max(1.0, std::abs(fx)) && pg <= kLoosePg) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) result.converged = projected_gradient_norm(result.weights, f.gradient(result.weights)) <= kLoosePg;
    result.iterations = std::max<std::size_t>(result.iterations, 1);
    return result;
}

/// Flat Dirichlet draw via normalised exponentials.
inline Eigen::VectorXd dirichlet_start(std::size_t n, std::uint64_t seed, std::size_t start) {
    Rng rng(derive_seed(seed, start));
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = -std::log1p(-uniform_unit(rng));
    return w / w.sum();
}

/// Clamp to [0, 1] and renormalise so output weights sum to one.
inline Eigen::VectorXd clean_weights(Eigen::VectorXd w) {
    w = w.cwiseMax(0.0).cwiseMin(1.0);
    const double sum = w.sum();
    if (sum > 0.0) w /= sum;
    return w;
}

/// Strict preference used to merge multistart results.
inline bool preferred(const Portfolio& a, const Portfolio& b) {
    const double eps = 1e-12 * std::max(1.0, std::max(std::abs(a.objectiveValue), std::abs(b.objectiveValue)));
    if (a.objectiveValue > b.objectiveValue + eps) return true;
    if (b.objectiveValue > a.objectiveValue + eps) return false;
    if (a.riskAnnual != b.riskAnnual) return a.riskAnnual < b.riskAnnual;
    return std::lexicographical_compare(a.weights.data(), a.weights.data() + a.weights.size(), b.weights.data(),
                                        b.weights.data() + b.weights.size());
}

inline void check_not_degenerate(const MarketInputs& market) {
    if (market.covAnnual.cwiseAbs().maxCoeff() == 0.0 && market.muAnnual.cwiseAbs().maxCoeff() == 0.0)
        throw Error(ErrorKind::DegenerateMarket, "every asset has zero risk and zero return");
}

} // namespace detail

inline Portfolio optimize(const MarketInputs& market, Objective kind, const SolverConfig& config = {}) {
    market.validate();
    config.validate();
    detail::check_not_degenerate(market);
    const std::size_t n = market.size();

    auto finish = [&](Eigen::VectorXd w, bool converged, std::size_t iterations) {
        Portfolio p = portfolio_stats(detail::clean_weights(std::move(w)), market);
        p.objectiveValue = kind == Objective::Sharpe ? p.sharpe : p.esgMean * p.sharpe;
        p.converged = converged;
        p.iterations = iterations;
        return p;
    };

    if (n == 1) return finish(Eigen::VectorXd::Ones(1), true, 0);

    NegativeObjective objective(market, kind);
    std::vector<Portfolio> candidates(config.multistarts);
    parallel_for(
        config.multistarts,
        [&](std::size_t start) {
            Eigen::VectorXd x0 = start == 0 ? Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / n)
                                            : detail::dirichlet_start(n, config.seed, start);
            auto local = detail::spectral_projected_gradient(objective, std::move(x0), config);
            candidates[start] = finish(std::move(local.weights), local.converged, local.iterations);
        },
        config.threads);

    Portfolio best = candidates.front();
    for (std::size_t k = 1; k < candidates.size(); ++k)
        if (detail::preferred(candidates[k], best)) best = candidates[k];
    return best;
}

inline Portfolio optimize_mv(const MarketInputs& market, const SolverConfig& config = {}) {
    return optimize(market, Objective::Sharpe, config);
}

inline Portfolio optimize_esg_mv(const MarketInputs& market, const SolverConfig& config = {}) {
    return optimize(market, Objective::EsgSharpe, config);
}

} // namespace esgport::optimizer
