#pragma once

/**
 * @file forecast.hpp
 * @brief Random-forest price forecasting on lagged adjusted closes.
 *
 * Each tree is a CART regression tree grown greedily on a bootstrap sample
 * with variance-reduction splits and per-split feature subsampling. The
 * forest prediction is the mean of the tree outputs, so it never leaves the
 * range of the training targets.
 *
 * Every tree draws from its own generator seeded from (seed, tree index);
 * parallel and serial fits therefore produce identical models.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "esgport/error.hpp"
#include "esgport/parallel.hpp"
#include "esgport/random.hpp"

namespace esgport::forecast {

struct LagConfig {
    std::size_t lags = 20;
    std::size_t horizon = 42; ///< about two months of trading days

    void validate() const {
        if (lags < 1) throw Error(ErrorKind::InvalidConfig, "lags must be >= 1");
        if (horizon < 1) throw Error(ErrorKind::InvalidConfig, "horizon must be >= 1");
    }
};

struct ForestConfig {
    std::size_t nTrees = 10000;
    std::optional<std::size_t> maxDepth; ///< nullopt grows until minLeaf stops it
    std::size_t minLeaf = 2;
    double featureFraction = 1.0 / 3.0;
    bool bootstrap = true;
    std::uint64_t seed = 0;
    unsigned threads = 0; ///< 0 = hardware concurrency; never affects results

    void validate() const {
        if (nTrees < 1) throw Error(ErrorKind::InvalidConfig, "nTrees must be >= 1");
        if (!(featureFraction > 0.0 && featureFraction <= 1.0))
            throw Error(ErrorKind::InvalidConfig, "featureFraction must lie in (0, 1]");
        if (minLeaf < 1) throw Error(ErrorKind::InvalidConfig, "minLeaf must be >= 1");
    }

    std::size_t features_per_split(std::size_t width) const {
        auto m = static_cast<std::size_t>(featureFraction * static_cast<double>(width));
        return std::clamp<std::size_t>(m, 1, width);
    }
};

/// Row-major design matrix of lag windows with one target per row.
struct SupervisedData {
    std::size_t width = 0;
    std::vector<double> features;
    std::vector<double> targets;

    std::size_t rows() const { return targets.size(); }
    std::span<const double> row(std::size_t i) const { return {features.data() + i * width, width}; }
    double at(std::size_t i, std::size_t f) const { return features[i * width + f]; }
};

/// Chronological 4:1 split: the first ceil(0.8 n) points train.
inline std::pair<std::vector<double>, std::vector<double>> split_train_test(std::span<const double> series) {
    if (series.size() < 10) throw Error(ErrorKind::TooShort, "train/test split needs at least 10 points");
    const std::size_t n_train = (4 * series.size() + 4) / 5;
    return {std::vector<double>(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(n_train)),
            std::vector<double>(series.begin() + static_cast<std::ptrdiff_t>(n_train), series.end())};
}

/// Row t holds (y[t-lags], ..., y[t-1]) with target y[t].
inline SupervisedData make_supervised(std::span<const double> series, const LagConfig& lag) {
    lag.validate();
    if (series.size() <= lag.lags)
        throw Error(ErrorKind::TooShort, "series of length " + std::to_string(series.size()) + " cannot supply " +
                                             std::to_string(lag.lags) + " lags");
    SupervisedData data;
    data.width = lag.lags;
    const std::size_t rows = series.size() - lag.lags;
    data.features.reserve(rows * lag.lags);
    data.targets.reserve(rows);
    for (std::size_t t = lag.lags; t < series.size(); ++t) {
        data.features.insert(data.features.end(), series.begin() + static_cast<std::ptrdiff_t>(t - lag.lags),
                             series.begin() + static_cast<std::ptrdiff_t>(t));
        data.targets.push_back(series[t]);
    }
    return data;
}

/// Binary regression tree stored as a flat node array; node 0 is the root.
class RegressionTree {
public:
    struct Node {
        int feature = -1; ///< -1 marks a leaf
        double threshold = 0.0; ///< rows with x[feature] <= threshold go left
        double value = 0.0; ///< leaf mean
        std::uint32_t left = 0;
        std::uint32_t right = 0;
    };

    double predict(std::span<const double> x) const {
        std::uint32_t k = 0;
        while (nodes_[k].feature >= 0)
            k = x[static_cast<std::size_t>(nodes_[k].feature)] <= nodes_[k].threshold ? nodes_[k].left : nodes_[k].right;
        return nodes_[k].value;
    }

    const std::vector<Node>& nodes() const { return nodes_; }

    std::size_t depth() const { return depth_from(0); }

    friend bool operator==(const RegressionTree& a, const RegressionTree& b) {
        return std::equal(a.nodes_.begin(), a.nodes_.end(), b.nodes_.begin(), b.nodes_.end(),
                          [](const Node& x, const Node& y) {
                              return x.feature == y.feature && x.threshold == y.threshold && x.value == y.value &&
                                     x.left == y.left && x.right == y.right;
                          });
    }

private:
    friend class TreeBuilder;

    std::size_t depth_from(std::uint32_t k) const {
        if (nodes_[k].feature < 0) return 0;
        return 1 + std::max(depth_from(nodes_[k].left), depth_from(nodes_[k].right));
    }

    std::vector<Node> nodes_;
};

inline Rng tree_rng(std::uint64_t seed, std::size_t tree_index) { return Rng(derive_seed(seed, tree_index)); }

/// Bootstrap sample of row indices, drawn with replacement.
inline std::vector<std::size_t> draw_bootstrap(Rng& rng, std::size_t rows) {
    std::vector<std::size_t> sample(rows);
    for (auto& i : sample) i = static_cast<std::size_t>(uniform_index(rng, rows));
    return sample;
}

/// Greedy CART growth. Split candidates are scanned in ascending feature
/// index and ascending threshold and only a strictly better score replaces
/// the incumbent, so ties resolve to the lowest feature, then threshold.
/// Node statistics are summed in (value, target) sorted order, which makes
/// the tree independent of the order rows arrive in.
class TreeBuilder {
public:
    TreeBuilder(const SupervisedData& data, const ForestConfig& config, Rng& rng)
        : data_(data), config_(config), rng_(rng), per_split_(config.features_per_split(data.width)) {}

    RegressionTree build(std::vector<std::size_t> rows) {
        tree_.nodes_.clear();
        tree_.nodes_.emplace_back();
        grow(0, std::move(rows), 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double score = 0.0;
    };

    void grow(std::uint32_t node, std::vector<std::size_t> rows, std::size_t depth) {
        std::vector<double> targets(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) targets[k] = data_.targets[rows[k]];
        std::sort(targets.begin(), targets.end());
        const double lo = targets.front(), hi = targets.back();
        const double sum = std::accumulate(targets.begin(), targets.end(), 0.0);
        const auto n = static_cast<double>(rows.size());

        const bool depth_cap = config_.maxDepth && depth >= *config_.maxDepth;
        if (depth_cap || rows.size() < 2 * config_.minLeaf || lo == hi) {
            make_leaf(node, std::clamp(sum / n, lo, hi));
            return;
        }

        auto split = best_split(rows);
        const double parent = sum * sum / n;
        if (split.feature < 0 || !(split.score - parent > 1e-12 * std::max(1.0, std::abs(parent)))) {
            make_leaf(node, std::clamp(sum / n, lo, hi));
            return;
        }

        std::vector<std::size_t> left, right;
        for (auto r : rows)
            (data_.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        auto left_id = static_cast<std::uint32_t>(tree_.nodes_.size());
        tree_.nodes_.emplace_back();
        auto right_id = static_cast<std::uint32_t>(tree_.nodes_.size());
        tree_.nodes_.emplace_back();
        auto& self = tree_.nodes_[node];
        self.feature = split.feature;
        self.threshold = split.threshold;
        self.left = left_id;
        self.right = right_id;
        grow(left_id, std::move(left), depth + 1);
        grow(right_id, std::move(right), depth + 1);
    }

    void make_leaf(std::uint32_t node, double value) {
        tree_.nodes_[node].feature = -1;
        tree_.nodes_[node].value = value;
    }

    std::vector<std::size_t> sample_features() {
        std::vector<std::size_t> all(data_.width);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t k = 0; k < per_split_; ++k) {
            auto pick = k + static_cast<std::size_t>(uniform_index(rng_, data_.width - k));
            std::swap(all[k], all[pick]);
        }
        all.resize(per_split_);
        std::sort(all.begin(), all.end());
        return all;
    }

    Split best_split(const std::vector<std::size_t>& rows) {
        Split best;
        const std::size_t n = rows.size();
        const std::size_t min_leaf = config_.minLeaf;
        pairs_.resize(n);
        for (auto f : sample_features()) {
            for (std::size_t k = 0; k < n; ++k) pairs_[k] = {data_.at(rows[k], f), data_.targets[rows[k]]};
            std::sort(pairs_.begin(), pairs_.end());
            if (pairs_.front().first == pairs_.back().first) continue;
            double total = 0.0;
            for (const auto& p : pairs_) total += p.second;
            double left_sum = 0.0;
            for (std::size_t k = 1; k < n; ++k) {
                left_sum += pairs_[k - 1].second;
                if (k < min_leaf || n - k < min_leaf) continue;
                if (!(pairs_[k - 1].first < pairs_[k].first)) continue;
                const double right_sum = total - left_sum;
                const double score = left_sum * left_sum / static_cast<double>(k) +
                                     right_sum * right_sum / static_cast<double>(n - k);
                if (best.feature < 0 || score > best.score) {
                    double mid = pairs_[k - 1].first + (pairs_[k].first - pairs_[k - 1].first) / 2.0;
                    if (!(mid < pairs_[k].first)) mid = pairs_[k - 1].first;
                    best = {static_cast<int>(f), mid, score};
                }
            }
        }
        return best;
    }

    const SupervisedData& data_;
    const ForestConfig& config_;
    Rng& rng_;
    std::size_t per_split_;
    std::vector<std::pair<double, double>> pairs_;
    RegressionTree tree_;
};

/// Fitted forest plus the configuration it was trained with.
class ForecastModel {
public:
    ForecastModel(std::vector<RegressionTree> trees, LagConfig lag, ForestConfig forest,
                  std::pair<double, double> target_range)
        : trees_(std::move(trees)), lag_(lag), forest_(forest), range_(target_range) {}

    const std::vector<RegressionTree>& trees() const { return trees_; }
    const LagConfig& lag_config() const { return lag_; }
    const ForestConfig& forest_config() const { return forest_; }
    std::pair<double, double> train_target_range() const { return range_; }

    std::vector<double> predict_trees(std::span<const double> x) const {
        std::vector<double> out(trees_.size());
        for (std::size_t k = 0; k < trees_.size(); ++k) out[k] = trees_[k].predict(x);
        return out;
    }

    double predict(std::span<const double> x) const {
        double sum = 0.0;
        for (const auto& tree : trees_) sum += tree.predict(x);
        return std::clamp(sum / static_cast<double>(trees_.size()), range_.first, range_.second);
    }

    friend bool operator==(const ForecastModel& a, const ForecastModel& b) {
        return a.trees_ == b.trees_ && a.range_ == b.range_;
    }

private:
    std::vector<RegressionTree> trees_;
    LagConfig lag_;
    ForestConfig forest_;
    std::pair<double, double> range_;
};

inline ForecastModel fit_forest(const SupervisedData& data, const ForestConfig& config, const LagConfig& lag = {}) {
    config.validate();
    if (data.rows() < 2 * config.minLeaf)
        throw Error(ErrorKind::TooShort, "forest needs at least " + std::to_string(2 * config.minLeaf) + " rows, got " +
                                             std::to_string(data.rows()));
    if (data.width == 0) throw Error(ErrorKind::InvalidConfig, "feature rows are empty");

    std::vector<RegressionTree> trees(config.nTrees);
    parallel_for(
        config.nTrees,
        [&](std::size_t t) {
            auto rng = tree_rng(config.seed, t);
            std::vector<std::size_t> rows;
            if (config.bootstrap) {
                rows = draw_bootstrap(rng, data.rows());
            } else {
                rows.resize(data.rows());
                std::iota(rows.begin(), rows.end(), 0);
            }
            trees[t] = TreeBuilder(data, config, rng).build(std::move(rows));
        },
        config.threads);

    auto [lo, hi] = std::minmax_element(data.targets.begin(), data.targets.end());
    LagConfig lag_used = lag;
    lag_used.lags = data.width;
    return ForecastModel(std::move(trees), lag_used, config, {*lo, *hi});
}

/// Linearly interpolated quantile of an ascending-sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.size() == 1) return sorted.front();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto below = static_cast<std::size_t>(std::floor(pos));
    const auto above = std::min(below + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(below);
    return sorted[below] + frac * (sorted[above] - sorted[below]);
}

/// Per-step point forecast with ensemble-quantile bounds.
struct ForecastResult {
    std::vector<double> pointForecast;
    std::vector<double> intervalLow;
    std::vector<double> intervalHigh;
    std::vector<std::pair<double, double>> perStepTreeSpread; ///< (min, max) over trees

    std::size_t size() const { return pointForecast.size(); }
};

inline constexpr double kIntervalLowQuantile = 0.025;
inline constexpr double kIntervalHighQuantile = 0.975;

namespace detail {

inline void append_step(ForecastResult& out, const ForecastModel& model, std::span<const double> window) {
    auto per_tree = model.predict_trees(window);
    std::sort(per_tree.begin(), per_tree.end());
    const double point = model.predict(window);
    // The mean of a skewed ensemble can sit outside the central quantile band;
    // the band is widened to contain it.
    out.pointForecast.push_back(point);
    out.intervalLow.push_back(std::min(sorted_quantile(per_tree, kIntervalLowQuantile), point));
    out.intervalHigh.push_back(std::max(sorted_quantile(per_tree, kIntervalHighQuantile), point));
    out.perStepTreeSpread.emplace_back(per_tree.front(), per_tree.back());
}

} // namespace detail

/// One-step-ahead predictions over the test range, each using the true
/// preceding values as its lag window.
inline std::vector<double> predict_test(const ForecastModel& model, std::span<const double> train,
                                        std::span<const double> test) {
    const std::size_t lags = model.lag_config().lags;
    if (train.size() < lags)
        throw Error(ErrorKind::TooShort, "training series shorter than the lag window");
    std::vector<double> history(train.begin(), train.end());
    history.insert(history.end(), test.begin(), test.end());
    std::vector<double> out(test.size());
    for (std::size_t j = 0; j < test.size(); ++j) {
        const std::size_t end = train.size() + j;
        out[j] = model.predict(std::span<const double>(history).subspan(end - lags, lags));
    }
    return out;
}

/// Same as predict_test but also reports per-step ensemble bounds.
inline ForecastResult predict_test_with_bounds(const ForecastModel& model, std::span<const double> train,
                                               std::span<const double> test) {
    const std::size_t lags = model.lag_config().lags;
    if (train.size() < lags)
        throw Error(ErrorKind::TooShort, "training series shorter than the lag window");
    std::vector<double> history(train.begin(), train.end());
    history.insert(history.end(), test.begin(), test.end());
    ForecastResult out;
    for (std::size_t j = 0; j < test.size(); ++j) {
        const std::size_t end = train.size() + j;
        detail::append_step(out, model, std::span<const double>(history).subspan(end - lags, lags));
    }
    return out;
}

/// Recursive multi-step forecast: each point forecast is fed back into the
/// lag window of the next step.
inline ForecastResult forecast_horizon(const ForecastModel& model, std::span<const double> series,
                                       std::size_t horizon) {
    if (horizon < 1) throw Error(ErrorKind::InvalidConfig, "horizon must be >= 1");
    const std::size_t lags = model.lag_config().lags;
    if (series.size() < lags)
        throw Error(ErrorKind::TooShort, "series must supply at least " + std::to_string(lags) + " trailing values");
    std::vector<double> window(series.end() - static_cast<std::ptrdiff_t>(lags), series.end());
    ForecastResult out;
    for (std::size_t h = 0; h < horizon; ++h) {
        detail::append_step(out, model, window);
        window.erase(window.begin());
        window.push_back(out.pointForecast.back());
    }
    return out;
}

/// Repeats the last training value.
inline std::vector<double> naive_forecast(std::span<const double> train, std::size_t steps) {
    if (train.empty()) throw Error(ErrorKind::TooShort, "naive forecast needs a nonempty training series");
    return std::vector<double>(steps, train.back());
}

/// One-step naive predictions over a test range: each value is the
/// preceding true value.
inline std::vector<double> naive_predict_test(std::span<const double> train, std::span<const double> test) {
    if (train.empty()) throw Error(ErrorKind::TooShort, "naive forecast needs a nonempty training series");
    std::vector<double> out(test.size());
    for (std::size_t j = 0; j < test.size(); ++j) out[j] = j == 0 ? train.back() : test[j - 1];
    return out;
}

/// Pluggable forecaster. Only the forest and the naive baseline ship.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual std::string name() const = 0;
    virtual void fit(std::span<const double> train) = 0;
    virtual std::vector<double> predict_test(std::span<const double> train, std::span<const double> test) const = 0;
    virtual ForecastResult forecast(std::span<const double> series, std::size_t horizon) const = 0;
};

class RandomForestForecaster final : public Forecaster {
public:
    RandomForestForecaster(LagConfig lag, ForestConfig forest) : lag_(lag), forest_(forest) {}

    std::string name() const override { return "RF"; }

    void fit(std::span<const double> train) override {
        model_.emplace(fit_forest(make_supervised(train, lag_), forest_, lag_));
    }

    std::vector<double> predict_test(std::span<const double> train, std::span<const double> test) const override {
        return forecast::predict_test(fitted(), train, test);
    }

    ForecastResult forecast(std::span<const double> series, std::size_t horizon) const override {
        return forecast_horizon(fitted(), series, horizon);
    }

    const ForecastModel& fitted() const {
        if (!model_) throw Error(ErrorKind::InvalidConfig, "forecaster used before fit");
        return *model_;
    }

private:
    LagConfig lag_;
    ForestConfig forest_;
    std::optional<ForecastModel> model_;
};

class NaiveForecaster final : public Forecaster {
public:
    std::string name() const override { return "Naive"; }

    void fit(std::span<const double> train) override {
        if (train.empty()) throw Error(ErrorKind::TooShort, "naive forecast needs a nonempty training series");
    }

    std::vector<double> predict_test(std::span<const double> train, std::span<const double> test) const override {
        return naive_predict_test(train, test);
    }

    ForecastResult forecast(std::span<const double> series, std::size_t horizon) const override {
        if (horizon < 1) throw Error(ErrorKind::InvalidConfig, "horizon must be >= 1");
        ForecastResult out;
        out.pointForecast = naive_forecast(series, horizon);
        out.intervalLow = out.intervalHigh = out.pointForecast;
        for (double v : out.pointForecast) out.perStepTreeSpread.emplace_back(v, v);
        return out;
    }
};

} // namespace esgport::forecast
