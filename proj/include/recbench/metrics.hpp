#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "recbench/models.hpp"

namespace recbench::metrics {

using models::RankedList;

// Everything the metric suite needs besides the lists themselves. Vectors
// are indexed by user / item index; `relevant` holds each user's held-out
// items (sorted), `item_genres` a per-item genre distribution summing to 1.
struct EvalContext {
    std::vector<std::vector<int>> relevant;
    std::vector<int> train_popularity;
    int catalog_size = 0;
    std::optional<Eigen::MatrixXd> item_features;  // catalog x d, for ild
    std::vector<std::vector<std::pair<int, double>>> item_genres;  // for calibration
    std::vector<std::vector<int>> train_items;  // per-user history (sorted), for calibration
    int k = 10;
    int threads = 1;  // per-user terms may run in parallel; reduction order is fixed
};

struct MetricReport {
    std::optional<double> recall, ndcg, hitrate, coverage, coldrate, novelty, ild,
        calibration_bias;
    int users_evaluated = 0;
    int users_excluded = 0;  // empty relevance or empty history, per metric contracts

    // run metadata, filled by the bench layer
    std::string model, fusion, stage, text_variant, audio_variant, visual_variant;
    bool augmented = false;
    std::uint64_t seed = 0;
    int k = 10;
    double train_seconds = 0.0;
};

std::optional<double> recall_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx);
std::optional<double> ndcg_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx);
std::optional<double> hitrate_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx);
std::optional<double> coverage_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx);
std::optional<double> coldrate_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx);
std::optional<double> novelty_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx);
std::optional<double> ild_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx);
std::optional<double> calibration_bias_at_k(const std::vector<RankedList>& lists,
                                            const EvalContext& ctx);

// User-level cold-start variant (fraction of users whose top-K contains at
// least one cold item); the item-level slot fraction above is the default.
std::optional<double> user_coldrate_at_k(const std::vector<RankedList>& lists,
                                         const EvalContext& ctx);

// All eight metrics in one pass (ild/calibration skipped when their inputs
// are absent rather than erroring).
MetricReport compute_metrics(const std::vector<RankedList>& lists, const EvalContext& ctx);

// Min-max normalize the points, sort by normalized x, collapse duplicate x
// to the mean y, and integrate the piecewise-linear curve.
double tradeoff_auc(const std::vector<std::pair<double, double>>& points);

}  // namespace recbench::metrics
