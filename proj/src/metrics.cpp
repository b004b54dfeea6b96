#include "recbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "recbench/error.hpp"
#include "recbench/parallel.hpp"

namespace recbench::metrics {

namespace {

constexpr double kExcluded = std::numeric_limits<double>::quiet_NaN();

int top_len(const RankedList& list, int k) {
    return std::min<int>(k, static_cast<int>(list.items.size()));
}

bool is_relevant(const EvalContext& ctx, int user, int item) {
    const auto& rel = ctx.relevant[user];
    return std::binary_search(rel.begin(), rel.end(), item);
}

// Computes one value per list in parallel, then reduces in list order; a NaN
// marks an excluded user. Returns the mean, or nullopt when nothing counted.
template <typename PerUser>
std::optional<double> mean_over_users(const std::vector<RankedList>& lists,
                                      const EvalContext& ctx, PerUser&& per_user,
                                      int* excluded_out = nullptr) {
    std::vector<double> values(lists.size());
    parallel_for(lists.size(), ctx.threads,
                 [&](std::size_t i) { values[i] = per_user(lists[i]); });
    double sum = 0.0;
    int counted = 0;
    int excluded = 0;
    for (double v : values) {
        if (std::isnan(v)) {
            ++excluded;
        } else {
            sum += v;
            ++counted;
        }
    }
    if (excluded_out) *excluded_out = excluded;
    if (counted == 0) return std::nullopt;
    return sum / static_cast<double>(counted);
}

double user_recall(const RankedList& list, const EvalContext& ctx) {
    const auto& rel = ctx.relevant[list.user];
    if (rel.empty()) return kExcluded;
    int hits = 0;
    const int n = top_len(list, ctx.k);
    for (int pos = 0; pos < n; ++pos) {
        if (is_relevant(ctx, list.user, list.items[pos])) ++hits;
    }
    const int denom = std::min<int>(ctx.k, static_cast<int>(rel.size()));
    return static_cast<double>(hits) / static_cast<double>(denom);
}

double user_ndcg(const RankedList& list, const EvalContext& ctx) {
    const auto& rel = ctx.relevant[list.user];
    if (rel.empty()) return kExcluded;
    double dcg = 0.0;
    const int n = top_len(list, ctx.k);
    for (int pos = 0; pos < n; ++pos) {
        if (is_relevant(ctx, list.user, list.items[pos])) {
            dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
        }
    }
    double idcg = 0.0;
    const int ideal = std::min<int>(ctx.k, static_cast<int>(rel.size()));
    for (int j = 1; j <= ideal; ++j) idcg += 1.0 / std::log2(static_cast<double>(j) + 1.0);
    return dcg / idcg;
}

double user_hit(const RankedList& list, const EvalContext& ctx) {
    const auto& rel = ctx.relevant[list.user];
    if (rel.empty()) return kExcluded;
    const int n = top_len(list, ctx.k);
    for (int pos = 0; pos < n; ++pos) {
        if (is_relevant(ctx, list.user, list.items[pos])) return 1.0;
    }
    return 0.0;
}

}  // namespace

std::optional<double> recall_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx) {
    return mean_over_users(lists, ctx,
                           [&](const RankedList& l) { return user_recall(l, ctx); });
}

std::optional<double> ndcg_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx) {
    return mean_over_users(lists, ctx, [&](const RankedList& l) { return user_ndcg(l, ctx); });
}

std::optional<double> hitrate_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx) {
    return mean_over_users(lists, ctx, [&](const RankedList& l) { return user_hit(l, ctx); });
}

std::optional<double> coverage_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx) {
    if (ctx.catalog_size <= 0) throw ArgumentError("coverage: catalog_size must be positive");
    std::set<int> recommended;
    for (const auto& list : lists) {
        const int n = top_len(list, ctx.k);
        for (int pos = 0; pos < n; ++pos) recommended.insert(list.items[pos]);
    }
    return static_cast<double>(recommended.size()) / static_cast<double>(ctx.catalog_size);
}

std::optional<double> coldrate_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx) {
    long long slots = 0;
    long long cold = 0;
    for (const auto& list : lists) {
        const int n = top_len(list, ctx.k);
        for (int pos = 0; pos < n; ++pos) {
            ++slots;
            if (ctx.train_popularity[list.items[pos]] == 0) ++cold;
        }
    }
    if (slots == 0) return std::nullopt;
    return static_cast<double>(cold) / static_cast<double>(slots);
}

std::optional<double> user_coldrate_at_k(const std::vector<RankedList>& lists,
                                         const EvalContext& ctx) {
    if (lists.empty()) return std::nullopt;
    int users_with_cold = 0;
    for (const auto& list : lists) {
        const int n = top_len(list, ctx.k);
        for (int pos = 0; pos < n; ++pos) {
            if (ctx.train_popularity[list.items[pos]] == 0) {
                ++users_with_cold;
                break;
            }
        }
    }
    return static_cast<double>(users_with_cold) / static_cast<double>(lists.size());
}

std::optional<double> novelty_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx) {
    double total_count = 0.0;
    for (int c : ctx.train_popularity) total_count += c;
    const double denom = total_count + static_cast<double>(ctx.train_popularity.size());
    long long slots = 0;
    double sum = 0.0;
    for (const auto& list : lists) {
        const int n = top_len(list, ctx.k);
        for (int pos = 0; pos < n; ++pos) {
            // add-one smoothing keeps cold items finite
            const double p = (ctx.train_popularity[list.items[pos]] + 1.0) / denom;
            sum += -std::log2(p);
            ++slots;
        }
    }
    if (slots == 0) return std::nullopt;  // undefined, reported as absent
    return sum / static_cast<double>(slots);
}

std::optional<double> ild_at_k(const std::vector<RankedList>& lists, const EvalContext& ctx) {
    if (!ctx.item_features) throw ArgumentError("ild: no item features in context");
    const Eigen::MatrixXd& f = *ctx.item_features;
    // validate before the parallel loop; throwing inside it would terminate
    for (const auto& list : lists) {
        const int n = top_len(list, ctx.k);
        for (int pos = 0; pos < n; ++pos) {
            if (list.items[pos] >= f.rows()) {
                throw ArgumentError("ild: item " + std::to_string(list.items[pos]) +
                                    " has no feature row");
            }
        }
    }
    auto per_user = [&](const RankedList& list) -> double {
        const int n = top_len(list, ctx.k);
        if (n < 2) return kExcluded;
        double sum = 0.0;
        int pairs = 0;
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                const double na = f.row(list.items[a]).norm();
                const double nb = f.row(list.items[b]).norm();
                const double cos =
                    (na > 0.0 && nb > 0.0)
                        ? f.row(list.items[a]).dot(f.row(list.items[b])) / (na * nb)
                        : 0.0;
                sum += 1.0 - cos;
                ++pairs;
            }
        }
        return sum / static_cast<double>(pairs);
    };
    return mean_over_users(lists, ctx, per_user);
}

std::optional<double> calibration_bias_at_k(const std::vector<RankedList>& lists,
                                            const EvalContext& ctx) {
    if (ctx.item_genres.empty()) throw ArgumentError("calibration: no item genres in context");
    auto distribution = [&](auto begin, auto end) {
        std::map<int, double> dist;
        double total = 0.0;
        for (auto it = begin; it != end; ++it) {
            for (const auto& [genre, mass] : ctx.item_genres[*it]) {
                dist[genre] += mass;
                total += mass;
            }
        }
        if (total > 0.0) {
            for (auto& [genre, mass] : dist) mass /= total;
        }
        return std::pair{dist, total};
    };
    auto per_user = [&](const RankedList& list) -> double {
        const auto& hist = ctx.train_items[list.user];
        auto [hist_dist, hist_mass] = distribution(hist.begin(), hist.end());
        if (hist_mass <= 0.0) return kExcluded;  // empty history
        const int n = top_len(list, ctx.k);
        auto [rec_dist, rec_mass] = distribution(list.items.begin(), list.items.begin() + n);
        if (rec_mass <= 0.0) return kExcluded;
        double tv = 0.0;
        for (const auto& [genre, mass] : rec_dist) {
            auto it = hist_dist.find(genre);
            tv += std::abs(mass - (it == hist_dist.end() ? 0.0 : it->second));
        }
        for (const auto& [genre, mass] : hist_dist) {
            if (!rec_dist.count(genre)) tv += mass;
        }
        return 0.5 * tv;
    };
    return mean_over_users(lists, ctx, per_user);
}

MetricReport compute_metrics(const std::vector<RankedList>& lists, const EvalContext& ctx) {
    MetricReport r;
    r.k = ctx.k;
    int excluded = 0;
    r.recall = mean_over_users(
        lists, ctx, [&](const RankedList& l) { return user_recall(l, ctx); }, &excluded);
    r.users_excluded = excluded;
    r.users_evaluated = static_cast<int>(lists.size()) - excluded;
    r.ndcg = ndcg_at_k(lists, ctx);
    r.hitrate = hitrate_at_k(lists, ctx);
    r.coverage = coverage_at_k(lists, ctx);
    r.coldrate = coldrate_at_k(lists, ctx);
    r.novelty = novelty_at_k(lists, ctx);
    if (ctx.item_features) r.ild = ild_at_k(lists, ctx);
    if (!ctx.item_genres.empty() && !ctx.train_items.empty()) {
        r.calibration_bias = calibration_bias_at_k(lists, ctx);
    }
    return r;
}

double tradeoff_auc(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw DataError("tradeoff_auc: need at least 2 points");
    double xmin = points[0].first, xmax = points[0].first;
    double ymin = points[0].second, ymax = points[0].second;
    for (const auto& [x, y] : points) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    if (xmax == xmin) throw DataError("tradeoff_auc: degenerate curve, all x values equal");

    std::vector<std::pair<double, double>> norm;
    norm.reserve(points.size());
    for (const auto& [x, y] : points) {
        // a constant-y set normalizes to the maximal curve
        const double ny = (ymax == ymin) ? 1.0 : (y - ymin) / (ymax - ymin);
        norm.emplace_back((x - xmin) / (xmax - xmin), ny);
    }
    std::stable_sort(norm.begin(), norm.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    // duplicate x values collapse to their mean y
    std::vector<std::pair<double, double>> curve;
    std::size_t i = 0;
    while (i < norm.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < norm.size() && norm[j].first == norm[i].first) {
            sum += norm[j].second;
            ++j;
        }
        curve.emplace_back(norm[i].first, sum / static_cast<double>(j - i));
        i = j;
    }
    if (curve.size() < 2) throw DataError("tradeoff_auc: fewer than 2 distinct x values");

    double area = 0.0;
    for (std::size_t p = 1; p < curve.size(); ++p) {
        area += (curve[p].first - curve[p - 1].first) * 0.5 *
                (curve[p].second + curve[p - 1].second);
    }
    return area;
}

}  // namespace recbench::metrics
