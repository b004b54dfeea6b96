#include <algorithm>
#include <cmath>

#include "recbench/error.hpp"
#include "recbench/models.hpp"
#include "recbench/parallel.hpp"

namespace recbench::models {

void HyperParams::validate() const {
    if (latent_dim <= 0) throw ArgumentError("hyperparams: latent_dim must be positive");
    if (learning_rate <= 0.0) throw ArgumentError("hyperparams: learning_rate must be positive");
    if (reg < 0.0) throw ArgumentError("hyperparams: reg must be non-negative");
    if (epochs <= 0) throw ArgumentError("hyperparams: epochs must be positive");
    if (negatives_per_positive <= 0)
        throw ArgumentError("hyperparams: negatives_per_positive must be positive");
    if (beta < 0.0) throw ArgumentError("hyperparams: beta must be non-negative");
    if (hidden_dim <= 0) throw ArgumentError("hyperparams: hidden_dim must be positive");
    if (z_dim <= 0) throw ArgumentError("hyperparams: z_dim must be positive");
}

TrainData TrainData::from_events(int n_users, int n_items,
                                 const std::vector<corpus::Interaction>& events) {
    TrainData d;
    d.n_users = n_users;
    d.n_items = n_items;
    d.events_by_user.resize(n_users);
    d.positives.resize(n_users);
    d.item_popularity.assign(n_items, 0);
    double rating_sum = 0.0;
    for (const auto& e : events) {
        d.events_by_user[e.user].emplace_back(e.item, e.rating);
        d.positives[e.user].push_back(e.item);
        ++d.item_popularity[e.item];
        rating_sum += e.rating;
        ++d.n_events;
    }
    for (auto& p : d.positives) std::sort(p.begin(), p.end());
    d.mean_rating = d.n_events ? rating_sum / static_cast<double>(d.n_events) : 0.0;
    return d;
}

TrainData TrainData::from_split(const corpus::InteractionLog& log, const corpus::SplitPlan& plan) {
    std::vector<corpus::Interaction> events;
    events.reserve(plan.train_indices.size());
    for (std::size_t idx : plan.train_indices) events.push_back(log.events()[idx]);
    return from_events(log.num_users(), log.num_items(), events);
}

double score(const Recommender& model, int user, int item) {
    if (user < 0 || user >= model.num_users()) {
        throw ArgumentError("score: user index " + std::to_string(user) + " out of range");
    }
    if (item < 0 || item >= model.num_items()) {
        throw ArgumentError("score: item index " + std::to_string(item) + " out of range");
    }
    Eigen::VectorXd all(model.num_items());
    model.score_items(user, all);
    return all[item];
}

RankedList recommend_topk(const Recommender& model, int user, int n,
                          const std::vector<int>& exclude) {
    if (n <= 0) throw ArgumentError("recommend_topk: n must be positive");
    if (user < 0 || user >= model.num_users()) {
        throw ArgumentError("recommend_topk: user index " + std::to_string(user) +
                            " out of range");
    }
    const int n_items = model.num_items();
    Eigen::VectorXd scores(n_items);
    if (model.is_cold_user(user)) {
        const auto& pop = model.item_popularity();
        for (int i = 0; i < n_items; ++i) scores[i] = static_cast<double>(pop[i]);
    } else {
        model.score_items(user, scores);
    }

    std::vector<int> candidates;
    candidates.reserve(n_items);
    for (int i = 0; i < n_items; ++i) {
        if (!std::binary_search(exclude.begin(), exclude.end(), i)) candidates.push_back(i);
    }
    const auto cmp = [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    const std::size_t keep = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(n));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), cmp);
    candidates.resize(keep);

    RankedList out;
    out.user = user;
    out.items = std::move(candidates);
    out.scores.reserve(keep);
    for (int i : out.items) out.scores.push_back(scores[i]);
    return out;
}

std::vector<RankedList> recommend_all(const Recommender& model, const std::vector<int>& users,
                                      int n, const std::vector<std::vector<int>>& exclude,
                                      int threads) {
    if (exclude.size() != users.size()) {
        throw ArgumentError("recommend_all: exclude list count must match user count");
    }
    std::vector<RankedList> out(users.size());
    parallel_for(users.size(), threads,
                 [&](std::size_t i) { out[i] = recommend_topk(model, users[i], n, exclude[i]); });
    return out;
}

const char* to_string(ContentVariant v) {
    switch (v) {
        case ContentVariant::vbpr: return "vbpr";
        case ContentVariant::vmf: return "vmf";
        case ContentVariant::amr: return "amr";
    }
    return "?";
}

ContentVariant content_variant_from_string(const std::string& s) {
    if (s == "vbpr") return ContentVariant::vbpr;
    if (s == "vmf") return ContentVariant::vmf;
    if (s == "amr") return ContentVariant::amr;
    throw ArgumentError("unknown content variant '" + s + "' (allowed: vbpr, vmf, amr)");
}

}  // namespace recbench::models
