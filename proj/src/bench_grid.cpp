#include <algorithm>
#include <cmath>
#include <sstream>

#include "recbench/bench.hpp"
#include "recbench/error.hpp"
#include "recbench/parallel.hpp"
#include "recbench/rng.hpp"

namespace recbench::bench {

namespace {

models::HyperParams apply_axis(models::HyperParams hp, const std::string& name, double value) {
    if (name == "latent_dim") hp.latent_dim = static_cast<int>(std::lround(value));
    else if (name == "learning_rate") hp.learning_rate = value;
    else if (name == "reg") hp.reg = value;
    else if (name == "epochs") hp.epochs = static_cast<int>(std::lround(value));
    else if (name == "negatives_per_positive")
        hp.negatives_per_positive = static_cast<int>(std::lround(value));
    else if (name == "beta") hp.beta = value;
    else if (name == "hidden_dim") hp.hidden_dim = static_cast<int>(std::lround(value));
    else if (name == "z_dim") hp.z_dim = static_cast<int>(std::lround(value));
    else throw ArgumentError("unknown grid axis '" + name + "'");
    return hp;
}

std::string trial_tag(const GridSpec& grid, const std::vector<std::size_t>& choice) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t j = 0; j < grid.axes.size(); ++j) {
        if (j) os << ';';
        os << grid.axes[j].first << '=' << grid.axes[j].second[choice[j]];
    }
    return os.str();
}

// Gather outer-index features into the sub-log's item order.
models::ContentFeatures gather_features(const models::ContentFeatures& outer,
                                        const corpus::InteractionLog& outer_log,
                                        const corpus::InteractionLog& sub_log) {
    models::ContentFeatures sub;
    const int n = sub_log.num_items();
    if (outer.fused.size()) {
        sub.fused.resize(n, outer.fused.cols());
        for (int i = 0; i < n; ++i) {
            sub.fused.row(i) = outer.fused.row(outer_log.item_index(sub_log.item_id(i)));
        }
    }
    for (const auto& block : outer.blocks) {
        Eigen::MatrixXd b(n, block.cols());
        for (int i = 0; i < n; ++i) {
            b.row(i) = block.row(outer_log.item_index(sub_log.item_id(i)));
        }
        sub.blocks.push_back(std::move(b));
    }
    return sub;
}

std::unique_ptr<models::Recommender> train_family(const std::string& family,
                                                  const models::TrainData& data,
                                                  const models::ContentFeatures& features,
                                                  const models::HyperParams& hp) {
    if (family == "mf") return std::make_unique<models::MfModel>(models::train_mf(data, hp));
    if (family == "vaecf")
        return std::make_unique<models::VaecfModel>(models::train_vaecf(data, hp));
    return std::make_unique<models::ContentModel>(models::train_content(
        data, features, models::content_variant_from_string(family), hp));
}

}  // namespace

BestHyper grid_search(const ExperimentConfig& cfg, const GridSpec& grid,
                      const corpus::InteractionLog& log, const corpus::SplitPlan& plan,
                      const models::ContentFeatures* features, int workers) {
    if (grid.empty()) throw ArgumentError("grid_search: empty grid");

    // Validation fold carved from the train side only; the test fold never
    // leaks into model selection.
    const corpus::InteractionLog train_log = corpus::sublog(log, plan.train_indices);
    const corpus::SplitPlan val_plan =
        corpus::split(train_log, corpus::split_strategy_from_string(cfg.split.strategy), 0.1,
                      derive_seed(cfg.runtime.seed, "grid-validation"));
    const models::TrainData train_data = models::TrainData::from_split(train_log, val_plan);

    models::ContentFeatures sub_features;
    if (features) sub_features = gather_features(*features, log, train_log);

    std::vector<std::vector<int>> relevant(train_log.num_users());
    for (std::size_t idx : val_plan.test_indices) {
        relevant[train_log.events()[idx].user].push_back(train_log.events()[idx].item);
    }
    for (auto& r : relevant) std::sort(r.begin(), r.end());
    std::vector<int> eval_users;
    std::vector<std::vector<int>> exclude;
    for (int u = 0; u < train_log.num_users(); ++u) {
        if (!relevant[u].empty()) {
            eval_users.push_back(u);
            exclude.push_back(train_data.positives[u]);
        }
    }
    if (eval_users.empty()) throw DataError("grid_search: validation fold has no users");

    metrics::EvalContext ctx;
    ctx.relevant = relevant;
    ctx.train_popularity = train_data.item_popularity;
    ctx.catalog_size = train_log.num_items();
    ctx.k = 10;

    // Enumerate the cartesian product, first axis outermost.
    const std::size_t n_trials = grid.size();
    std::vector<std::vector<std::size_t>> choices(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        std::vector<std::size_t> choice(grid.axes.size());
        std::size_t rem = t;
        for (std::size_t j = grid.axes.size(); j-- > 0;) {
            const std::size_t len = grid.axes[j].second.size();
            choice[j] = rem % len;
            rem /= len;
        }
        choices[t] = std::move(choice);
    }

    std::vector<TrialResult> table(n_trials);
    std::vector<std::string> failures(n_trials);
    parallel_for(n_trials, workers, [&](std::size_t t) {
        TrialResult& res = table[t];
        res.trial_id = static_cast<int>(t);
        models::HyperParams hp = cfg.model.hp;
        for (std::size_t j = 0; j < grid.axes.size(); ++j) {
            hp = apply_axis(hp, grid.axes[j].first, grid.axes[j].second[choices[t][j]]);
        }
        if (cfg.runtime.fast_prototype) hp.epochs = 1;
        // Per-trial seed depends only on (master seed, parameters), so the
        // outcome is independent of execution order and worker count.
        hp.seed = derive_seed(cfg.runtime.seed, trial_tag(grid, choices[t]));
        res.hp = hp;
        try {
            const auto model = train_family(cfg.model.family, train_data, sub_features, hp);
            const auto lists = models::recommend_all(*model, eval_users, 10, exclude, 1);
            res.recall10 = metrics::recall_at_k(lists, ctx).value_or(0.0);
            res.ndcg10 = metrics::ndcg_at_k(lists, ctx).value_or(0.0);
        } catch (const DivergenceError& e) {
            res.diverged = true;
            failures[t] = e.what();
        } catch (const std::exception& e) {
            res.diverged = true;
            failures[t] = std::string("error: ") + e.what();
        }
    });

    for (std::size_t t = 0; t < n_trials; ++t) {
        if (!failures[t].empty() && failures[t].rfind("error: ", 0) == 0) {
            throw Error("grid_search trial " + std::to_string(t) + " failed: " + failures[t]);
        }
    }

    BestHyper best;
    best.table = table;
    const bool by_ndcg = cfg.model.objective != "recall";
    for (const auto& res : table) {
        if (res.diverged) continue;
        const double objective = by_ndcg ? res.ndcg10 : res.recall10;
        const double incumbent = by_ndcg ? best.ndcg10 : best.recall10;
        if (best.best_trial < 0 || objective > incumbent) {  // ties keep the earlier trial
            best.best_trial = res.trial_id;
            best.hp = res.hp;
            best.recall10 = res.recall10;
            best.ndcg10 = res.ndcg10;
        }
    }
    if (best.best_trial < 0) {
        std::ostringstream os;
        os << "grid_search: every trial diverged (" << n_trials << " trials):";
        for (const auto& res : table) os << " trial" << res.trial_id << "=diverged";
        throw DataError(os.str());
    }
    return best;
}

}  // namespace recbench::bench
