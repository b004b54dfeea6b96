#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace recbench::corpus {

struct Interaction {
    int user;  // dense user index
    int item;  // dense item index
    double rating;
    std::int64_t timestamp;  // seconds
};

enum class LogFormat { tsv, movielens_dat };

// Implicit-feedback interaction log with dense 0-based user/item indices
// and a recoverable external-id mapping. Immutable after construction.
class InteractionLog {
public:
    InteractionLog() = default;

    // Builds dense vocabularies in order of first appearance and collapses
    // duplicate (user, item) pairs keeping the latest timestamp (later file
    // position wins ties).
    static InteractionLog from_events(
        const std::vector<std::tuple<std::string, std::string, double, std::int64_t>>& raw);

    int num_users() const { return static_cast<int>(user_ids_.size()); }
    int num_items() const { return static_cast<int>(item_ids_.size()); }
    std::size_t num_events() const { return events_.size(); }

    const std::vector<Interaction>& events() const { return events_; }
    const std::vector<std::string>& user_ids() const { return user_ids_; }
    const std::vector<std::string>& item_ids() const { return item_ids_; }

    const std::string& user_id(int index) const { return user_ids_.at(index); }
    const std::string& item_id(int index) const { return item_ids_.at(index); }

    // -1 when the external id is unknown.
    int user_index(const std::string& external_id) const;
    int item_index(const std::string& external_id) const;

private:
    std::vector<std::string> user_ids_;
    std::vector<std::string> item_ids_;
    std::unordered_map<std::string, int> user_index_;
    std::unordered_map<std::string, int> item_index_;
    std::vector<Interaction> events_;

    friend InteractionLog k_core_filter(const InteractionLog&, int);
    friend InteractionLog sublog(const InteractionLog&, const std::vector<std::size_t>&);
};

enum class SplitStrategy { random, temporal, per_user };

struct SplitPlan {
    std::vector<std::size_t> train_indices;  // sorted event indices
    std::vector<std::size_t> test_indices;   // sorted event indices
    SplitStrategy strategy = SplitStrategy::random;
    double test_ratio = 0.2;
    std::uint64_t seed = 0;
    std::vector<int> cold_items;  // sorted item indices evicted from train
};

struct DatasetStats {
    std::size_t n_interactions = 0;
    int n_users = 0;
    int n_items = 0;
    double avg_per_user = 0.0;
    double avg_per_item = 0.0;
    double density = 0.0;  // |R| / (|U|*|I|), reported as a fraction
};

// Line format: user<TAB>item<TAB>rating<TAB>timestamp (tsv) or
// user::item::rating::timestamp (movielens_dat). No header.
InteractionLog load_interactions(const std::string& path, LogFormat format);

// Parses an in-memory blob; load_interactions delegates here.
InteractionLog parse_interactions(const std::string& text, LogFormat format,
                                  const std::string& source_name);

// Maximal sublog where every retained user and item has >= k events,
// computed by iterated removal until fixpoint. Vocabularies re-densified.
InteractionLog k_core_filter(const InteractionLog& log, int k);

// New log containing only the given events, vocabularies re-densified
// in the order retained entities first appear.
InteractionLog sublog(const InteractionLog& log, const std::vector<std::size_t>& event_indices);

SplitPlan split(const InteractionLog& log, SplitStrategy strategy, double test_ratio,
                std::uint64_t seed);

// Picks ceil(fraction * |items with test events|) items and moves all their
// train events into test so they are genuinely unseen during training.
SplitPlan simulate_cold_start(const SplitPlan& plan, const InteractionLog& log,
                              double item_fraction, std::uint64_t seed);

DatasetStats dataset_stats(const InteractionLog& log);

const char* to_string(SplitStrategy s);
SplitStrategy split_strategy_from_string(const std::string& s);

}  // namespace recbench::corpus
