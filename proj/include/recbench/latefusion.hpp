#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recbench/models.hpp"

namespace recbench::latefusion {

using models::RankedList;

// Ranked lists from M systems for one user. Ranks are 1-based; an item
// absent from list m is treated as ranked len(m)+1 there.
struct FusionInput {
    std::vector<RankedList> lists;
    int catalog_size = 0;
    std::optional<std::vector<double>> weights;  // weighted Borda only
    int rrf_k = 60;
};

struct MetaRanking {
    int user = 0;
    std::vector<int> items;
    std::vector<double> fused_scores;
};

MetaRanking borda(const FusionInput& input);
MetaRanking weighted_borda(const FusionInput& input);
MetaRanking average_rank(const FusionInput& input);
MetaRanking rrf(const FusionInput& input);

enum class FusionRule { borda, weighted_borda, average_rank, rrf };

MetaRanking fuse(const FusionInput& input, FusionRule rule);

// Named weight schedules for weighted Borda; the m-th weight is a function
// of the system position (normalized to sum 1).
std::vector<double> weight_schedule(const std::string& name, std::size_t n_systems);

// Interchange file: user_id<TAB>item_id<TAB>rank<TAB>score per line.
// External ids are strings; one file holds lists for many users.
struct InterchangeLists {
    // per user id, items in rank order with their scores
    std::map<std::string, std::vector<std::pair<std::string, double>>> by_user;
};

InterchangeLists read_interchange(const std::string& path);
void write_interchange(const std::string& path,
                       const std::vector<std::pair<std::string, MetaRanking>>& rankings,
                       const std::vector<std::string>& item_ids);
void write_interchange_lists(const std::string& path, const std::vector<RankedList>& lists,
                             const std::vector<std::string>& user_ids,
                             const std::vector<std::string>& item_ids);

const char* to_string(FusionRule r);
FusionRule fusion_rule_from_string(const std::string& s);

}  // namespace recbench::latefusion
