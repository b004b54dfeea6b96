#include "recbench/latefusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "recbench/error.hpp"

namespace recbench::latefusion {

namespace {

// Union of input items with each system's 1-based rank; missing rank is
// len(list)+1.
struct RankTable {
    std::vector<int> items;                 // sorted ascending
    std::vector<std::vector<int>> ranks;    // ranks[m][pos] for items[pos]
};

RankTable build_ranks(const FusionInput& input) {
    std::set<int> universe;
    for (const auto& list : input.lists) universe.insert(list.items.begin(), list.items.end());
    RankTable t;
    t.items.assign(universe.begin(), universe.end());
    std::unordered_map<int, std::size_t> pos;
    for (std::size_t i = 0; i < t.items.size(); ++i) pos.emplace(t.items[i], i);
    t.ranks.resize(input.lists.size());
    for (std::size_t m = 0; m < input.lists.size(); ++m) {
        const auto& list = input.lists[m];
        t.ranks[m].assign(t.items.size(), static_cast<int>(list.items.size()) + 1);
        for (std::size_t r = 0; r < list.items.size(); ++r) {
            t.ranks[m][pos.at(list.items[r])] = static_cast<int>(r) + 1;
        }
    }
    return t;
}

void require_nonempty(const FusionInput& input, const char* op) {
    if (input.lists.empty()) throw ArgumentError(std::string(op) + ": need at least one list");
}

// Sort items by score (descending when higher_better) breaking ties by
// ascending item index.
MetaRanking rank_by(const RankTable& t, const std::vector<double>& scores, bool higher_better,
                    int user) {
    std::vector<std::size_t> order(t.items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return higher_better ? scores[a] > scores[b]
                                                         : scores[a] < scores[b];
        return t.items[a] < t.items[b];
    });
    MetaRanking out;
    out.user = user;
    out.items.reserve(order.size());
    out.fused_scores.reserve(order.size());
    for (std::size_t i : order) {
        out.items.push_back(t.items[i]);
        out.fused_scores.push_back(scores[i]);
    }
    return out;
}

int input_user(const FusionInput& input) {
    return input.lists.empty() ? 0 : input.lists.front().user;
}

}  // namespace

MetaRanking borda(const FusionInput& input) {
    require_nonempty(input, "borda");
    for (const auto& list : input.lists) {
        if (static_cast<int>(list.items.size()) > input.catalog_size) {
            throw ArgumentError("borda: catalog size " + std::to_string(input.catalog_size) +
                                " is smaller than a list of length " +
                                std::to_string(list.items.size()));
        }
    }
    const RankTable t = build_ranks(input);
    std::vector<double> scores(t.items.size(), 0.0);
    for (std::size_t m = 0; m < t.ranks.size(); ++m) {
        for (std::size_t i = 0; i < t.items.size(); ++i) {
            scores[i] += static_cast<double>(input.catalog_size - t.ranks[m][i] + 1);
        }
    }
    return rank_by(t, scores, true, input_user(input));
}

MetaRanking weighted_borda(const FusionInput& input) {
    require_nonempty(input, "weighted_borda");
    if (!input.weights || input.weights->size() != input.lists.size()) {
        throw ArgumentError("weighted_borda: needs one weight per list");
    }
    double sum = 0.0;
    for (double w : *input.weights) {
        if (w < 0.0) throw ArgumentError("weighted_borda: weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ArgumentError("weighted_borda: weights must sum to 1, got " + std::to_string(sum));
    }
    for (const auto& list : input.lists) {
        if (static_cast<int>(list.items.size()) > input.catalog_size) {
            throw ArgumentError("weighted_borda: catalog smaller than a list");
        }
    }
    const RankTable t = build_ranks(input);
    std::vector<double> scores(t.items.size(), 0.0);
    for (std::size_t m = 0; m < t.ranks.size(); ++m) {
        const double w = (*input.weights)[m];
        for (std::size_t i = 0; i < t.items.size(); ++i) {
            scores[i] += w * static_cast<double>(input.catalog_size - t.ranks[m][i] + 1);
        }
    }
    return rank_by(t, scores, true, input_user(input));
}

MetaRanking average_rank(const FusionInput& input) {
    require_nonempty(input, "average_rank");
    const RankTable t = build_ranks(input);
    std::vector<double> mean_rank(t.items.size(), 0.0);
    for (std::size_t m = 0; m < t.ranks.size(); ++m) {
        for (std::size_t i = 0; i < t.items.size(); ++i) {
            mean_rank[i] += static_cast<double>(t.ranks[m][i]);
        }
    }
    for (double& r : mean_rank) r /= static_cast<double>(t.ranks.size());
    return rank_by(t, mean_rank, false, input_user(input));
}

MetaRanking rrf(const FusionInput& input) {
    require_nonempty(input, "rrf");
    if (input.rrf_k < 0) throw ArgumentError("rrf: k must be >= 0");
    const RankTable t = build_ranks(input);
    std::vector<double> scores(t.items.size(), 0.0);
    for (std::size_t m = 0; m < t.ranks.size(); ++m) {
        for (std::size_t i = 0; i < t.items.size(); ++i) {
            scores[i] += 1.0 / (static_cast<double>(input.rrf_k) + t.ranks[m][i]);
        }
    }
    return rank_by(t, scores, true, input_user(input));
}

MetaRanking fuse(const FusionInput& input, FusionRule rule) {
    switch (rule) {
        case FusionRule::borda: return borda(input);
        case FusionRule::weighted_borda: return weighted_borda(input);
        case FusionRule::average_rank: return average_rank(input);
        case FusionRule::rrf: return rrf(input);
    }
    throw ArgumentError("fuse: unknown rule");
}

std::vector<double> weight_schedule(const std::string& name, std::size_t n_systems) {
    if (n_systems == 0) throw ArgumentError("weight_schedule: no systems");
    std::vector<double> w(n_systems);
    for (std::size_t m = 0; m < n_systems; ++m) {
        const double position = static_cast<double>(m + 1);
        if (name == "uniform") {
            w[m] = 1.0;
        } else if (name == "linear") {
            w[m] = static_cast<double>(n_systems - m);
        } else if (name == "harmonic") {
            w[m] = 1.0 / position;
        } else if (name == "log") {
            w[m] = 1.0 / std::log2(position + 1.0);
        } else if (name == "exp") {
            w[m] = std::exp(-static_cast<double>(m));
        } else if (name == "quadratic") {
            w[m] = 1.0 / (position * position);
        } else {
            throw ArgumentError("unknown weight schedule '" + name +
                                "' (allowed: uniform, linear, harmonic, log, exp, quadratic)");
        }
    }
    double sum = 0.0;
    for (double x : w) sum += x;
    for (double& x : w) x /= sum;
    return w;
}

InterchangeLists read_interchange(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open ranked-list file: " + path);
    InterchangeLists out;
    std::string line;
    std::size_t line_no = 0;
    // rank column is validated to be contiguous per user
    std::map<std::string, int> next_rank;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string user, item, rank_s, score_s;
        if (!std::getline(ls, user, '\t') || !std::getline(ls, item, '\t') ||
            !std::getline(ls, rank_s, '\t') || !std::getline(ls, score_s)) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected user<TAB>item<TAB>rank<TAB>score");
        }
        int rank = 0;
        double scr = 0.0;
        try {
            rank = std::stoi(rank_s);
            scr = std::stod(score_s);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed rank/score");
        }
        auto& expected = next_rank[user];
        if (rank != expected + 1) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": rank " +
                             std::to_string(rank) + " for user " + user + ", expected " +
                             std::to_string(expected + 1));
        }
        expected = rank;
        out.by_user[user].emplace_back(item, scr);
    }
    if (out.by_user.empty()) throw DataError("empty ranked-list file: " + path);
    return out;
}

void write_interchange(const std::string& path,
                       const std::vector<std::pair<std::string, MetaRanking>>& rankings,
                       const std::vector<std::string>& item_ids) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write ranked-list file: " + path);
    out.precision(17);
    for (const auto& [user, meta] : rankings) {
        for (std::size_t r = 0; r < meta.items.size(); ++r) {
            out << user << '\t' << item_ids.at(static_cast<std::size_t>(meta.items[r])) << '\t'
                << (r + 1) << '\t' << meta.fused_scores[r] << '\n';
        }
    }
}

void write_interchange_lists(const std::string& path, const std::vector<RankedList>& lists,
                             const std::vector<std::string>& user_ids,
                             const std::vector<std::string>& item_ids) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write ranked-list file: " + path);
    out.precision(17);
    for (const auto& list : lists) {
        for (std::size_t r = 0; r < list.items.size(); ++r) {
            out << user_ids.at(static_cast<std::size_t>(list.user)) << '\t'
                << item_ids.at(static_cast<std::size_t>(list.items[r])) << '\t' << (r + 1) << '\t'
                << list.scores[r] << '\n';
        }
    }
}

const char* to_string(FusionRule r) {
    switch (r) {
        case FusionRule::borda: return "borda";
        case FusionRule::weighted_borda: return "wborda";
        case FusionRule::average_rank: return "avgrank";
        case FusionRule::rrf: return "rrf";
    }
    return "?";
}

FusionRule fusion_rule_from_string(const std::string& s) {
    if (s == "borda") return FusionRule::borda;
    if (s == "wborda" || s == "weighted_borda") return FusionRule::weighted_borda;
    if (s == "avgrank" || s == "average_rank") return FusionRule::average_rank;
    if (s == "rrf") return FusionRule::rrf;
    throw ArgumentError("unknown fusion rule '" + s + "' (allowed: borda, wborda, avgrank, rrf)");
}

}  // namespace recbench::latefusion
