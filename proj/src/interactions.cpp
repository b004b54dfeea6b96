#include "recbench/interactions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "recbench/error.hpp"
#include "recbench/rng.hpp"

namespace recbench::corpus {

namespace {

std::vector<std::string> split_fields(const std::string& line, LogFormat format) {
    std::vector<std::string> fields;
    if (format == LogFormat::tsv) {
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
    } else {
        std::size_t start = 0;
        while (true) {
            const std::size_t sep = line.find("::", start);
            if (sep == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, sep - start));
            start = sep + 2;
        }
    }
    return fields;
}

}  // namespace

int InteractionLog::user_index(const std::string& external_id) const {
    auto it = user_index_.find(external_id);
    return it == user_index_.end() ? -1 : it->second;
}

int InteractionLog::item_index(const std::string& external_id) const {
    auto it = item_index_.find(external_id);
    return it == item_index_.end() ? -1 : it->second;
}

InteractionLog InteractionLog::from_events(
    const std::vector<std::tuple<std::string, std::string, double, std::int64_t>>& raw) {
    InteractionLog log;
    // (user, item) -> position in events_; last timestamp wins.
    std::unordered_map<std::int64_t, std::size_t> seen;
    for (const auto& [user, item, rating, ts] : raw) {
        auto [uit, unew] = log.user_index_.try_emplace(user, log.num_users());
        if (unew) log.user_ids_.push_back(user);
        auto [iit, inew] = log.item_index_.try_emplace(item, log.num_items());
        if (inew) log.item_ids_.push_back(item);
        const int u = uit->second;
        const int i = iit->second;
        const std::int64_t key = static_cast<std::int64_t>(u) * (1LL << 31) + i;
        auto sit = seen.find(key);
        if (sit == seen.end()) {
            seen.emplace(key, log.events_.size());
            log.events_.push_back({u, i, rating, ts});
        } else if (ts >= log.events_[sit->second].timestamp) {
            log.events_[sit->second] = {u, i, rating, ts};
        }
    }
    return log;
}

InteractionLog parse_interactions(const std::string& text, LogFormat format,
                                  const std::string& source_name) {
    std::vector<std::tuple<std::string, std::string, double, std::int64_t>> raw;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line, format);
        if (fields.size() != 4) {
            throw ParseError(source_name + ":" + std::to_string(line_no) +
                             ": expected 4 fields, got " + std::to_string(fields.size()));
        }
        double rating = 0.0;
        std::int64_t ts = 0;
        try {
            std::size_t used = 0;
            rating = std::stod(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing");
            ts = std::stoll(fields[3], &used);
            if (used != fields[3].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(source_name + ":" + std::to_string(line_no) +
                             ": malformed rating/timestamp in '" + line + "'");
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw ParseError(source_name + ":" + std::to_string(line_no) + ": empty id field");
        }
        raw.emplace_back(fields[0], fields[1], rating, ts);
    }
    if (raw.empty()) {
        throw DataError("empty corpus: no interactions in " + source_name);
    }
    return InteractionLog::from_events(raw);
}

InteractionLog load_interactions(const std::string& path, LogFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open interaction file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_interactions(buf.str(), format, path);
}

InteractionLog sublog(const InteractionLog& log, const std::vector<std::size_t>& event_indices) {
    InteractionLog out;
    std::vector<int> user_map(log.num_users(), -1);
    std::vector<int> item_map(log.num_items(), -1);
    for (std::size_t idx : event_indices) {
        const Interaction& e = log.events_[idx];
        if (user_map[e.user] < 0) {
            user_map[e.user] = out.num_users();
            out.user_ids_.push_back(log.user_ids_[e.user]);
            out.user_index_.emplace(log.user_ids_[e.user], user_map[e.user]);
        }
        if (item_map[e.item] < 0) {
            item_map[e.item] = out.num_items();
            out.item_ids_.push_back(log.item_ids_[e.item]);
            out.item_index_.emplace(log.item_ids_[e.item], item_map[e.item]);
        }
        out.events_.push_back({user_map[e.user], item_map[e.item], e.rating, e.timestamp});
    }
    return out;
}

InteractionLog k_core_filter(const InteractionLog& log, int k) {
    if (k < 1) throw ArgumentError("k_core_filter: k must be >= 1, got " + std::to_string(k));
    std::vector<char> keep(log.num_events(), 1);
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<int> user_deg(log.num_users(), 0);
        std::vector<int> item_deg(log.num_items(), 0);
        for (std::size_t idx = 0; idx < log.num_events(); ++idx) {
            if (!keep[idx]) continue;
            ++user_deg[log.events()[idx].user];
            ++item_deg[log.events()[idx].item];
        }
        for (std::size_t idx = 0; idx < log.num_events(); ++idx) {
            if (!keep[idx]) continue;
            const Interaction& e = log.events()[idx];
            if (user_deg[e.user] < k || item_deg[e.item] < k) {
                keep[idx] = 0;
                changed = true;
            }
        }
    }
    std::vector<std::size_t> retained;
    for (std::size_t idx = 0; idx < log.num_events(); ++idx) {
        if (keep[idx]) retained.push_back(idx);
    }
    if (retained.empty()) {
        throw EmptyAfterFilterError(k, "k-core filter with k=" + std::to_string(k) +
                                           " removed every interaction");
    }
    return sublog(log, retained);
}

namespace {

// Events argsorted by (timestamp, original index); the index tiebreak keeps
// temporal splits reproducible when timestamps collide.
std::vector<std::size_t> chronological_order(const InteractionLog& log) {
    std::vector<std::size_t> order(log.num_events());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return log.events()[a].timestamp < log.events()[b].timestamp;
    });
    return order;
}

SplitPlan make_plan(std::vector<char>& is_test, SplitStrategy strategy, double ratio,
                    std::uint64_t seed) {
    SplitPlan plan;
    plan.strategy = strategy;
    plan.test_ratio = ratio;
    plan.seed = seed;
    for (std::size_t idx = 0; idx < is_test.size(); ++idx) {
        (is_test[idx] ? plan.test_indices : plan.train_indices).push_back(idx);
    }
    return plan;
}

}  // namespace

SplitPlan split(const InteractionLog& log, SplitStrategy strategy, double test_ratio,
                std::uint64_t seed) {
    if (!(test_ratio > 0.0 && test_ratio < 1.0)) {
        throw ArgumentError("split: test_ratio must lie in (0,1), got " +
                            std::to_string(test_ratio));
    }
    if (log.num_events() == 0) throw DataError("split: empty log");

    const std::size_t n = log.num_events();
    std::vector<char> is_test(n, 0);

    switch (strategy) {
        case SplitStrategy::random: {
            const auto m = static_cast<std::size_t>(std::ceil(test_ratio * static_cast<double>(n)));
            Rng rng(seed);
            for (std::size_t idx : rng.sample_without_replacement(n, m)) is_test[idx] = 1;
            break;
        }
        case SplitStrategy::temporal: {
            const auto m = static_cast<std::size_t>(std::ceil(test_ratio * static_cast<double>(n)));
            const auto order = chronological_order(log);
            for (std::size_t j = n - m; j < n; ++j) is_test[order[j]] = 1;
            break;
        }
        case SplitStrategy::per_user: {
            std::vector<std::vector<std::size_t>> by_user(log.num_users());
            for (std::size_t idx : chronological_order(log)) {
                by_user[log.events()[idx].user].push_back(idx);
            }
            for (const auto& evs : by_user) {
                const std::size_t n_u = evs.size();
                if (n_u < 2) continue;  // single-event users stay in train
                auto m_u = static_cast<std::size_t>(
                    std::ceil(test_ratio * static_cast<double>(n_u)));
                if (m_u >= n_u) m_u = n_u - 1;  // keep >= 1 train event
                for (std::size_t j = n_u - m_u; j < n_u; ++j) is_test[evs[j]] = 1;
            }
            break;
        }
    }
    return make_plan(is_test, strategy, test_ratio, seed);
}

SplitPlan simulate_cold_start(const SplitPlan& plan, const InteractionLog& log,
                              double item_fraction, std::uint64_t seed) {
    if (item_fraction < 0.0 || item_fraction >= 1.0) {
        throw ArgumentError("simulate_cold_start: item_fraction must lie in [0,1), got " +
                            std::to_string(item_fraction));
    }
    if (item_fraction == 0.0) return plan;

    std::vector<char> has_test(log.num_items(), 0);
    for (std::size_t idx : plan.test_indices) has_test[log.events()[idx].item] = 1;
    std::vector<int> candidates;
    for (int i = 0; i < log.num_items(); ++i) {
        if (has_test[i]) candidates.push_back(i);
    }
    const auto m = static_cast<std::size_t>(
        std::ceil(item_fraction * static_cast<double>(candidates.size())));

    Rng rng(seed);
    std::vector<char> cold(log.num_items(), 0);
    SplitPlan out = plan;
    out.cold_items.clear();
    for (std::size_t pos : rng.sample_without_replacement(candidates.size(), m)) {
        cold[candidates[pos]] = 1;
        out.cold_items.push_back(candidates[pos]);
    }

    std::vector<std::size_t> train;
    for (std::size_t idx : plan.train_indices) {
        if (cold[log.events()[idx].item]) {
            out.test_indices.push_back(idx);
        } else {
            train.push_back(idx);
        }
    }
    if (train.empty()) {
        throw DataError("simulate_cold_start: fraction " + std::to_string(item_fraction) +
                        " leaves no train events");
    }
    out.train_indices = std::move(train);
    std::sort(out.test_indices.begin(), out.test_indices.end());
    return out;
}

DatasetStats dataset_stats(const InteractionLog& log) {
    if (log.num_events() == 0) throw DataError("dataset_stats: empty log");
    DatasetStats s;
    s.n_interactions = log.num_events();
    s.n_users = log.num_users();
    s.n_items = log.num_items();
    s.avg_per_user = static_cast<double>(s.n_interactions) / s.n_users;
    s.avg_per_item = static_cast<double>(s.n_interactions) / s.n_items;
    s.density = static_cast<double>(s.n_interactions) /
                (static_cast<double>(s.n_users) * static_cast<double>(s.n_items));
    return s;
}

const char* to_string(SplitStrategy s) {
    switch (s) {
        case SplitStrategy::random: return "random";
        case SplitStrategy::temporal: return "temporal";
        case SplitStrategy::per_user: return "per_user";
    }
    return "?";
}

SplitStrategy split_strategy_from_string(const std::string& s) {
    if (s == "random") return SplitStrategy::random;
    if (s == "temporal") return SplitStrategy::temporal;
    if (s == "per_user") return SplitStrategy::per_user;
    throw ArgumentError("unknown split strategy '" + s + "' (allowed: random, temporal, per_user)");
}

}  // namespace recbench::corpus
