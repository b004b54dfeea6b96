#include <doctest.h>

#include <algorithm>
#include <set>

#include "recbench/error.hpp"
#include "recbench/interactions.hpp"
#include "recbench/rng.hpp"

using namespace recbench;
using namespace recbench::corpus;

namespace {

InteractionLog random_log(Rng& rng, int max_users = 12, int max_items = 10, int max_events = 60) {
    std::vector<std::tuple<std::string, std::string, double, std::int64_t>> raw;
    const int n_users = 1 + static_cast<int>(rng.uniform_index(max_users));
    const int n_items = 1 + static_cast<int>(rng.uniform_index(max_items));
    const int n_events = 1 + static_cast<int>(rng.uniform_index(max_events));
    for (int e = 0; e < n_events; ++e) {
        raw.emplace_back("u" + std::to_string(rng.uniform_index(n_users)),
                         "i" + std::to_string(rng.uniform_index(n_items)),
                         0.5 + 0.5 * static_cast<double>(rng.uniform_index(10)),
                         static_cast<std::int64_t>(rng.uniform_index(1000)));
    }
    return InteractionLog::from_events(raw);
}

std::multiset<std::pair<std::string, std::string>> event_keys(const InteractionLog& log) {
    std::multiset<std::pair<std::string, std::string>> keys;
    for (const auto& e : log.events()) {
        keys.emplace(log.user_id(e.user), log.item_id(e.item));
    }
    return keys;
}

}  // namespace

TEST_CASE("load_interactions parses tsv and collapses duplicates last-wins") {
    const std::string tsv =
        "1\t10\t5\t100\n"
        "1\t11\t4\t101\n"
        "2\t10\t3\t102\n"
        "2\t10\t5\t103\n";
    const auto log = parse_interactions(tsv, LogFormat::tsv, "fixture");
    CHECK(log.num_users() == 2);
    CHECK(log.num_items() == 2);
    CHECK(log.num_events() == 3);
    const int u2 = log.user_index("2");
    const int i10 = log.item_index("10");
    bool found = false;
    for (const auto& e : log.events()) {
        if (e.user == u2 && e.item == i10) {
            found = true;
            CHECK(e.rating == 5.0);  // latest timestamp won
            CHECK(e.timestamp == 103);
        }
    }
    CHECK(found);
}

TEST_CASE("load_interactions rejects an empty file") {
    CHECK_THROWS_AS(parse_interactions("", LogFormat::tsv, "fixture"), DataError);
}

TEST_CASE("load_interactions parses movielens :: records") {
    const auto log =
        parse_interactions("1::1193::5::978300760\n", LogFormat::movielens_dat, "fixture");
    CHECK(log.num_events() == 1);
    CHECK(log.user_id(log.events()[0].user) == "1");
    CHECK(log.item_id(log.events()[0].item) == "1193");
    CHECK(log.events()[0].rating == 5.0);
}

TEST_CASE("load_interactions reports the malformed line") {
    const std::string bad = "1\t10\t5\t100\n1\t11\tfour\t101\n";
    try {
        parse_interactions(bad, LogFormat::tsv, "fixture");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("k_core_filter with k=1 is the identity") {
    Rng rng(5);
    const auto log = random_log(rng);
    const auto filtered = k_core_filter(log, 1);
    CHECK(event_keys(filtered) == event_keys(log));
}

TEST_CASE("k_core_filter iterates to the fixpoint") {
    // u1:(a,b), u2:(a), u3:(a,b); k=2 drops u2 only
    const std::string tsv =
        "u1\ta\t1\t1\n"
        "u1\tb\t1\t2\n"
        "u2\ta\t1\t3\n"
        "u3\ta\t1\t4\n"
        "u3\tb\t1\t5\n";
    const auto log = parse_interactions(tsv, LogFormat::tsv, "fixture");
    const auto filtered = k_core_filter(log, 2);
    CHECK(filtered.num_users() == 2);
    CHECK(filtered.num_items() == 2);
    CHECK(filtered.num_events() == 4);
    CHECK(filtered.user_index("u2") == -1);
}

TEST_CASE("k_core_filter reports the offending k when everything dies") {
    // star: one user, five items with one event each
    std::string tsv;
    for (int i = 0; i < 5; ++i) {
        tsv += "u\ti" + std::to_string(i) + "\t1\t" + std::to_string(i) + "\n";
    }
    const auto log = parse_interactions(tsv, LogFormat::tsv, "fixture");
    try {
        k_core_filter(log, 2);
        FAIL("expected EmptyAfterFilterError");
    } catch (const EmptyAfterFilterError& e) {
        CHECK(e.k == 2);
    }
}

TEST_CASE("temporal split takes the latest events") {
    const std::string tsv =
        "a\tx\t1\t10\n"
        "b\tx\t1\t30\n"
        "c\tx\t1\t20\n"
        "d\tx\t1\t40\n";
    const auto log = parse_interactions(tsv, LogFormat::tsv, "fixture");
    const auto plan = split(log, SplitStrategy::temporal, 0.25, 0);
    REQUIRE(plan.test_indices.size() == 1);
    CHECK(log.events()[plan.test_indices[0]].timestamp == 40);
}

TEST_CASE("per_user split keeps early events in train") {
    const std::string tsv =
        "u\ta\t1\t1\n"
        "u\tb\t1\t2\n";
    const auto log = parse_interactions(tsv, LogFormat::tsv, "fixture");
    const auto plan = split(log, SplitStrategy::per_user, 0.5, 0);
    REQUIRE(plan.train_indices.size() == 1);
    REQUIRE(plan.test_indices.size() == 1);
    CHECK(log.events()[plan.train_indices[0]].timestamp == 1);
    CHECK(log.events()[plan.test_indices[0]].timestamp == 2);
}

TEST_CASE("random split is deterministic in the seed") {
    Rng rng(77);
    const auto log = random_log(rng, 10, 8, 40);
    const auto a = split(log, SplitStrategy::random, 0.3, 123);
    const auto b = split(log, SplitStrategy::random, 0.3, 123);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.test_indices == b.test_indices);
}

TEST_CASE("split rejects a ratio outside (0,1)") {
    Rng rng(3);
    const auto log = random_log(rng);
    CHECK_THROWS_AS(split(log, SplitStrategy::random, 0.0, 1), ArgumentError);
    CHECK_THROWS_AS(split(log, SplitStrategy::random, 1.0, 1), ArgumentError);
}

TEST_CASE("simulate_cold_start with fraction 0 is the identity") {
    Rng rng(9);
    const auto log = random_log(rng);
    const auto plan = split(log, SplitStrategy::random, 0.4, 7);
    const auto after = simulate_cold_start(plan, log, 0.0, 11);
    CHECK(after.train_indices == plan.train_indices);
    CHECK(after.test_indices == plan.test_indices);
    CHECK(after.cold_items.empty());
}

TEST_CASE("simulate_cold_start evicts every train event of sampled items") {
    // two items, both with test events; fraction 0.5 -> exactly one goes cold
    const std::string tsv =
        "u1\ta\t1\t1\n"
        "u1\tb\t1\t2\n"
        "u2\ta\t1\t3\n"
        "u2\tb\t1\t4\n"
        "u3\ta\t1\t5\n"
        "u3\tb\t1\t6\n";
    const auto log = parse_interactions(tsv, LogFormat::tsv, "fixture");
    const auto plan = split(log, SplitStrategy::temporal, 0.34, 0);  // test = last 2 events
    const auto after = simulate_cold_start(plan, log, 0.5, 3);
    REQUIRE(after.cold_items.size() == 1);
    const int cold = after.cold_items[0];
    for (std::size_t idx : after.train_indices) {
        CHECK(log.events()[idx].item != cold);
    }
    bool in_test = false;
    for (std::size_t idx : after.test_indices) in_test = in_test || log.events()[idx].item == cold;
    CHECK(in_test);
}

TEST_CASE("dataset_stats on fixtures") {
    SUBCASE("single event") {
        const auto log = parse_interactions("u\ti\t1\t1\n", LogFormat::tsv, "fixture");
        const auto s = dataset_stats(log);
        CHECK(s.density == 1.0);
        CHECK(s.avg_per_user == 1.0);
    }
    SUBCASE("2 users x 3 items, 3 events") {
        const std::string tsv =
            "u1\ta\t1\t1\n"
            "u1\tb\t1\t2\n"
            "u2\tc\t1\t3\n";
        const auto s = dataset_stats(parse_interactions(tsv, LogFormat::tsv, "fixture"));
        CHECK(s.n_interactions == 3);
        CHECK(s.n_users == 2);
        CHECK(s.n_items == 3);
        CHECK(s.density == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(s.avg_per_user == doctest::Approx(1.5).epsilon(1e-15));
        CHECK(s.avg_per_item == doctest::Approx(1.0).epsilon(1e-15));
    }
}

// Invariants over randomized corpora; the acceptance suite reruns this
// family at 1000 corpora.
TEST_CASE("split and k-core invariants hold on random corpora") {
    Rng rng(2024);
    for (int trial = 0; trial < 150; ++trial) {
        const auto log = random_log(rng);
        const auto strategy = static_cast<SplitStrategy>(rng.uniform_index(3));
        const double ratio = 0.1 + 0.8 * rng.uniform();
        const auto seed = rng.next_u64();
        const auto plan = split(log, strategy, ratio, seed);

        // partition property
        CHECK(plan.train_indices.size() + plan.test_indices.size() == log.num_events());
        std::set<std::size_t> train(plan.train_indices.begin(), plan.train_indices.end());
        for (std::size_t idx : plan.test_indices) CHECK(!train.count(idx));

        if (strategy == SplitStrategy::temporal && !plan.train_indices.empty() &&
            !plan.test_indices.empty()) {
            std::int64_t max_train = INT64_MIN, min_test = INT64_MAX;
            for (std::size_t idx : plan.train_indices) {
                max_train = std::max(max_train, log.events()[idx].timestamp);
            }
            for (std::size_t idx : plan.test_indices) {
                min_test = std::min(min_test, log.events()[idx].timestamp);
            }
            CHECK(max_train <= min_test);
        }
        if (strategy == SplitStrategy::per_user) {
            std::vector<int> total(log.num_users(), 0), in_train(log.num_users(), 0);
            for (const auto& e : log.events()) ++total[e.user];
            for (std::size_t idx : plan.train_indices) ++in_train[log.events()[idx].user];
            for (int u = 0; u < log.num_users(); ++u) {
                if (total[u] >= 2) CHECK(in_train[u] >= 1);
            }
        }

        // k-core: degree bound + idempotence
        const int k = 1 + static_cast<int>(rng.uniform_index(3));
        try {
            const auto filtered = k_core_filter(log, k);
            std::vector<int> udeg(filtered.num_users(), 0), ideg(filtered.num_items(), 0);
            for (const auto& e : filtered.events()) {
                ++udeg[e.user];
                ++ideg[e.item];
            }
            for (int d : udeg) CHECK(d >= k);
            for (int d : ideg) CHECK(d >= k);
            const auto twice = k_core_filter(filtered, k);
            CHECK(event_keys(twice) == event_keys(filtered));
            CHECK(twice.num_users() == filtered.num_users());
        } catch (const EmptyAfterFilterError&) {
            // legal outcome for sparse corpora
        }

        // cold-start eviction
        if (!plan.test_indices.empty()) {
            try {
                const auto cold_plan = simulate_cold_start(plan, log, 0.3, rng.next_u64());
                std::set<int> cold(cold_plan.cold_items.begin(), cold_plan.cold_items.end());
                for (std::size_t idx : cold_plan.train_indices) {
                    CHECK(!cold.count(log.events()[idx].item));
                }
                std::set<int> test_items;
                for (std::size_t idx : cold_plan.test_indices) {
                    test_items.insert(log.events()[idx].item);
                }
                for (int item : cold) CHECK(test_items.count(item));
            } catch (const DataError&) {
                // fraction emptied train; also legal
            }
        }

        // stats identities
        const auto s = dataset_stats(log);
        CHECK(s.avg_per_user * s.n_users == doctest::Approx(double(s.n_interactions)));
        CHECK(s.avg_per_item * s.n_items == doctest::Approx(double(s.n_interactions)));
        CHECK(s.density > 0.0);
        CHECK(s.density <= 1.0);
    }
}
