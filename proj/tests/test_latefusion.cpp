#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "oracles.hpp"
#include "recbench/error.hpp"
#include "recbench/latefusion.hpp"
#include "recbench/rng.hpp"

using namespace recbench;
using namespace recbench::latefusion;

namespace {

RankedList list_of(const std::vector<int>& items) {
    RankedList l;
    l.user = 0;
    l.items = items;
    for (std::size_t r = 0; r < items.size(); ++r) {
        l.scores.push_back(static_cast<double>(items.size() - r));
    }
    return l;
}

FusionInput input_of(const std::vector<std::vector<int>>& lists, int catalog) {
    FusionInput in;
    for (const auto& l : lists) in.lists.push_back(list_of(l));
    in.catalog_size = catalog;
    return in;
}

}  // namespace

TEST_CASE("borda matches the hand-worked example") {
    // lists [i1,i2,i3] and [i2,i1,i3] over catalog 3: scores 5, 5, 2
    const auto meta = borda(input_of({{1, 2, 3}, {2, 1, 3}}, 3));
    CHECK(meta.items == std::vector<int>{1, 2, 3});
    CHECK(meta.fused_scores[0] == 5.0);
    CHECK(meta.fused_scores[1] == 5.0);
    CHECK(meta.fused_scores[2] == 2.0);
}

TEST_CASE("borda of a single list preserves its order") {
    const auto meta = borda(input_of({{4, 2, 9}}, 10));
    CHECK(meta.items == std::vector<int>{4, 2, 9});
}

TEST_CASE("borda missing-rank rule is len+1") {
    // item 7 only in list 1 at rank 1; both lists length 2, catalog 4:
    // score = (4-1+1) + (4-3+1) = 6
    const auto meta = borda(input_of({{7, 1}, {1, 2}}, 4));
    const auto at = std::find(meta.items.begin(), meta.items.end(), 7) - meta.items.begin();
    CHECK(meta.fused_scores[static_cast<std::size_t>(at)] == 6.0);
}

TEST_CASE("borda rejects a catalog smaller than a list") {
    CHECK_THROWS_AS(borda(input_of({{1, 2, 3}}, 2)), ArgumentError);
}

TEST_CASE("weighted borda degenerate and uniform weights") {
    auto in = input_of({{1, 2}, {2, 1}}, 2);
    in.weights = std::vector<double>{1.0, 0.0};
    CHECK(weighted_borda(in).items == std::vector<int>{1, 2});

    in.weights = std::vector<double>{0.5, 0.5};
    const auto uniform = weighted_borda(in);
    const auto plain = borda(in);
    CHECK(uniform.items == plain.items);
}

TEST_CASE("weighted borda hand-worked asymmetric weights") {
    // weights (0.9, 0.1), lists [a,b] and [b,a], catalog 2:
    // a: .9*2+.1*1 = 1.9, b: 1.1
    auto in = input_of({{10, 11}, {11, 10}}, 2);
    in.weights = std::vector<double>{0.9, 0.1};
    const auto meta = weighted_borda(in);
    CHECK(meta.items == std::vector<int>{10, 11});
    CHECK(meta.fused_scores[0] == doctest::Approx(1.9).epsilon(1e-12));
    CHECK(meta.fused_scores[1] == doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("weighted borda validates the weights") {
    auto in = input_of({{1}, {2}}, 2);
    CHECK_THROWS_AS(weighted_borda(in), ArgumentError);  // missing
    in.weights = std::vector<double>{0.7, 0.7};
    CHECK_THROWS_AS(weighted_borda(in), ArgumentError);  // sum != 1
    in.weights = std::vector<double>{1.5, -0.5};
    CHECK_THROWS_AS(weighted_borda(in), ArgumentError);  // negative
}

TEST_CASE("average rank fixtures") {
    SUBCASE("symmetric pair breaks ties by index") {
        const auto meta = average_rank(input_of({{5, 6}, {6, 5}}, 2));
        CHECK(meta.items == std::vector<int>{5, 6});
        CHECK(meta.fused_scores[0] == 1.5);
    }
    SUBCASE("unanimous top stays on top") {
        const auto meta = average_rank(input_of({{3, 1, 2}, {3, 2, 1}, {3, 1, 2}}, 3));
        CHECK(meta.items.front() == 3);
        CHECK(meta.fused_scores.front() == 1.0);
    }
    SUBCASE("hand-worked three items") {
        // [a,b,c] and [c,a,b]: a=1.5, b=2.5, c=2 -> a, c, b
        const auto meta = average_rank(input_of({{1, 2, 3}, {3, 1, 2}}, 3));
        CHECK(meta.items == std::vector<int>{1, 3, 2});
    }
}

TEST_CASE("rrf fixtures") {
    SUBCASE("single list is a monotone map") {
        auto in = input_of({{8, 3, 5}}, 3);
        const auto meta = rrf(in);
        CHECK(meta.items == std::vector<int>{8, 3, 5});
        CHECK(meta.fused_scores[0] == doctest::Approx(1.0 / 61).epsilon(1e-12));
        CHECK(meta.fused_scores[1] == doctest::Approx(1.0 / 62).epsilon(1e-12));
    }
    SUBCASE("two rank-1 votes with k=60") {
        auto in = input_of({{4, 1}, {4, 2}}, 3);
        const auto meta = rrf(in);
        CHECK(meta.items.front() == 4);
        CHECK(meta.fused_scores.front() == doctest::Approx(2.0 / 61).epsilon(1e-9));
        CHECK(meta.fused_scores.front() == doctest::Approx(0.032787).epsilon(1e-4));
    }
}

TEST_CASE("exhaustive oracle equivalence on small instances") {
    // every permutation-derived instance with <= 5 items and <= 3 systems
    Rng rng(211);
    int checked = 0;
    for (int n_items = 1; n_items <= 5; ++n_items) {
        std::vector<int> base(n_items);
        std::iota(base.begin(), base.end(), 0);
        std::vector<int> perm = base;
        do {
            for (int n_systems = 1; n_systems <= 3; ++n_systems) {
                std::vector<std::vector<int>> lists;
                lists.push_back(perm);
                for (int m = 1; m < n_systems; ++m) {
                    std::vector<int> other = base;
                    rng.shuffle(other);
                    other.resize(1 + rng.uniform_index(static_cast<std::size_t>(n_items)));
                    lists.push_back(other);
                }
                const int catalog = n_items + static_cast<int>(rng.uniform_index(3));
                auto in = input_of(lists, catalog);
                in.rrf_k = 60;

                CHECK(borda(in).items == oracle::naive_borda(lists, catalog));
                CHECK(average_rank(in).items == oracle::naive_average_rank(lists));
                CHECK(rrf(in).items == oracle::naive_rrf(lists, 60));

                std::vector<double> w(lists.size());
                double sum = 0.0;
                for (auto& x : w) {
                    x = 0.1 + rng.uniform();
                    sum += x;
                }
                for (auto& x : w) x /= sum;
                in.weights = w;
                CHECK(weighted_borda(in).items == oracle::naive_weighted_borda(lists, w, catalog));
                ++checked;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    CHECK(checked > 400);
}

TEST_CASE("fusion rules are invariant under system relabeling") {
    Rng rng(223);
    for (int trial = 0; trial < 40; ++trial) {
        const int n_items = 2 + static_cast<int>(rng.uniform_index(5));
        const int n_systems = 2 + static_cast<int>(rng.uniform_index(3));
        std::vector<std::vector<int>> lists;
        std::vector<int> base(n_items);
        std::iota(base.begin(), base.end(), 0);
        for (int m = 0; m < n_systems; ++m) {
            std::vector<int> l = base;
            rng.shuffle(l);
            l.resize(1 + rng.uniform_index(static_cast<std::size_t>(n_items)));
            lists.push_back(l);
        }
        std::vector<double> w(lists.size());
        double sum = 0.0;
        for (auto& x : w) {
            x = 0.1 + rng.uniform();
            sum += x;
        }
        for (auto& x : w) x /= sum;

        auto in = input_of(lists, n_items);
        in.weights = w;
        std::vector<std::size_t> perm(lists.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        std::vector<std::vector<int>> shuffled;
        std::vector<double> shuffled_w;
        for (std::size_t p : perm) {
            shuffled.push_back(lists[p]);
            shuffled_w.push_back(w[p]);
        }
        auto in2 = input_of(shuffled, n_items);
        in2.weights = shuffled_w;

        CHECK(borda(in).items == borda(in2).items);
        CHECK(average_rank(in).items == average_rank(in2).items);
        CHECK(rrf(in).items == rrf(in2).items);
        CHECK(weighted_borda(in).items == weighted_borda(in2).items);
    }
}

TEST_CASE("fusing m identical lists reproduces the list") {
    Rng rng(227);
    for (int trial = 0; trial < 20; ++trial) {
        const int n_items = 1 + static_cast<int>(rng.uniform_index(6));
        std::vector<int> l(n_items);
        std::iota(l.begin(), l.end(), 0);
        rng.shuffle(l);
        const int m = 1 + static_cast<int>(rng.uniform_index(4));
        std::vector<std::vector<int>> lists(m, l);
        auto in = input_of(lists, n_items);
        in.weights = latefusion::weight_schedule("linear", m);
        CHECK(borda(in).items == l);
        CHECK(weighted_borda(in).items == l);
        CHECK(average_rank(in).items == l);
        CHECK(rrf(in).items == l);
    }
}

TEST_CASE("output covers exactly the union of input items") {
    Rng rng(229);
    for (int trial = 0; trial < 30; ++trial) {
        const int n_items = 3 + static_cast<int>(rng.uniform_index(6));
        std::vector<std::vector<int>> lists;
        std::set<int> expected;
        for (int m = 0; m < 3; ++m) {
            std::vector<int> base(n_items);
            std::iota(base.begin(), base.end(), 0);
            rng.shuffle(base);
            base.resize(1 + rng.uniform_index(static_cast<std::size_t>(n_items)));
            expected.insert(base.begin(), base.end());
            lists.push_back(base);
        }
        const auto meta = rrf(input_of(lists, n_items));
        std::set<int> got(meta.items.begin(), meta.items.end());
        CHECK(got == expected);
        CHECK(meta.items.size() == got.size());  // no duplicates
    }
}

TEST_CASE("weight schedules normalize and order sensibly") {
    for (const char* name : {"uniform", "linear", "harmonic", "log", "exp", "quadratic"}) {
        const auto w = weight_schedule(name, 4);
        REQUIRE(w.size() == 4);
        double sum = 0.0;
        for (double x : w) {
            CHECK(x > 0.0);
            sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        if (std::string(name) != "uniform") {
            for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] <= w[i - 1]);
        }
    }
    CHECK_THROWS_AS(weight_schedule("cubic", 3), ArgumentError);
}

TEST_CASE("interchange files round-trip rankings") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "recbench_lists_test.tsv").string();

    std::vector<RankedList> lists;
    RankedList l1;
    l1.user = 0;
    l1.items = {2, 0, 1};
    l1.scores = {0.9, 0.5, 0.25};
    RankedList l2;
    l2.user = 1;
    l2.items = {1, 2};
    l2.scores = {1.5, -0.5};
    lists = {l1, l2};
    write_interchange_lists(path, lists, {"alice", "bob"}, {"ia", "ib", "ic"});

    const auto loaded = read_interchange(path);
    REQUIRE(loaded.by_user.size() == 2);
    const auto& alice = loaded.by_user.at("alice");
    REQUIRE(alice.size() == 3);
    CHECK(alice[0].first == "ic");
    CHECK(alice[0].second == 0.9);
    CHECK(alice[2].first == "ib");
    const auto& bob = loaded.by_user.at("bob");
    CHECK(bob[0].first == "ib");
    CHECK(bob[0].second == 1.5);
    std::filesystem::remove(path);
}

TEST_CASE("interchange reader rejects gaps in ranks") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "recbench_bad_lists.tsv").string();
    {
        std::ofstream out(path);
        out << "u\ta\t1\t0.5\nu\tb\t3\t0.4\n";
    }
    CHECK_THROWS_AS(read_interchange(path), ParseError);
    std::filesystem::remove(path);
}
