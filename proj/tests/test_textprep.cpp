#include <doctest.h>

#include <cctype>

#include "recbench/error.hpp"
#include "recbench/rng.hpp"
#include "recbench/textprep.hpp"

using namespace recbench;
using namespace recbench::textprep;

TEST_CASE("canonical_text_na concatenates title, genres, tags lower-cased") {
    ItemMetadata meta{"1", "Toy Story (1995)", {"Animation", "Children's", "Comedy"},
                      {"pixar", "fun"}};
    CHECK(canonical_text_na(meta).text ==
          "toy story (1995) animation children's comedy pixar fun");
}

TEST_CASE("canonical_text_na with empty lists has no stray spaces") {
    ItemMetadata meta{"1", "X", {}, {}};
    CHECK(canonical_text_na(meta).text == "x");
}

TEST_CASE("canonical_text_na maps '|' delimiters to spaces") {
    ItemMetadata meta{"1", "T", {"Drama|Mystery|Thriller"}, {}};
    CHECK(canonical_text_na(meta).text == "t drama mystery thriller");
}

TEST_CASE("canonical_text_na output has no upper-case and no delimiters") {
    Rng rng(31);
    const std::string alphabet = "aA zZ|:\t(),'9-";
    for (int trial = 0; trial < 300; ++trial) {
        auto random_string = [&](std::size_t max_len) {
            std::string s;
            const std::size_t len = 1 + rng.uniform_index(max_len);
            for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.uniform_index(alphabet.size())];
            return s;
        };
        ItemMetadata meta;
        meta.item_id = "x";
        meta.title = random_string(20);
        for (std::size_t g = rng.uniform_index(4); g > 0; --g) meta.genres.push_back(random_string(8));
        for (std::size_t t = rng.uniform_index(4); t > 0; --t) meta.tags.push_back(random_string(8));
        const std::string out = canonical_text_na(meta).text;
        for (char c : out) {
            CHECK(!std::isupper(static_cast<unsigned char>(c)));
            CHECK(c != '|');
            CHECK(c != '\t');
        }
        CHECK(out.find("  ") == std::string::npos);
        CHECK(out.find("::") == std::string::npos);
        if (!out.empty()) {
            CHECK(out.front() != ' ');
            CHECK(out.back() != ' ');
        }
    }
}

TEST_CASE("build_synopsis_prompt is byte-stable and carries the template") {
    ItemMetadata meta{"1", "Toy Story (1995)", {"Animation", "Comedy"}, {"pixar"}};
    const PromptPair a = build_synopsis_prompt(meta);
    const PromptPair b = build_synopsis_prompt(meta);
    CHECK(a.system == "You are a helpful assistant.");
    CHECK(a.user == b.user);
    CHECK(a.user.find("100-150-word synopsis") != std::string::npos);
    CHECK(a.user.find("Title: Toy Story (1995)") != std::string::npos);
    CHECK(a.user.find("Genre List: [Animation, Comedy]") != std::string::npos);
    CHECK(a.user.find("Tags: [pixar]") != std::string::npos);
}

TEST_CASE("build_synopsis_prompt renders empty lists as []") {
    ItemMetadata meta{"1", "X", {}, {}};
    const PromptPair p = build_synopsis_prompt(meta);
    CHECK(p.user.find("Genre List: []") != std::string::npos);
    CHECK(p.user.find("Tags: []") != std::string::npos);
}

namespace {

class FailingProvider : public SynopsisProvider {
public:
    std::string name() const override { return "failing"; }
    std::string generate(const PromptPair&) override { throw std::runtime_error("timeout"); }
};

}  // namespace

TEST_CASE("augment_synopsis stores the stub output verbatim with a transcript") {
    ItemMetadata meta{"42", "Toy Story (1995)", {"Animation"}, {}};
    StubSynopsisProvider stub;
    const CanonicalText text = augment_synopsis(meta, stub);
    CHECK(text.mode == TextMode::A);
    CHECK(text.text == "SYNOPSIS(Toy Story (1995))");
    REQUIRE(text.provenance.has_value());
    CHECK(text.provenance->provider == "stub");
    CHECK(text.provenance->response == text.text);
    CHECK(text.provenance->user.find("Toy Story") != std::string::npos);

    const CanonicalText again = augment_synopsis(meta, stub);
    CHECK(again.text == text.text);  // reproducible across calls
}

TEST_CASE("augment_synopsis surfaces provider failures with the item id") {
    ItemMetadata meta{"42", "X", {}, {}};
    FailingProvider bad;
    try {
        augment_synopsis(meta, bad);
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        CHECK(e.item_id == "42");
    }
}

TEST_CASE("augment_synopsis falls back to NA text when enabled") {
    ItemMetadata meta{"42", "Big Night", {"Drama"}, {}};
    FailingProvider bad;
    const CanonicalText text = augment_synopsis(meta, bad, ProviderFallback::na_text);
    CHECK(text.mode == TextMode::NA);
    CHECK(text.text == "big night drama");
    REQUIRE(text.provenance.has_value());
    CHECK(!text.provenance->note.empty());
}

TEST_CASE("parse_embedding_table reads rows and infers dim") {
    const auto t = parse_embedding_table("a\t1\t2\t3\nb\t4\t5\t6\n", Modality::text, "st", "fx");
    CHECK(t.dim == 3);
    CHECK(t.ids.size() == 2);
    CHECK(t.row("b")[2] == 6.0);
}

TEST_CASE("parse_embedding_table rejects ragged rows, duplicates, bad cells") {
    CHECK_THROWS_AS(parse_embedding_table("a\t1\t2\t3\nb\t4\t5\n", Modality::text, "v", "fx"),
                    ParseError);
    CHECK_THROWS_AS(parse_embedding_table("a\t1\na\t2\n", Modality::text, "v", "fx"), ParseError);
    try {
        parse_embedding_table("a\t1\t2\nb\t3\tx\n", Modality::text, "v", "fx");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("'b'") != std::string::npos);
        CHECK(msg.find("column 2") != std::string::npos);
    }
}

TEST_CASE("l2_normalize scales rows to unit norm and reports zero rows") {
    const auto t =
        parse_embedding_table("a\t3\t4\nzero\t0\t0\nunit\t1\t0\n", Modality::audio, "blf", "fx");
    const auto res = l2_normalize(t);
    CHECK(res.table.row("a")[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(res.table.row("a")[1] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(res.table.row("unit")[0] == 1.0);
    CHECK(res.table.row("zero").norm() == 0.0);
    REQUIRE(res.zero_rows.size() == 1);
    CHECK(res.zero_rows[0] == "zero");
}

TEST_CASE("l2_normalize is idempotent and norm-restoring") {
    Rng rng(17);
    std::string tsv;
    for (int r = 0; r < 20; ++r) {
        tsv += "i" + std::to_string(r);
        for (int c = 0; c < 5; ++c) tsv += "\t" + std::to_string(rng.normal() * 10.0);
        tsv += "\n";
    }
    const auto t = parse_embedding_table(tsv, Modality::visual, "cnn", "fx");
    const auto once = l2_normalize(t);
    for (const auto& id : once.table.ids) {
        CHECK(std::abs(once.table.row(id).norm() - 1.0) < 1e-9);
    }
    const auto twice = l2_normalize(once.table);
    for (const auto& id : t.ids) {
        CHECK((twice.table.row(id) - once.table.row(id)).norm() < 1e-12);
    }
}
