#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace recbench::textprep {

struct ItemMetadata {
    std::string item_id;
    std::string title;
    std::vector<std::string> genres;  // source order preserved
    std::vector<std::string> tags;
};

enum class TextMode { NA, A };  // raw concatenation vs LLM-augmented synopsis

struct PromptPair {
    std::string system;
    std::string user;
};

struct PromptTranscript {
    std::string system;
    std::string user;
    std::string response;
    std::string provider;
    std::string note;  // non-empty when a fallback replaced the provider output
};

struct CanonicalText {
    std::string item_id;
    TextMode mode = TextMode::NA;
    std::string text;
    std::optional<PromptTranscript> provenance;
};

// One call per item; implementations must be deterministic for the stub
// contract to hold. Failures are reported by throwing.
class SynopsisProvider {
public:
    virtual ~SynopsisProvider() = default;
    virtual std::string name() const = 0;
    virtual std::string generate(const PromptPair& prompt) = 0;
};

// Deterministic offline provider: wraps the title so tests and dry runs can
// recognise the output. Identical input -> identical output.
class StubSynopsisProvider : public SynopsisProvider {
public:
    std::string name() const override { return "stub"; }
    std::string generate(const PromptPair& prompt) override;
};

// Optional adapter for an OpenAI-style chat endpoint over plain HTTP (a
// local inference server, typically). Never exercised by the test suite.
class HttpSynopsisProvider : public SynopsisProvider {
public:
    HttpSynopsisProvider(std::string host, int port, std::string path, std::string model,
                         std::string api_key = "");
    std::string name() const override { return "http:" + model_; }
    std::string generate(const PromptPair& prompt) override;

private:
    std::string host_;
    int port_;
    std::string path_;
    std::string model_;
    std::string api_key_;
};

// Lower-cased title + genres ('|' -> ' ') + tags, single-spaced.
CanonicalText canonical_text_na(const ItemMetadata& meta);

// System/user message pair for the synopsis request; byte-identical for
// identical metadata.
PromptPair build_synopsis_prompt(const ItemMetadata& meta);

enum class ProviderFallback { none, na_text };

// A-mode text stored verbatim with the full prompt transcript. On provider
// failure: rethrows as ProviderError, or returns NA text flagged in
// provenance when fallback is enabled.
CanonicalText augment_synopsis(const ItemMetadata& meta, SynopsisProvider& provider,
                               ProviderFallback fallback = ProviderFallback::none);

enum class Modality { text, visual, audio };

// Item-id-keyed dense vectors for one modality. Row order is file order.
struct EmbeddingTable {
    Modality modality = Modality::text;
    std::string variant;
    int dim = 0;
    std::vector<std::string> ids;
    Eigen::MatrixXd rows;  // ids.size() x dim
    std::unordered_map<std::string, int> index;

    bool contains(const std::string& id) const { return index.count(id) > 0; }
    Eigen::VectorXd row(const std::string& id) const;
};

// TSV: item_id<TAB>v1<TAB>...<TAB>vd, no header. Width inferred from the
// first row; ragged rows and duplicate ids are rejected.
EmbeddingTable load_embedding_table(const std::string& path, Modality modality,
                                    const std::string& variant);
EmbeddingTable parse_embedding_table(const std::string& text, Modality modality,
                                     const std::string& variant, const std::string& source_name);

struct L2NormalizeResult {
    EmbeddingTable table;
    std::vector<std::string> zero_rows;  // ids left untouched (and worth a warning)
};

L2NormalizeResult l2_normalize(const EmbeddingTable& table);

// Item metadata file: movielens_dat is id::title::g1|g2|..., tsv is
// id<TAB>title<TAB>genres<TAB>[tags], genres and tags '|'-delimited.
std::vector<ItemMetadata> load_metadata(const std::string& path, bool movielens_format);

// Append-only prompt/response log, one JSON record per line. Writes are
// serialized so augmentation may run concurrently across items.
class TranscriptLog {
public:
    explicit TranscriptLog(const std::string& path);
    ~TranscriptLog();
    TranscriptLog(const TranscriptLog&) = delete;
    TranscriptLog& operator=(const TranscriptLog&) = delete;

    void append(const CanonicalText& text);

private:
    struct Impl;
    Impl* impl_;
};

const char* to_string(Modality m);
Modality modality_from_string(const std::string& s);

}  // namespace recbench::textprep
