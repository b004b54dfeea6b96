#include "recbench/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "recbench/error.hpp"

namespace recbench::textprep {

namespace {

// Structural delimiters ('|', "::", tabs) become spaces, everything is
// lower-cased, and whitespace runs collapse to single spaces.
std::string scrub(const std::string& in) {
    std::string flat;
    flat.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        char c = in[i];
        if (c == '|' || c == '\t' || c == '\n' || c == '\r') c = ' ';
        if (c == ':' && i + 1 < in.size() && in[i + 1] == ':') {
            flat += ' ';
            ++i;
            continue;
        }
        flat += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::string out;
    out.reserve(flat.size());
    bool in_space = true;  // also trims leading spaces
    for (char c : flat) {
        if (c == ' ') {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += c;
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string bracket_list(const std::vector<std::string>& parts) {
    return "[" + join(parts, ", ") + "]";
}

}  // namespace

CanonicalText canonical_text_na(const ItemMetadata& meta) {
    if (meta.title.empty()) throw ArgumentError("canonical_text_na: empty title for item " + meta.item_id);
    std::string assembled = meta.title;
    const std::string genre_part = join(meta.genres, " ");
    const std::string tag_part = join(meta.tags, " ");
    if (!genre_part.empty()) assembled += " " + genre_part;
    if (!tag_part.empty()) assembled += " " + tag_part;
    CanonicalText out;
    out.item_id = meta.item_id;
    out.mode = TextMode::NA;
    out.text = scrub(assembled);
    return out;
}

PromptPair build_synopsis_prompt(const ItemMetadata& meta) {
    if (meta.title.empty()) throw ArgumentError("build_synopsis_prompt: empty title for item " + meta.item_id);
    PromptPair p;
    p.system = "You are a helpful assistant.";
    std::ostringstream user;
    user << "Write a vivid, engaging 100-150-word synopsis for a movie or artist.\n"
         << "\n"
         << "Title: " << meta.title << "\n"
         << "Genre List: " << bracket_list(meta.genres) << "\n"
         << "Tags: " << bracket_list(meta.tags) << "\n";
    p.user = user.str();
    return p;
}

std::string StubSynopsisProvider::generate(const PromptPair& prompt) {
    // Recover the title line from the prompt so output depends only on input.
    const std::string marker = "Title: ";
    const std::size_t at = prompt.user.find(marker);
    std::string title;
    if (at != std::string::npos) {
        const std::size_t end = prompt.user.find('\n', at);
        title = prompt.user.substr(at + marker.size(), end - at - marker.size());
    }
    return "SYNOPSIS(" + title + ")";
}

CanonicalText augment_synopsis(const ItemMetadata& meta, SynopsisProvider& provider,
                               ProviderFallback fallback) {
    const PromptPair prompt = build_synopsis_prompt(meta);
    std::string response;
    try {
        response = provider.generate(prompt);
    } catch (const std::exception& e) {
        if (fallback == ProviderFallback::none) {
            throw ProviderError(meta.item_id, "synopsis provider '" + provider.name() +
                                                  "' failed for item " + meta.item_id + ": " +
                                                  e.what());
        }
        CanonicalText out = canonical_text_na(meta);
        out.provenance = PromptTranscript{prompt.system, prompt.user, "", provider.name(),
                                          std::string("provider failed, fell back to NA text: ") +
                                              e.what()};
        return out;
    }
    CanonicalText out;
    out.item_id = meta.item_id;
    out.mode = TextMode::A;
    out.text = response;  // stored verbatim
    out.provenance = PromptTranscript{prompt.system, prompt.user, response, provider.name(), ""};
    return out;
}

Eigen::VectorXd EmbeddingTable::row(const std::string& id) const {
    auto it = index.find(id);
    if (it == index.end()) throw ArgumentError("embedding table has no row for item " + id);
    return rows.row(it->second).transpose();
}

EmbeddingTable parse_embedding_table(const std::string& text, Modality modality,
                                     const std::string& variant, const std::string& source_name) {
    EmbeddingTable table;
    table.modality = modality;
    table.variant = variant;

    std::vector<std::vector<double>> values;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
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
        if (fields.size() < 2) {
            throw ParseError(source_name + ":" + std::to_string(line_no) +
                             ": embedding row needs an id and at least one value");
        }
        const std::string& id = fields[0];
        if (table.index.count(id)) {
            throw ParseError(source_name + ":" + std::to_string(line_no) + ": duplicate item id '" +
                             id + "'");
        }
        const int width = static_cast<int>(fields.size()) - 1;
        if (table.dim == 0) {
            table.dim = width;
        } else if (width != table.dim) {
            throw ParseError(source_name + ":" + std::to_string(line_no) + ": item '" + id +
                             "' has " + std::to_string(width) + " values, expected " +
                             std::to_string(table.dim));
        }
        std::vector<double> row(width);
        for (int c = 0; c < width; ++c) {
            try {
                std::size_t used = 0;
                row[c] = std::stod(fields[c + 1], &used);
                if (used != fields[c + 1].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError(source_name + ":" + std::to_string(line_no) + ": item '" + id +
                                 "' column " + std::to_string(c + 1) + " is not a number: '" +
                                 fields[c + 1] + "'");
            }
        }
        table.index.emplace(id, static_cast<int>(table.ids.size()));
        table.ids.push_back(id);
        values.push_back(std::move(row));
    }
    if (values.empty()) throw DataError("empty embedding table: " + source_name);
    table.rows.resize(static_cast<Eigen::Index>(values.size()), table.dim);
    for (std::size_t r = 0; r < values.size(); ++r) {
        for (int c = 0; c < table.dim; ++c) table.rows(static_cast<Eigen::Index>(r), c) = values[r][c];
    }
    return table;
}

EmbeddingTable load_embedding_table(const std::string& path, Modality modality,
                                    const std::string& variant) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_embedding_table(buf.str(), modality, variant, path);
}

L2NormalizeResult l2_normalize(const EmbeddingTable& table) {
    L2NormalizeResult res;
    res.table = table;
    for (Eigen::Index r = 0; r < res.table.rows.rows(); ++r) {
        const double norm = res.table.rows.row(r).norm();
        if (norm > 0.0) {
            res.table.rows.row(r) /= norm;
        } else {
            res.zero_rows.push_back(table.ids[static_cast<std::size_t>(r)]);
        }
    }
    return res;
}

std::vector<ItemMetadata> load_metadata(const std::string& path, bool movielens_format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open metadata file: " + path);
    std::vector<ItemMetadata> out;
    std::string line;
    std::size_t line_no = 0;
    auto split_on = [](const std::string& s, const std::string& sep) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t at = s.find(sep, start);
            if (at == std::string::npos) {
                fields.push_back(s.substr(start));
                break;
            }
            fields.push_back(s.substr(start, at - start));
            start = at + sep.size();
        }
        return fields;
    };
    auto split_list = [&](const std::string& s) {
        std::vector<std::string> parts;
        for (auto& p : split_on(s, "|")) {
            if (!p.empty()) parts.push_back(p);
        }
        return parts;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_on(line, movielens_format ? "::" : "\t");
        if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": metadata row needs at least id and title");
        }
        ItemMetadata meta;
        meta.item_id = fields[0];
        meta.title = fields[1];
        if (fields.size() > 2) meta.genres = split_list(fields[2]);
        if (fields.size() > 3) meta.tags = split_list(fields[3]);
        out.push_back(std::move(meta));
    }
    if (out.empty()) throw DataError("empty metadata file: " + path);
    return out;
}

struct TranscriptLog::Impl {
    std::ofstream out;
    std::mutex mu;
};

TranscriptLog::TranscriptLog(const std::string& path) : impl_(new Impl) {
    impl_->out.open(path, std::ios::app);
    if (!impl_->out) {
        delete impl_;
        throw DataError("cannot open transcript log for writing: " + path);
    }
}

TranscriptLog::~TranscriptLog() { delete impl_; }

void TranscriptLog::append(const CanonicalText& text) {
    if (!text.provenance) return;
    const auto& t = *text.provenance;
    nlohmann::json rec{
        {"item_id", text.item_id},
        {"prompt", nlohmann::json{{"system", t.system}, {"user", t.user}}},
        {"response", t.response},
        {"provider", t.provider},
        {"timestamp", std::chrono::duration_cast<std::chrono::seconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count()},
    };
    if (!t.note.empty()) rec["note"] = t.note;
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->out << rec.dump() << '\n';
    impl_->out.flush();
}

const char* to_string(Modality m) {
    switch (m) {
        case Modality::text: return "text";
        case Modality::visual: return "visual";
        case Modality::audio: return "audio";
    }
    return "?";
}

Modality modality_from_string(const std::string& s) {
    if (s == "text") return Modality::text;
    if (s == "visual") return Modality::visual;
    if (s == "audio") return Modality::audio;
    throw ArgumentError("unknown modality '" + s + "' (allowed: text, visual, audio)");
}

}  // namespace recbench::textprep
