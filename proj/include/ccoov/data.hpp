#pragma once

// Corpus and embedding ingestion.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ccoov/error.hpp"

namespace ccoov {

using Feature = std::pair<std::string, std::string>;  // (category, value)

// One CoNLL-U word line. All ten columns are kept verbatim so a parsed
// sentence serializes back to the same text; `feats` is the parsed FEATS.
struct Token {
    std::string id;
    std::string form;
    std::string lemma;
    std::string upos;
    std::string xpos;
    std::vector<Feature> feats;
    std::string head;
    std::string deprel;
    std::string deps;
    std::string misc;
    bool is_oov = false;

    bool operator==(const Token&) const = default;
};

struct Sentence {
    std::vector<std::string> comments;  // without the leading '#'
    std::vector<Token> tokens;

    bool operator==(const Sentence&) const = default;
};

struct Corpus {
    std::vector<Sentence> sentences;

    std::size_t token_count() const;
    bool operator==(const Corpus&) const = default;
};

// CoNLL-U: 10 tab-separated columns, '#' comments, blank line between
// sentences. Multiword ranges ("1-2") and empty nodes ("1.1") are skipped.
Corpus parse_conllu(std::istream& in);
Corpus parse_conllu(std::string_view text);
Corpus read_conllu(const std::filesystem::path& path);
void write_conllu(std::ostream& out, const Corpus& corpus);
std::string to_conllu(const Corpus& corpus);

std::vector<Feature> parse_feats(std::string_view field);
std::string format_feats(std::span<const Feature> feats);

// Unicode code points of a UTF-8 string, each as its own UTF-8 substring.
// Invalid bytes are passed through one at a time.
std::vector<std::string> utf8_chars(std::string_view text);

// ASCII-only lowercasing; non-ASCII bytes are left unchanged.
std::string ascii_lower(std::string_view text);

class EmbeddingTable {
public:
    static constexpr std::size_t kDefaultDim = 64;

    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    // Text format: optional "V d" header, then "word f1 ... fd" per line.
    static EmbeddingTable load(const std::filesystem::path& path, std::size_t expected_dim = kDefaultDim);
    static EmbeddingTable parse(std::istream& in, std::size_t expected_dim = kDefaultDim);
    void save(const std::filesystem::path& path) const;
    void write(std::ostream& out) const;

    void add(std::string word, std::span<const double> vector);

    std::size_t size() const { return words_.size(); }
    std::size_t dim() const { return dim_; }
    bool empty() const { return words_.empty(); }
    const std::vector<std::string>& words() const { return words_; }
    std::span<const double> row(std::size_t index) const;

    std::optional<std::size_t> find_exact(std::string_view word) const;
    // Exact form, then (when enabled) the ASCII-lowercased form.
    std::optional<std::size_t> find(std::string_view form, bool lowercase_fallback) const;

    // Population standard deviation over all entries (0 when empty).
    double stddev() const;

    bool operator==(const EmbeddingTable& other) const {
        return dim_ == other.dim_ && words_ == other.words_ && matrix_ == other.matrix_;
    }

private:
    std::size_t dim_ = kDefaultDim;
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> matrix_;
};

struct OovStats {
    std::size_t tokens = 0;
    std::size_t oov_tokens = 0;
    std::size_t types = 0;
    std::size_t oov_types = 0;

    double token_rate() const { return tokens ? static_cast<double>(oov_tokens) / static_cast<double>(tokens) : 0.0; }
    double type_rate() const { return types ? static_cast<double>(oov_types) / static_cast<double>(types) : 0.0; }
};

// Sets Token::is_oov from table membership and returns token/type OOV rates.
OovStats mark_oov(Corpus& corpus, const EmbeddingTable& table, bool lowercase_fallback = true);

struct MorphCategory {
    std::string name;
    std::vector<std::string> values;  // sorted; class 0 of a head is "absent", value i is class i + 1

    bool operator==(const MorphCategory&) const = default;
};

inline constexpr std::int32_t kUnknownId = -1;
inline constexpr std::size_t kUnkChar = 0;

struct EncodedToken {
    std::vector<std::size_t> chars;
    std::int32_t pos = kUnknownId;  // kUnknownId when the tag is unseen in training
    // One entry per schema category: 0 = absent, v + 1 = value v.
    std::vector<std::size_t> morph;
    // Gold pairs whose category/value is not in the schema (always missed).
    std::size_t unknown_feats = 0;
};

// Tag, morph and character inventories with ids assigned in sorted order.
class Schema {
public:
    Schema() = default;
    Schema(std::vector<std::string> tags, std::vector<MorphCategory> categories, std::vector<std::string> chars);

    static Schema build(const Corpus& training);

    const std::vector<std::string>& tags() const { return tags_; }
    const std::vector<MorphCategory>& categories() const { return categories_; }
    // chars()[0] is the UNK placeholder.
    const std::vector<std::string>& chars() const { return chars_; }

    std::int32_t tag_id(std::string_view tag) const;
    std::size_t char_id(std::string_view ch) const;
    std::vector<std::size_t> encode_chars(std::string_view form) const;
    EncodedToken encode(const Token& token) const;
    std::vector<EncodedToken> encode(const Sentence& sentence) const;

    // Feature pairs for per-category classes (absent classes contribute nothing).
    std::vector<Feature> decode_morph(std::span<const std::size_t> classes) const;

    bool operator==(const Schema& other) const {
        return tags_ == other.tags_ && categories_ == other.categories_ && chars_ == other.chars_;
    }

private:
    void index();

    std::vector<std::string> tags_;
    std::vector<MorphCategory> categories_;
    std::vector<std::string> chars_;
    std::map<std::string, std::int32_t, std::less<>> tag_ids_;
    std::map<std::string, std::size_t, std::less<>> char_ids_;
    std::map<std::string, std::size_t, std::less<>> category_ids_;
    std::vector<std::map<std::string, std::size_t, std::less<>>> value_ids_;
};

// Distinct training forms, sorted.
std::vector<std::string> training_vocabulary(const Corpus& corpus);

}  // namespace ccoov
