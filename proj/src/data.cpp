#include "ccoov/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ccoov {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(text.substr(start));
            return parts;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

bool is_word_id(std::string_view id) {
    return !id.empty() && id.find('-') == std::string_view::npos && id.find('.') == std::string_view::npos;
}

void append_double(std::string& out, double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
}

}  // namespace

std::size_t Corpus::token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.tokens.size();
    return n;
}

// ---------------------------------------------------------------------------
// CoNLL-U

std::vector<Feature> parse_feats(std::string_view field) {
    std::vector<Feature> feats;
    if (field == "_" || field.empty()) return feats;
    for (std::string_view item : split(field, '|')) {
        const std::size_t eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size())
            throw BadFeats("feature '" + std::string(item) + "' is not Key=Value");
        feats.emplace_back(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    }
    return feats;
}

std::string format_feats(std::span<const Feature> feats) {
    if (feats.empty()) return "_";
    std::string out;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        if (i) out += '|';
        out += feats[i].first;
        out += '=';
        out += feats[i].second;
    }
    return out;
}

Corpus parse_conllu(std::istream& in) {
    Corpus corpus;
    Sentence current;
    bool open = false;
    std::string line;
    std::size_t line_no = 0;
    auto flush = [&] {
        if (open && !current.tokens.empty()) corpus.sentences.push_back(std::move(current));
        current = Sentence{};
        open = false;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        open = true;
        if (line.front() == '#') {
            current.comments.push_back(line.substr(1));
            continue;
        }
        const auto cols = split(line, '\t');
        if (cols.size() != 10)
            throw MalformedLine("line " + std::to_string(line_no) + ": expected 10 columns, found " +
                                std::to_string(cols.size()));
        if (!is_word_id(cols[0])) continue;
        Token t;
        t.id = cols[0];
        t.form = cols[1];
        t.lemma = cols[2];
        t.upos = cols[3];
        t.xpos = cols[4];
        try {
            t.feats = parse_feats(cols[5]);
        } catch (const BadFeats& e) {
            throw BadFeats("line " + std::to_string(line_no) + ": " + e.what());
        }
        t.head = cols[6];
        t.deprel = cols[7];
        t.deps = cols[8];
        t.misc = cols[9];
        current.tokens.push_back(std::move(t));
    }
    flush();
    return corpus;
}

Corpus parse_conllu(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_conllu(in);
}

Corpus read_conllu(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_conllu(in);
}

void write_conllu(std::ostream& out, const Corpus& corpus) {
    for (const auto& s : corpus.sentences) {
        for (const auto& c : s.comments) out << '#' << c << '\n';
        for (const auto& t : s.tokens) {
            out << t.id << '\t' << t.form << '\t' << t.lemma << '\t' << t.upos << '\t' << t.xpos << '\t'
                << format_feats(t.feats) << '\t' << t.head << '\t' << t.deprel << '\t' << t.deps << '\t' << t.misc
                << '\n';
        }
        out << '\n';
    }
}

std::string to_conllu(const Corpus& corpus) {
    std::ostringstream out;
    write_conllu(out, corpus);
    return out.str();
}

std::vector<std::string> utf8_chars(std::string_view text) {
    std::vector<std::string> chars;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        if (lead >= 0xF0 && lead < 0xF8)
            len = 4;
        else if (lead >= 0xE0)
            len = lead < 0xF0 ? 3 : 1;
        else if (lead >= 0xC0)
            len = 2;
        if (i + len > text.size()) len = 1;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) len = 1;
        chars.emplace_back(text.substr(i, len));
        i += len;
    }
    return chars;
}

std::string ascii_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

// ---------------------------------------------------------------------------
// embedding table

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::size_t expected_dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse(in, expected_dim);
}

EmbeddingTable EmbeddingTable::parse(std::istream& in, std::size_t expected_dim) {
    EmbeddingTable table(expected_dim);
    std::optional<std::size_t> declared_rows;
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> row;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string_view> fields;
        for (std::string_view f : split(line, ' '))
            if (!f.empty()) fields.push_back(f);
        if (fields.empty()) continue;

        if (line_no == 1 && fields.size() == 2) {
            std::size_t v = 0, d = 0;
            auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), v);
            auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), d);
            if (r1.ec == std::errc{} && r2.ec == std::errc{} && r1.ptr == fields[0].data() + fields[0].size() &&
                r2.ptr == fields[1].data() + fields[1].size()) {
                if (d != expected_dim)
                    throw DimensionMismatch("header declares dimension " + std::to_string(d) + ", expected " +
                                            std::to_string(expected_dim));
                declared_rows = v;
                continue;
            }
        }
        if (fields.size() - 1 != expected_dim)
            throw DimensionMismatch("line " + std::to_string(line_no) + ": " + std::to_string(fields.size() - 1) +
                                    " values, expected " + std::to_string(expected_dim));
        row.assign(expected_dim, 0.0);
        for (std::size_t k = 0; k < expected_dim; ++k) {
            std::string_view f = fields[k + 1];
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[k]);
            if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(row[k]))
                throw ParseError("line " + std::to_string(line_no) + ": bad number '" + std::string(f) + "'");
        }
        try {
            table.add(std::string(fields[0]), row);
        } catch (const DuplicateWord& e) {
            throw DuplicateWord("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (declared_rows && *declared_rows != table.size())
        throw ParseError("header declares " + std::to_string(*declared_rows) + " words, found " +
                         std::to_string(table.size()));
    return table;
}

void EmbeddingTable::write(std::ostream& out) const {
    out << words_.size() << ' ' << dim_ << '\n';
    std::string line;
    for (std::size_t i = 0; i < words_.size(); ++i) {
        line = words_[i];
        for (double v : row(i)) {
            line += ' ';
            append_double(line, v);
        }
        out << line << '\n';
    }
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write(out);
    if (!out) throw IoError("write failed for " + path.string());
}

void EmbeddingTable::add(std::string word, std::span<const double> vector) {
    if (vector.size() != dim_)
        throw DimensionMismatch("vector for '" + word + "' has " + std::to_string(vector.size()) + " values, expected " +
                                std::to_string(dim_));
    if (word.empty() || word.find_first_of(" \t\n") != std::string::npos)
        throw ParseError("invalid word '" + word + "'");
    if (index_.count(word)) throw DuplicateWord("'" + word + "'");
    index_.emplace(word, words_.size());
    words_.push_back(std::move(word));
    matrix_.insert(matrix_.end(), vector.begin(), vector.end());
}

std::span<const double> EmbeddingTable::row(std::size_t index) const {
    if (index >= words_.size()) throw IndexOutOfRange("embedding row " + std::to_string(index));
    return std::span<const double>(matrix_).subspan(index * dim_, dim_);
}

std::optional<std::size_t> EmbeddingTable::find_exact(std::string_view word) const {
    if (auto it = index_.find(std::string(word)); it != index_.end()) return it->second;
    return std::nullopt;
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view form, bool lowercase_fallback) const {
    if (auto hit = find_exact(form)) return hit;
    if (lowercase_fallback) return find_exact(ascii_lower(form));
    return std::nullopt;
}

double EmbeddingTable::stddev() const {
    if (matrix_.empty()) return 0.0;
    const double n = static_cast<double>(matrix_.size());
    double mean = 0.0;
    for (double v : matrix_) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : matrix_) var += (v - mean) * (v - mean);
    return std::sqrt(var / n);
}

OovStats mark_oov(Corpus& corpus, const EmbeddingTable& table, bool lowercase_fallback) {
    OovStats stats;
    std::set<std::string, std::less<>> types;
    std::set<std::string, std::less<>> oov_types;
    for (auto& s : corpus.sentences) {
        for (auto& t : s.tokens) {
            t.is_oov = !table.find(t.form, lowercase_fallback).has_value();
            ++stats.tokens;
            types.insert(t.form);
            if (t.is_oov) {
                ++stats.oov_tokens;
                oov_types.insert(t.form);
            }
        }
    }
    stats.types = types.size();
    stats.oov_types = oov_types.size();
    return stats;
}

// ---------------------------------------------------------------------------
// schema

Schema::Schema(std::vector<std::string> tags, std::vector<MorphCategory> categories, std::vector<std::string> chars)
    : tags_(std::move(tags)), categories_(std::move(categories)), chars_(std::move(chars)) {
    index();
}

void Schema::index() {
    tag_ids_.clear();
    char_ids_.clear();
    category_ids_.clear();
    value_ids_.clear();
    for (std::size_t i = 0; i < tags_.size(); ++i) tag_ids_.emplace(tags_[i], static_cast<std::int32_t>(i));
    for (std::size_t i = 1; i < chars_.size(); ++i) char_ids_.emplace(chars_[i], i);
    for (std::size_t c = 0; c < categories_.size(); ++c) {
        category_ids_.emplace(categories_[c].name, c);
        auto& values = value_ids_.emplace_back();
        for (std::size_t v = 0; v < categories_[c].values.size(); ++v) values.emplace(categories_[c].values[v], v);
    }
}

Schema Schema::build(const Corpus& training) {
    if (training.token_count() == 0) throw EmptyCorpus("cannot build schemas from an empty corpus");
    std::set<std::string> tags;
    std::map<std::string, std::set<std::string>> morph;
    std::set<std::string> chars;
    for (const auto& s : training.sentences) {
        for (const auto& t : s.tokens) {
            tags.insert(t.upos);
            for (const auto& [k, v] : t.feats) morph[k].insert(v);
            for (auto& ch : utf8_chars(t.form)) chars.insert(std::move(ch));
        }
    }
    std::vector<MorphCategory> categories;
    for (auto& [name, values] : morph) categories.push_back({name, {values.begin(), values.end()}});
    std::vector<std::string> char_list{"<unk>"};
    char_list.insert(char_list.end(), chars.begin(), chars.end());
    return Schema({tags.begin(), tags.end()}, std::move(categories), std::move(char_list));
}

std::int32_t Schema::tag_id(std::string_view tag) const {
    if (auto it = tag_ids_.find(tag); it != tag_ids_.end()) return it->second;
    return kUnknownId;
}

std::size_t Schema::char_id(std::string_view ch) const {
    if (auto it = char_ids_.find(ch); it != char_ids_.end()) return it->second;
    return kUnkChar;
}

std::vector<std::size_t> Schema::encode_chars(std::string_view form) const {
    std::vector<std::size_t> ids;
    for (const auto& ch : utf8_chars(form)) ids.push_back(char_id(ch));
    return ids;
}

EncodedToken Schema::encode(const Token& token) const {
    EncodedToken e;
    e.chars = encode_chars(token.form);
    e.pos = tag_id(token.upos);
    e.morph.assign(categories_.size(), 0);
    for (const auto& [k, v] : token.feats) {
        auto cat = category_ids_.find(k);
        if (cat == category_ids_.end()) {
            ++e.unknown_feats;
            continue;
        }
        auto val = value_ids_[cat->second].find(v);
        if (val == value_ids_[cat->second].end()) {
            ++e.unknown_feats;
            continue;
        }
        e.morph[cat->second] = val->second + 1;
    }
    return e;
}

std::vector<EncodedToken> Schema::encode(const Sentence& sentence) const {
    std::vector<EncodedToken> out;
    out.reserve(sentence.tokens.size());
    for (const auto& t : sentence.tokens) out.push_back(encode(t));
    return out;
}

std::vector<Feature> Schema::decode_morph(std::span<const std::size_t> classes) const {
    std::vector<Feature> feats;
    for (std::size_t c = 0; c < classes.size() && c < categories_.size(); ++c)
        if (classes[c] > 0) feats.emplace_back(categories_[c].name, categories_[c].values[classes[c] - 1]);
    return feats;
}

std::vector<std::string> training_vocabulary(const Corpus& corpus) {
    std::set<std::string> forms;
    for (const auto& s : corpus.sentences)
        for (const auto& t : s.tokens) forms.insert(t.form);
    return {forms.begin(), forms.end()};
}

}  // namespace ccoov
