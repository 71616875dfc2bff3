#include "ccoov/synthetic.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "ccoov/init.hpp"

namespace ccoov {

namespace {

struct Inflection {
    std::string suffix;
    std::vector<Feature> feats;
};

struct WordClass {
    std::string tag;
    std::vector<Inflection> inflections;  // open classes
    std::vector<std::string> closed;      // closed classes: whole words
};

const std::vector<WordClass>& classes() {
    static const std::vector<WordClass> all{
        {"NOUN", {{"on", {{"Number", "Sing"}}}, {"oni", {{"Number", "Plur"}}}}, {}},
        {"VERB", {{"eth", {{"Tense", "Pres"}}}, {"ath", {{"Tense", "Past"}}}}, {}},
        {"ADJ", {{"ik", {{"Degree", "Pos"}}}, {"ikar", {{"Degree", "Cmp"}}}}, {}},
        {"ADV", {{"ume", {}}}, {}},
        {"DET", {}, {"ka", "lo", "mi"}},
        {"ADP", {}, {"pe", "tu", "sa"}},
    };
    return all;
}

std::string make_stem(Rng& rng) {
    static const std::string consonants = "bdfgklmnprstvz";
    static const std::string vowels = "aeiou";
    std::uniform_int_distribution<std::size_t> syllables(2, 3);
    std::uniform_int_distribution<std::size_t> c(0, consonants.size() - 1);
    std::uniform_int_distribution<std::size_t> v(0, vowels.size() - 1);
    std::string stem;
    const std::size_t n = syllables(rng);
    for (std::size_t i = 0; i < n; ++i) {
        stem += consonants[c(rng)];
        stem += vowels[v(rng)];
    }
    return stem;
}

Token make_token(std::size_t index, std::string form, const std::string& tag, std::vector<Feature> feats) {
    Token t;
    t.id = std::to_string(index + 1);
    t.form = std::move(form);
    t.lemma = "_";
    t.upos = tag;
    t.xpos = "_";
    t.feats = std::move(feats);
    t.head = "0";
    t.deprel = "dep";
    t.deps = "_";
    t.misc = "_";
    return t;
}

}  // namespace

SyntheticData generate_suffix_language(const SyntheticConfig& config) {
    Rng rng(config.seed);
    const auto& cls = classes();

    // Disjoint stem pools per open class: training stems, then held-out stems.
    std::set<std::string> used;
    std::vector<std::vector<std::string>> train_stems(cls.size()), heldout_stems(cls.size());
    for (std::size_t k = 0; k < cls.size(); ++k) {
        if (cls[k].inflections.empty()) continue;
        auto fill = [&](std::vector<std::string>& pool, std::size_t n) {
            while (pool.size() < n) {
                std::string s = make_stem(rng);
                if (used.insert(s).second) pool.push_back(std::move(s));
            }
        };
        fill(train_stems[k], config.train_stems_per_class);
        fill(heldout_stems[k], config.heldout_stems_per_class);
    }

    // Table: class centroid + feature offsets + per-word noise, for a random
    // share of the training-pool forms.
    std::normal_distribution<double> normal(0.0, 1.0);
    auto random_vector = [&](double scale) {
        std::vector<double> v(config.dim);
        for (double& x : v) x = scale * normal(rng);
        return v;
    };
    std::vector<std::vector<double>> centroids;
    for (std::size_t k = 0; k < cls.size(); ++k) centroids.push_back(random_vector(1.0));
    std::map<Feature, std::vector<double>> feature_offsets;
    for (const auto& c : cls)
        for (const auto& inf : c.inflections)
            for (const auto& f : inf.feats)
                if (!feature_offsets.count(f)) feature_offsets.emplace(f, random_vector(0.5));

    SyntheticData data;
    data.table = EmbeddingTable(config.dim);
    std::bernoulli_distribution covered(config.table_coverage);
    auto add_to_table = [&](const std::string& form, std::size_t k, const std::vector<Feature>& feats) {
        if (!covered(rng)) return;
        std::vector<double> v = centroids[k];
        for (const auto& f : feats)
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += feature_offsets[f][i];
        for (double& x : v) x += config.noise * normal(rng);
        data.table.add(form, v);
    };
    for (std::size_t k = 0; k < cls.size(); ++k) {
        for (const auto& w : cls[k].closed) add_to_table(w, k, {});
        for (const auto& stem : train_stems[k])
            for (const auto& inf : cls[k].inflections) add_to_table(stem + inf.suffix, k, inf.feats);
    }
    data.table.add(".", random_vector(1.0));

    std::vector<std::size_t> open, closed;
    for (std::size_t k = 0; k < cls.size(); ++k) (cls[k].inflections.empty() ? closed : open).push_back(k);
    std::uniform_int_distribution<std::size_t> length(config.min_length, config.max_length);
    std::bernoulli_distribution pick_closed(0.2);
    auto pick = [&](const auto& xs) -> const auto& {
        return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
    };

    auto make_corpus = [&](std::size_t count, double heldout_p) {
        Corpus corpus;
        std::bernoulli_distribution heldout(heldout_p);
        for (std::size_t s = 0; s < count; ++s) {
            Sentence sentence;
            const std::size_t n = length(rng);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                if (pick_closed(rng)) {
                    const std::size_t k = pick(closed);
                    sentence.tokens.push_back(make_token(i, pick(cls[k].closed), cls[k].tag, {}));
                    continue;
                }
                const std::size_t k = pick(open);
                const auto& pool = heldout(rng) ? heldout_stems[k] : train_stems[k];
                const Inflection& inf = pick(cls[k].inflections);
                sentence.tokens.push_back(make_token(i, pick(pool) + inf.suffix, cls[k].tag, inf.feats));
            }
            sentence.tokens.push_back(make_token(n - 1, ".", "PUNCT", {}));
            corpus.sentences.push_back(std::move(sentence));
        }
        return corpus;
    };
    data.train = make_corpus(config.train_sentences, 0.0);
    data.dev = make_corpus(config.dev_sentences, config.heldout_probability);
    data.test = make_corpus(config.test_sentences, config.heldout_probability);
    return data;
}

}  // namespace ccoov
