#pragma once

// The full trainable system: schemas, predictor, tagger and the shared UNK
// vector, plus sentence-level inference.

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ccoov/data.hpp"
#include "ccoov/oov_predictor.hpp"
#include "ccoov/tagger.hpp"

namespace ccoov {

struct ModelConfig {
    PredictorDims predictor;
    std::size_t tagger_hidden = 128;
    TaskMode task = TaskMode::joint;
    bool lowercase_fallback = true;

    bool operator==(const ModelConfig&) const = default;
};

struct Model {
    ModelConfig config;
    Schema schema;
    std::vector<std::string> training_vocab;  // sorted training forms
    OovPredictorParams predictor;
    TaggerParams tagger;
    ad::Tensor unk_vector;  // shared trainable OOV vector (unk strategy)

    static Model init(const ModelConfig& config, Schema schema, std::vector<std::string> training_vocab, Rng& rng);

    NamedTensors named_parameters();
    bool in_training_vocab(std::string_view form) const;
};

// Random embeddings matched to the table's spread, keyed by the run seed.
RandomEmbeddings make_random_embeddings(const EmbeddingTable& table, std::uint64_t seed);

using WordSet = std::unordered_set<std::string>;

// Resolves every token against the table. Forms in `routed_to_oov` are
// treated as OOV even when the table has them (word dropout / export targets).
std::vector<WordSlot> make_word_slots(const Model& model, const Sentence& sentence, const EmbeddingTable& table,
                                      const WordSet* routed_to_oov = nullptr);

OovStrategy make_strategy(Model& model, OovKind kind, const RandomEmbeddings& random);

struct TokenPrediction {
    std::int32_t pos = kUnknownId;
    std::vector<std::size_t> morph;  // class per category, 0 = absent
};

struct OovAttention {
    std::size_t position = 0;
    WindowSpan window;
    std::vector<double> context_alphas;  // per encoded context word (target skipped)
    std::vector<double> context_scores;
    std::vector<double> char_alphas;
    std::vector<double> char_scores;
};

struct SentencePrediction {
    std::vector<TokenPrediction> tokens;
    std::vector<OovAttention> attention;  // predictor strategy only
};

SentencePrediction predict_sentence(Model& model, const Sentence& sentence, const EmbeddingTable& table,
                                    OovKind kind, const RandomEmbeddings& random,
                                    const WordSet* routed_to_oov = nullptr);

// Writes predicted UPOS and FEATS into a copy of the sentence.
Sentence apply_predictions(const Model& model, const Sentence& sentence, const SentencePrediction& prediction);

}  // namespace ccoov
