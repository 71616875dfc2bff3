#pragma once

// Contextual-compositional OOV embedding predictor.
//
// For a target word the predictor encodes (a) the surrounding words with a
// BiLSTM that skips the target slot and (b) the target's characters with a
// second BiLSTM. Each sequence of hidden states is attention-pooled, and the
// two pooled vectors (characters first, then context) are fused by
// linear -> tanh -> linear into a substitute word embedding.

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ccoov/autodiff.hpp"
#include "ccoov/data.hpp"
#include "ccoov/layers.hpp"

namespace ccoov {

struct PredictorDims {
    std::size_t word_dim = 64;
    std::size_t char_dim = 20;
    // Per direction. Both BiLSTMs emit 2 * hidden, so the fused vector has
    // 4 * hidden = 512 components at the default.
    std::size_t hidden = 128;
    std::size_t fuse_dim = 64;
    std::size_t max_context = 40;

    bool operator==(const PredictorDims&) const = default;
};

struct OovPredictorParams {
    PredictorDims dims;
    EmbeddingParams char_embeddings;  // row kUnkChar is the trainable UNK character
    BiLstmParams char_bilstm;
    BiLstmParams context_bilstm;
    AttentionParams char_attention;
    AttentionParams context_attention;
    LinearParams fuse1;  // 4h -> fuse_dim
    LinearParams fuse2;  // fuse_dim -> word_dim

    static OovPredictorParams init(const PredictorDims& dims, std::size_t char_vocab, Rng& rng);
    NamedTensors named_parameters();
};

// Token range of a context window. `begin..end` includes the target.
struct WindowSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t target = 0;

    std::size_t oov_position() const { return target - begin; }
    std::size_t context_size() const { return end - begin - 1; }
    bool operator==(const WindowSpan&) const = default;
};

// Up to max_context words around the target, not counting the target itself:
// max_context / 2 per side, with a short side donating its unused budget.
WindowSpan extract_context_window(std::size_t sentence_length, std::size_t target, std::size_t max_context = 40);

// Random vectors for OOV words, a pure function of (seed, surface form):
// i.i.d. normal(0, stddev) per coordinate. Memoized behind a mutex, so any
// number of threads see the same vector for the same form.
class RandomEmbeddings {
public:
    RandomEmbeddings(std::uint64_t seed, std::size_t dim, double stddev);

    std::vector<double> get(std::string_view form) const;
    std::uint64_t seed() const { return seed_; }
    std::size_t dim() const { return dim_; }
    double stddev() const { return stddev_; }

private:
    std::uint64_t seed_;
    std::size_t dim_;
    double stddev_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

// A word as seen by the embedding layer: `table_row` is empty for words
// routed through OOV handling (true OOVs and word-dropout picks).
struct WordSlot {
    std::string form;
    std::optional<std::size_t> table_row;
    std::vector<std::size_t> chars;
};

struct ContextWindow {
    // One vector per window position including the target slot, whose
    // entry is never read (the encoder skips it).
    std::vector<std::vector<double>> embeddings;
    std::size_t oov_position = 0;

    std::size_t context_size() const { return embeddings.empty() ? 0 : embeddings.size() - 1; }
};

// In-table words map to their rows, other context words to cached random vectors.
ContextWindow resolve_context_embeddings(std::span<const WordSlot> sentence, const WindowSpan& window,
                                         const EmbeddingTable& table, const RandomEmbeddings& random);

struct OovPrediction {
    ad::Var embedding;                    // word_dim
    std::optional<ad::Var> context_alphas;  // empty when the context is empty
    std::optional<ad::Var> context_scores;
    ad::Var char_alphas;
    ad::Var char_scores;
};

// An empty context pools to the zero vector.
OovPrediction predict_embedding(ad::Tape& tape, OovPredictorParams& params, const ContextWindow& window,
                                std::span<const std::size_t> chars);

}  // namespace ccoov
