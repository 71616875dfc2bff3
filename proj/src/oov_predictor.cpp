#include "ccoov/oov_predictor.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "ccoov/init.hpp"

namespace ccoov {

OovPredictorParams OovPredictorParams::init(const PredictorDims& dims, std::size_t char_vocab, Rng& rng) {
    OovPredictorParams p;
    p.dims = dims;
    p.char_embeddings = EmbeddingParams::init(std::max<std::size_t>(char_vocab, 1), dims.char_dim, rng);
    p.char_bilstm = BiLstmParams::init(dims.char_dim, dims.hidden, rng);
    p.context_bilstm = BiLstmParams::init(dims.word_dim, dims.hidden, rng);
    p.char_attention = AttentionParams::init(2 * dims.hidden, rng);
    p.context_attention = AttentionParams::init(2 * dims.hidden, rng);
    p.fuse1 = LinearParams::init(4 * dims.hidden, dims.fuse_dim, rng);
    p.fuse2 = LinearParams::init(dims.fuse_dim, dims.word_dim, rng);
    return p;
}

NamedTensors OovPredictorParams::named_parameters() {
    NamedTensors out;
    char_embeddings.collect("predictor.char_embeddings", out);
    char_bilstm.collect("predictor.char_bilstm", out);
    context_bilstm.collect("predictor.context_bilstm", out);
    char_attention.collect("predictor.char_attention", out);
    context_attention.collect("predictor.context_attention", out);
    fuse1.collect("predictor.fuse1", out);
    fuse2.collect("predictor.fuse2", out);
    return out;
}

WindowSpan extract_context_window(std::size_t sentence_length, std::size_t target, std::size_t max_context) {
    if (target >= sentence_length)
        throw IndexOutOfRange("target " + std::to_string(target) + " in sentence of " +
                              std::to_string(sentence_length));
    const std::size_t available_left = target;
    const std::size_t available_right = sentence_length - 1 - target;
    const std::size_t half = max_context / 2;
    std::size_t left = std::min(available_left, half);
    std::size_t right = std::min(available_right, max_context - left);
    left = std::min(available_left, max_context - right);
    return {target - left, target + right + 1, target};
}

RandomEmbeddings::RandomEmbeddings(std::uint64_t seed, std::size_t dim, double stddev)
    : seed_(seed), dim_(dim), stddev_(stddev) {}

std::vector<double> RandomEmbeddings::get(std::string_view form) const {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(std::string(form));
    if (it != cache_.end()) return it->second;
    Rng rng(stable_hash(form, seed_));
    std::normal_distribution<double> normal(0.0, stddev_ > 0.0 ? stddev_ : 1.0);
    std::vector<double> v(dim_);
    for (double& x : v) x = normal(rng);
    return cache_.emplace(std::string(form), std::move(v)).first->second;
}

ContextWindow resolve_context_embeddings(std::span<const WordSlot> sentence, const WindowSpan& window,
                                         const EmbeddingTable& table, const RandomEmbeddings& random) {
    if (window.end > sentence.size() || window.target < window.begin || window.target >= window.end)
        throw IndexOutOfRange("context window outside the sentence");
    ContextWindow out;
    out.oov_position = window.oov_position();
    out.embeddings.reserve(window.end - window.begin);
    for (std::size_t i = window.begin; i < window.end; ++i) {
        if (i == window.target) {
            out.embeddings.emplace_back(table.dim(), 0.0);
            continue;
        }
        const WordSlot& w = sentence[i];
        if (w.table_row) {
            auto row = table.row(*w.table_row);
            out.embeddings.emplace_back(row.begin(), row.end());
        } else {
            out.embeddings.push_back(random.get(w.form));
        }
    }
    return out;
}

OovPrediction predict_embedding(ad::Tape& tape, OovPredictorParams& params, const ContextWindow& window,
                                std::span<const std::size_t> chars) {
    if (chars.empty()) throw EmptyCharacters("OOV word has no characters");
    OovPrediction out;

    std::vector<ad::Var> char_inputs;
    char_inputs.reserve(chars.size());
    for (std::size_t c : chars) char_inputs.push_back(embedding_lookup(tape, params.char_embeddings, c));
    const auto char_states = bilstm_encode(tape, params.char_bilstm, char_inputs);
    const AttentionResult word = attention_pool(tape, params.char_attention, char_states);
    out.char_alphas = word.alphas;
    out.char_scores = word.scores;

    ad::Var context;
    if (window.context_size() == 0) {
        context = tape.constant(std::vector<double>(params.context_bilstm.output_dim(), 0.0));
    } else {
        std::vector<ad::Var> ctx_inputs;
        ctx_inputs.reserve(window.embeddings.size());
        for (const auto& e : window.embeddings) ctx_inputs.push_back(tape.constant(e));
        const auto ctx_states = bilstm_encode(tape, params.context_bilstm, ctx_inputs, window.oov_position);
        const AttentionResult pooled = attention_pool(tape, params.context_attention, ctx_states);
        context = pooled.context;
        out.context_alphas = pooled.alphas;
        out.context_scores = pooled.scores;
    }

    ad::Var fused = tape.concat(std::array{word.context, context});
    out.embedding = linear_forward(tape, params.fuse2, tape.tanh(linear_forward(tape, params.fuse1, fused)));
    return out;
}

}  // namespace ccoov
