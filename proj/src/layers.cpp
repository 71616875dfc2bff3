#include "ccoov/layers.hpp"

#include <algorithm>
#include <array>

namespace ccoov {

namespace {

ad::Tensor trainable(ad::Tensor t) {
    t.set_requires_grad(true);
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// embeddings

EmbeddingParams EmbeddingParams::init(std::size_t rows, std::size_t dim, Rng& rng) {
    return {trainable(kaiming_init({rows, dim}, dim, rng))};
}

void EmbeddingParams::collect(const std::string& prefix, NamedTensors& out) { out.emplace_back(prefix, &table); }

ad::Var embedding_lookup(ad::Tape& tape, EmbeddingParams& params, std::size_t index) {
    if (index >= params.rows())
        throw IndexOutOfRange("embedding row " + std::to_string(index) + " of " + std::to_string(params.rows()));
    return tape.slice(tape.leaf(params.table), index * params.dim(), params.dim());
}

// ---------------------------------------------------------------------------
// LSTM

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.W = trainable(kaiming_init({4 * hidden_dim, input_dim}, input_dim, rng));
    p.U = trainable(kaiming_init({4 * hidden_dim, hidden_dim}, hidden_dim, rng));
    p.b = trainable(ad::Tensor({4 * hidden_dim}));
    std::fill_n(p.b.values().begin() + static_cast<std::ptrdiff_t>(hidden_dim), hidden_dim, 1.0);
    return p;
}

void LstmParams::collect(const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".W", &W);
    out.emplace_back(prefix + ".U", &U);
    out.emplace_back(prefix + ".b", &b);
}

LstmState lstm_cell_step(ad::Tape& tape, LstmParams& params, ad::Var x, ad::Var h_prev, ad::Var c_prev) {
    const std::size_t h = params.hidden_dim;
    const ad::Shape expect_x{params.input_dim};
    const ad::Shape expect_h{h};
    if (tape.shape(x) != expect_x || tape.shape(h_prev) != expect_h || tape.shape(c_prev) != expect_h)
        throw ShapeMismatch("lstm_cell_step: x " + ad::shape_string(tape.shape(x)) + ", h " +
                            ad::shape_string(tape.shape(h_prev)) + ", c " + ad::shape_string(tape.shape(c_prev)) +
                            " for LSTM " + std::to_string(params.input_dim) + " -> " + std::to_string(h));

    ad::Var z = tape.add(tape.add(tape.matvec(tape.leaf(params.W), x), tape.matvec(tape.leaf(params.U), h_prev)),
                         tape.leaf(params.b));
    ad::Var i = tape.sigmoid(tape.slice(z, 0, h));
    ad::Var f = tape.sigmoid(tape.slice(z, h, h));
    ad::Var g = tape.tanh(tape.slice(z, 2 * h, h));
    ad::Var o = tape.sigmoid(tape.slice(z, 3 * h, h));
    ad::Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
    return {tape.mul(o, tape.tanh(c)), c};
}

BiLstmParams BiLstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    BiLstmParams p;
    p.fwd = LstmParams::init(input_dim, hidden_dim, rng);
    p.bwd = LstmParams::init(input_dim, hidden_dim, rng);
    return p;
}

void BiLstmParams::collect(const std::string& prefix, NamedTensors& out) {
    fwd.collect(prefix + ".fwd", out);
    bwd.collect(prefix + ".bwd", out);
}

std::vector<ad::Var> bilstm_encode(ad::Tape& tape, BiLstmParams& params, std::span<const ad::Var> inputs,
                                   std::optional<std::size_t> skip) {
    if (skip && *skip >= inputs.size())
        throw IndexOutOfRange("skip position " + std::to_string(*skip) + " of " + std::to_string(inputs.size()));
    std::vector<ad::Var> seq;
    seq.reserve(inputs.size());
    for (std::size_t t = 0; t < inputs.size(); ++t)
        if (!skip || t != *skip) seq.push_back(inputs[t]);
    if (seq.empty()) throw EmptySequence("bilstm_encode: no positions left to encode");

    const std::size_t n = seq.size();
    auto run = [&](LstmParams& p, bool reverse) {
        std::vector<ad::Var> hs(n);
        const std::vector<double> zeros(p.hidden_dim, 0.0);
        LstmState state{tape.constant(zeros), tape.constant(zeros)};
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t t = reverse ? n - 1 - k : k;
            state = lstm_cell_step(tape, p, seq[t], state.h, state.c);
            hs[t] = state.h;
        }
        return hs;
    };
    const auto fwd = run(params.fwd, false);
    const auto bwd = run(params.bwd, true);

    std::vector<ad::Var> out(n);
    for (std::size_t t = 0; t < n; ++t) out[t] = tape.concat(std::array{fwd[t], bwd[t]});
    return out;
}

// ---------------------------------------------------------------------------
// attention

AttentionParams AttentionParams::init(std::size_t dim, Rng& rng) {
    return {trainable(kaiming_init({1, dim}, dim, rng)), trainable(ad::Tensor({1}))};
}

void AttentionParams::collect(const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".weight", &weight);
    out.emplace_back(prefix + ".bias", &bias);
}

AttentionResult attention_pool(ad::Tape& tape, AttentionParams& params, std::span<const ad::Var> hidden) {
    if (hidden.empty()) throw EmptySequence("attention_pool: no hidden states");
    ad::Var w = tape.leaf(params.weight);
    ad::Var b = tape.leaf(params.bias);
    std::vector<ad::Var> scores;
    scores.reserve(hidden.size());
    for (ad::Var h : hidden) scores.push_back(tape.add(tape.matvec(w, h), b));
    ad::Var s = tape.concat(scores);
    ad::Var alphas = tape.softmax(s);
    return {tape.weighted_sum(alphas, hidden), alphas, s};
}

// ---------------------------------------------------------------------------
// linear

LinearParams LinearParams::init(std::size_t in, std::size_t out, Rng& rng) {
    return {trainable(kaiming_init({out, in}, in, rng)), trainable(ad::Tensor({out}))};
}

void LinearParams::collect(const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".weight", &weight);
    out.emplace_back(prefix + ".bias", &bias);
}

ad::Var linear_forward(ad::Tape& tape, LinearParams& params, ad::Var x) {
    return tape.add(tape.matvec(tape.leaf(params.weight), x), tape.leaf(params.bias));
}

}  // namespace ccoov
