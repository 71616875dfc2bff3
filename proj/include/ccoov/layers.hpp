#pragma once

// Parameterized building blocks shared by the OOV predictor and the tagger.
// Every forward function records onto the given tape and reads parameters
// through Tape::leaf, so gradients land in the parameter tensors.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccoov/autodiff.hpp"
#include "ccoov/init.hpp"

namespace ccoov {

using NamedTensors = std::vector<std::pair<std::string, ad::Tensor*>>;

struct EmbeddingParams {
    ad::Tensor table;  // rows x dim

    static EmbeddingParams init(std::size_t rows, std::size_t dim, Rng& rng);
    std::size_t rows() const { return table.rows(); }
    std::size_t dim() const { return table.cols(); }
    void collect(const std::string& prefix, NamedTensors& out);
};

ad::Var embedding_lookup(ad::Tape& tape, EmbeddingParams& params, std::size_t index);

// Standard 4-gate LSTM without peepholes. Gate blocks are stacked in the
// order input, forget, cell (g), output: W is (4h x in), U is (4h x h), b is (4h).
struct LstmParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    ad::Tensor W;
    ad::Tensor U;
    ad::Tensor b;

    // Kaiming-normal W and U, zero biases except the forget block at 1.0.
    static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out);
};

struct LstmState {
    ad::Var h;
    ad::Var c;
};

LstmState lstm_cell_step(ad::Tape& tape, LstmParams& params, ad::Var x, ad::Var h_prev, ad::Var c_prev);

struct BiLstmParams {
    LstmParams fwd;
    LstmParams bwd;

    static BiLstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
    std::size_t output_dim() const { return fwd.hidden_dim + bwd.hidden_dim; }
    void collect(const std::string& prefix, NamedTensors& out);
};

// output[t] = forward_h[t] ++ backward_h[t] over the inputs with position
// `skip` removed, as if it were never part of the sequence. Zero initial states.
std::vector<ad::Var> bilstm_encode(ad::Tape& tape, BiLstmParams& params, std::span<const ad::Var> inputs,
                                   std::optional<std::size_t> skip = std::nullopt);

// Shared scoring vector: s_i = w . h_i + b. The bias shifts every score
// equally, so it never changes alpha and its gradient is identically zero.
struct AttentionParams {
    ad::Tensor weight;  // (1 x dim)
    ad::Tensor bias;    // (1)

    static AttentionParams init(std::size_t dim, Rng& rng);
    std::size_t dim() const { return weight.cols(); }
    void collect(const std::string& prefix, NamedTensors& out);
};

struct AttentionResult {
    ad::Var context;  // sum_i alpha_i h_i
    ad::Var alphas;   // softmax(scores)
    ad::Var scores;
};

AttentionResult attention_pool(ad::Tape& tape, AttentionParams& params, std::span<const ad::Var> hidden);

struct LinearParams {
    ad::Tensor weight;  // (out x in)
    ad::Tensor bias;    // (out)

    static LinearParams init(std::size_t in, std::size_t out, Rng& rng);
    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
    void collect(const std::string& prefix, NamedTensors& out);
};

ad::Var linear_forward(ad::Tape& tape, LinearParams& params, ad::Var x);

}  // namespace ccoov
