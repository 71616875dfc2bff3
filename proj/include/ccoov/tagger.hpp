#pragma once

// Word-level BiLSTM tagger with an OOV handling layer in front of it.
// In-table words feed their (frozen) table rows; OOV words feed whatever the
// selected strategy produces. Every BiLSTM state goes to a POS head and to
// one classification head per morphological category.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccoov/autodiff.hpp"
#include "ccoov/data.hpp"
#include "ccoov/layers.hpp"
#include "ccoov/oov_predictor.hpp"

namespace ccoov {

enum class TaskMode { joint, pos, morph };
enum class OovKind { random, predictor, unk_token };

std::string to_string(TaskMode mode);
std::string to_string(OovKind kind);
TaskMode parse_task_mode(std::string_view text);
OovKind parse_oov_kind(std::string_view text);

struct TaggerParams {
    BiLstmParams word_bilstm;
    LinearParams pos_head;
    std::vector<LinearParams> morph_heads;  // category c has |values_c| + 1 classes

    static TaggerParams init(std::size_t word_dim, std::size_t hidden, std::size_t tag_count,
                             std::span<const MorphCategory> categories, Rng& rng);
    NamedTensors named_parameters();
};

struct OovStrategy {
    OovKind kind = OovKind::predictor;
    OovPredictorParams* predictor = nullptr;  // kind == predictor
    ad::Tensor* unk_vector = nullptr;         // kind == unk_token
    // Random vectors for OOV words under kind == random, and for OOV
    // context words seen by the predictor.
    const RandomEmbeddings* random = nullptr;
};

struct OovSlot {
    std::size_t position = 0;
    WindowSpan window;                        // predictor only
    std::optional<OovPrediction> prediction;  // predictor only
};

struct EmbeddedSentence {
    std::vector<ad::Var> embeddings;
    std::vector<OovSlot> oov;
};

EmbeddedSentence embed_sentence(ad::Tape& tape, std::span<const WordSlot> sentence, const EmbeddingTable& table,
                                const OovStrategy& strategy);

struct TokenLogits {
    ad::Var pos;
    std::vector<ad::Var> morph;
};

std::vector<TokenLogits> tag_forward(ad::Tape& tape, TaggerParams& params, std::span<const ad::Var> embedded);

// Mean over tokens of [POS cross-entropy + mean over categories of the
// category cross-entropy]; the task mode drops either term. Gold tags
// unseen in training contribute no POS term.
ad::Var compute_loss(ad::Tape& tape, std::span<const TokenLogits> outputs, std::span<const EncodedToken> gold,
                     TaskMode task);

}  // namespace ccoov
