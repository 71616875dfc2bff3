#include "ccoov/model.hpp"

#include <algorithm>

namespace ccoov {

Model Model::init(const ModelConfig& config, Schema schema, std::vector<std::string> training_vocab, Rng& rng) {
    Model m;
    m.config = config;
    m.schema = std::move(schema);
    m.training_vocab = std::move(training_vocab);
    std::sort(m.training_vocab.begin(), m.training_vocab.end());
    m.predictor = OovPredictorParams::init(config.predictor, m.schema.chars().size(), rng);
    m.tagger = TaggerParams::init(config.predictor.word_dim, config.tagger_hidden, m.schema.tags().size(),
                                  m.schema.categories(), rng);
    m.unk_vector = ad::Tensor({config.predictor.word_dim});
    m.unk_vector.set_requires_grad(true);
    return m;
}

NamedTensors Model::named_parameters() {
    NamedTensors out = predictor.named_parameters();
    for (auto& p : tagger.named_parameters()) out.push_back(p);
    out.emplace_back("unk_vector", &unk_vector);
    return out;
}

bool Model::in_training_vocab(std::string_view form) const {
    return std::binary_search(training_vocab.begin(), training_vocab.end(), form);
}

RandomEmbeddings make_random_embeddings(const EmbeddingTable& table, std::uint64_t seed) {
    const double sd = table.stddev();
    return RandomEmbeddings(seed, table.dim(), sd > 0.0 ? sd : 1.0);
}

std::vector<WordSlot> make_word_slots(const Model& model, const Sentence& sentence, const EmbeddingTable& table,
                                      const WordSet* routed_to_oov) {
    std::vector<WordSlot> slots;
    slots.reserve(sentence.tokens.size());
    for (const auto& t : sentence.tokens) {
        WordSlot w;
        w.form = t.form;
        if (!routed_to_oov || !routed_to_oov->count(t.form))
            w.table_row = table.find(t.form, model.config.lowercase_fallback);
        w.chars = model.schema.encode_chars(t.form);
        slots.push_back(std::move(w));
    }
    return slots;
}

OovStrategy make_strategy(Model& model, OovKind kind, const RandomEmbeddings& random) {
    OovStrategy s;
    s.kind = kind;
    s.predictor = &model.predictor;
    s.unk_vector = &model.unk_vector;
    s.random = &random;
    return s;
}

namespace {

std::vector<double> copy_values(const ad::Tape& tape, ad::Var v) {
    auto vals = tape.value(v);
    return {vals.begin(), vals.end()};
}

std::size_t argmax(std::span<const double> xs) {
    return static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
}

}  // namespace

SentencePrediction predict_sentence(Model& model, const Sentence& sentence, const EmbeddingTable& table,
                                    OovKind kind, const RandomEmbeddings& random, const WordSet* routed_to_oov) {
    const auto slots = make_word_slots(model, sentence, table, routed_to_oov);
    ad::Tape tape;
    const EmbeddedSentence embedded = embed_sentence(tape, slots, table, make_strategy(model, kind, random));
    const auto logits = tag_forward(tape, model.tagger, embedded.embeddings);

    SentencePrediction out;
    out.tokens.reserve(logits.size());
    for (const auto& l : logits) {
        TokenPrediction p;
        if (!model.schema.tags().empty()) p.pos = static_cast<std::int32_t>(argmax(tape.value(l.pos)));
        for (ad::Var m : l.morph) p.morph.push_back(argmax(tape.value(m)));
        out.tokens.push_back(std::move(p));
    }
    for (const auto& slot : embedded.oov) {
        if (!slot.prediction) continue;
        OovAttention a;
        a.position = slot.position;
        a.window = slot.window;
        if (slot.prediction->context_alphas) {
            a.context_alphas = copy_values(tape, *slot.prediction->context_alphas);
            a.context_scores = copy_values(tape, *slot.prediction->context_scores);
        }
        a.char_alphas = copy_values(tape, slot.prediction->char_alphas);
        a.char_scores = copy_values(tape, slot.prediction->char_scores);
        out.attention.push_back(std::move(a));
    }
    return out;
}

Sentence apply_predictions(const Model& model, const Sentence& sentence, const SentencePrediction& prediction) {
    if (prediction.tokens.size() != sentence.tokens.size())
        throw AlignmentError("prediction length differs from sentence length");
    Sentence out = sentence;
    for (std::size_t i = 0; i < out.tokens.size(); ++i) {
        const auto& p = prediction.tokens[i];
        if (model.config.task != TaskMode::morph && p.pos != kUnknownId)
            out.tokens[i].upos = model.schema.tags()[static_cast<std::size_t>(p.pos)];
        if (model.config.task != TaskMode::pos) out.tokens[i].feats = model.schema.decode_morph(p.morph);
    }
    return out;
}

}  // namespace ccoov
