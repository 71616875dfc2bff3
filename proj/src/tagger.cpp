#include "ccoov/tagger.hpp"

namespace ccoov {

std::string to_string(TaskMode mode) {
    switch (mode) {
        case TaskMode::joint: return "joint";
        case TaskMode::pos: return "pos";
        case TaskMode::morph: return "morph";
    }
    return "?";
}

std::string to_string(OovKind kind) {
    switch (kind) {
        case OovKind::random: return "random";
        case OovKind::predictor: return "predictor";
        case OovKind::unk_token: return "unk";
    }
    return "?";
}

TaskMode parse_task_mode(std::string_view text) {
    if (text == "joint") return TaskMode::joint;
    if (text == "pos") return TaskMode::pos;
    if (text == "morph") return TaskMode::morph;
    throw Error("unknown task mode '" + std::string(text) + "' (joint, pos, morph)");
}

OovKind parse_oov_kind(std::string_view text) {
    if (text == "random") return OovKind::random;
    if (text == "predictor") return OovKind::predictor;
    if (text == "unk" || text == "unk_token") return OovKind::unk_token;
    throw Error("unknown OOV strategy '" + std::string(text) + "' (predictor, random, unk)");
}

TaggerParams TaggerParams::init(std::size_t word_dim, std::size_t hidden, std::size_t tag_count,
                                std::span<const MorphCategory> categories, Rng& rng) {
    TaggerParams p;
    p.word_bilstm = BiLstmParams::init(word_dim, hidden, rng);
    p.pos_head = LinearParams::init(2 * hidden, std::max<std::size_t>(tag_count, 1), rng);
    for (const auto& c : categories) p.morph_heads.push_back(LinearParams::init(2 * hidden, c.values.size() + 1, rng));
    return p;
}

NamedTensors TaggerParams::named_parameters() {
    NamedTensors out;
    word_bilstm.collect("tagger.word_bilstm", out);
    pos_head.collect("tagger.pos_head", out);
    for (std::size_t c = 0; c < morph_heads.size(); ++c)
        morph_heads[c].collect("tagger.morph_head." + std::to_string(c), out);
    return out;
}

EmbeddedSentence embed_sentence(ad::Tape& tape, std::span<const WordSlot> sentence, const EmbeddingTable& table,
                                const OovStrategy& strategy) {
    if (sentence.empty()) throw EmptySentence("cannot embed an empty sentence");
    EmbeddedSentence out;
    out.embeddings.reserve(sentence.size());
    for (std::size_t i = 0; i < sentence.size(); ++i) {
        const WordSlot& w = sentence[i];
        if (w.table_row) {
            out.embeddings.push_back(tape.constant(table.row(*w.table_row)));
            continue;
        }
        OovSlot slot;
        slot.position = i;
        switch (strategy.kind) {
            case OovKind::predictor: {
                if (!strategy.predictor || !strategy.random)
                    throw Error("predictor strategy needs predictor parameters and random embeddings");
                slot.window = extract_context_window(sentence.size(), i, strategy.predictor->dims.max_context);
                const ContextWindow window = resolve_context_embeddings(sentence, slot.window, table, *strategy.random);
                slot.prediction = predict_embedding(tape, *strategy.predictor, window, w.chars);
                out.embeddings.push_back(slot.prediction->embedding);
                break;
            }
            case OovKind::random:
                if (!strategy.random) throw Error("random strategy needs random embeddings");
                out.embeddings.push_back(tape.constant(strategy.random->get(w.form)));
                break;
            case OovKind::unk_token:
                if (!strategy.unk_vector) throw Error("unk strategy needs the shared UNK vector");
                out.embeddings.push_back(tape.leaf(*strategy.unk_vector));
                break;
        }
        out.oov.push_back(std::move(slot));
    }
    return out;
}

std::vector<TokenLogits> tag_forward(ad::Tape& tape, TaggerParams& params, std::span<const ad::Var> embedded) {
    if (embedded.empty()) throw EmptySentence("tag_forward on an empty sentence");
    const auto states = bilstm_encode(tape, params.word_bilstm, embedded);
    std::vector<TokenLogits> out;
    out.reserve(states.size());
    for (ad::Var h : states) {
        TokenLogits t;
        t.pos = linear_forward(tape, params.pos_head, h);
        t.morph.reserve(params.morph_heads.size());
        for (auto& head : params.morph_heads) t.morph.push_back(linear_forward(tape, head, h));
        out.push_back(std::move(t));
    }
    return out;
}

ad::Var compute_loss(ad::Tape& tape, std::span<const TokenLogits> outputs, std::span<const EncodedToken> gold,
                     TaskMode task) {
    if (outputs.size() != gold.size() || outputs.empty())
        throw AlignmentError(std::to_string(outputs.size()) + " outputs for " + std::to_string(gold.size()) +
                             " gold tokens");
    const bool use_pos = task != TaskMode::morph;
    const bool use_morph = task != TaskMode::pos;
    std::vector<ad::Var> token_losses;
    token_losses.reserve(outputs.size());
    for (std::size_t t = 0; t < outputs.size(); ++t) {
        std::vector<ad::Var> terms;
        if (use_pos && gold[t].pos != kUnknownId)
            terms.push_back(tape.cross_entropy(outputs[t].pos, static_cast<std::size_t>(gold[t].pos)));
        if (use_morph && !outputs[t].morph.empty()) {
            if (gold[t].morph.size() != outputs[t].morph.size())
                throw AlignmentError("morph categories differ between outputs and gold");
            std::vector<ad::Var> per_cat;
            per_cat.reserve(outputs[t].morph.size());
            for (std::size_t c = 0; c < outputs[t].morph.size(); ++c)
                per_cat.push_back(tape.cross_entropy(outputs[t].morph[c], gold[t].morph[c]));
            terms.push_back(
                tape.scale(tape.sum(tape.concat(per_cat)), 1.0 / static_cast<double>(per_cat.size())));
        }
        if (terms.empty()) continue;
        token_losses.push_back(terms.size() == 1 ? terms[0] : tape.add(terms[0], terms[1]));
    }
    if (token_losses.empty()) return tape.constant(std::vector<double>{0.0});
    return tape.scale(tape.sum(tape.concat(token_losses)), 1.0 / static_cast<double>(outputs.size()));
}

}  // namespace ccoov
