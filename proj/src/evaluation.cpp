#include "ccoov/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace ccoov {

namespace {

bool selected(std::span<const std::uint8_t> mask, std::size_t i) { return mask.empty() || mask[i] != 0; }

void check_aligned(std::size_t a, std::size_t b, std::span<const std::uint8_t> mask) {
    if (a != b || (!mask.empty() && mask.size() != a))
        throw AlignmentError("sequences of length " + std::to_string(a) + " and " + std::to_string(b) +
                             (mask.empty() ? std::string() : " with mask of " + std::to_string(mask.size())));
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::string cell(const std::optional<double>& v) {
    if (!v) return "n/a";
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << 100.0 * *v;
    return out.str();
}

}  // namespace

std::optional<double> pos_accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> gold,
                                   std::span<const std::uint8_t> mask) {
    check_aligned(predicted.size(), gold.size(), mask);
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (!selected(mask, i)) continue;
        ++total;
        if (gold[i] != kUnknownId && predicted[i] == gold[i]) ++correct;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(total);
}

double PairCounts::f1() const {
    if (true_positives == 0) return (false_positives == 0 && false_negatives == 0) ? 1.0 : 0.0;
    const double tp = static_cast<double>(true_positives);
    const double p = tp / (tp + static_cast<double>(false_positives));
    const double r = tp / (tp + static_cast<double>(false_negatives));
    return 2.0 * p * r / (p + r);
}

PairCounts count_feature_pairs(std::span<const std::vector<Feature>> predicted,
                               std::span<const std::vector<Feature>> gold, std::span<const std::uint8_t> mask) {
    check_aligned(predicted.size(), gold.size(), mask);
    PairCounts c;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (!selected(mask, i)) continue;
        const std::set<Feature> p(predicted[i].begin(), predicted[i].end());
        const std::set<Feature> g(gold[i].begin(), gold[i].end());
        for (const auto& f : p) (g.count(f) ? c.true_positives : c.false_positives)++;
        for (const auto& f : g)
            if (!p.count(f)) ++c.false_negatives;
    }
    return c;
}

std::optional<double> morph_micro_f1(std::span<const std::vector<Feature>> predicted,
                                     std::span<const std::vector<Feature>> gold, std::span<const std::uint8_t> mask) {
    check_aligned(predicted.size(), gold.size(), mask);
    const bool any = mask.empty() ? !gold.empty() : std::any_of(mask.begin(), mask.end(), [](auto m) { return m; });
    if (!any) return std::nullopt;
    return count_feature_pairs(predicted, gold, mask).f1();
}

nlohmann::json to_json(const EvalReport& r) {
    return {{"strategy", r.strategy},
            {"pos_accuracy_all", optional_json(r.pos_accuracy_all)},
            {"pos_accuracy_oov", optional_json(r.pos_accuracy_oov)},
            {"morph_micro_f1_all", optional_json(r.morph_micro_f1_all)},
            {"morph_micro_f1_oov", optional_json(r.morph_micro_f1_oov)},
            {"tokens_all", r.tokens_all},
            {"tokens_oov", r.tokens_oov}};
}

EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.strategy = j.at("strategy").get<std::string>();
    r.pos_accuracy_all = optional_from(j, "pos_accuracy_all");
    r.pos_accuracy_oov = optional_from(j, "pos_accuracy_oov");
    r.morph_micro_f1_all = optional_from(j, "morph_micro_f1_all");
    r.morph_micro_f1_oov = optional_from(j, "morph_micro_f1_oov");
    r.tokens_all = j.at("tokens_all").get<std::size_t>();
    r.tokens_oov = j.at("tokens_oov").get<std::size_t>();
    return r;
}

nlohmann::json reports_to_json(std::span<const EvalReport> reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    return arr;
}

std::vector<EvalReport> reports_from_json(const nlohmann::json& j) {
    std::vector<EvalReport> out;
    for (const auto& item : j) out.push_back(report_from_json(item));
    return out;
}

std::string format_reports(std::span<const EvalReport> reports) {
    const std::vector<std::string> header{"strategy", "POS all", "POS OOV", "MORPH all", "MORPH OOV", "tokens", "OOV"};
    std::vector<std::vector<std::string>> rows{header};
    for (const auto& r : reports)
        rows.push_back({r.strategy, cell(r.pos_accuracy_all), cell(r.pos_accuracy_oov), cell(r.morph_micro_f1_all),
                        cell(r.morph_micro_f1_oov), std::to_string(r.tokens_all), std::to_string(r.tokens_oov)});
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == 0)
                out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
            else
                out << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
        }
        out << '\n';
    }
    return out.str();
}

Mask oov_split_mask(const Model& model, const Sentence& sentence, const EmbeddingTable& table) {
    Mask mask;
    mask.reserve(sentence.tokens.size());
    for (const auto& t : sentence.tokens)
        mask.push_back(!table.find(t.form, model.config.lowercase_fallback) && !model.in_training_vocab(t.form));
    return mask;
}

CorpusPredictions predict_corpus(Model& model, const Corpus& corpus, const EmbeddingTable& table, OovKind kind,
                                 const RandomEmbeddings& random) {
    CorpusPredictions out;
    for (const auto& sentence : corpus.sentences) {
        if (sentence.tokens.empty()) continue;
        const SentencePrediction pred = predict_sentence(model, sentence, table, kind, random);
        const Mask mask = oov_split_mask(model, sentence, table);
        for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
            const Token& t = sentence.tokens[i];
            out.predicted_pos.push_back(pred.tokens[i].pos);
            out.gold_pos.push_back(model.schema.tag_id(t.upos));
            out.predicted_feats.push_back(model.schema.decode_morph(pred.tokens[i].morph));
            out.gold_feats.push_back(t.feats);
            out.oov.push_back(mask[i]);
        }
    }
    return out;
}

EvalReport score_predictions(const CorpusPredictions& p, TaskMode task, const std::string& strategy) {
    EvalReport r;
    r.strategy = strategy;
    r.tokens_all = p.gold_pos.size();
    r.tokens_oov = static_cast<std::size_t>(std::count(p.oov.begin(), p.oov.end(), 1));
    if (task != TaskMode::morph) {
        r.pos_accuracy_all = pos_accuracy(p.predicted_pos, p.gold_pos);
        r.pos_accuracy_oov = pos_accuracy(p.predicted_pos, p.gold_pos, p.oov);
    }
    if (task != TaskMode::pos) {
        r.morph_micro_f1_all = morph_micro_f1(p.predicted_feats, p.gold_feats);
        r.morph_micro_f1_oov = morph_micro_f1(p.predicted_feats, p.gold_feats, p.oov);
    }
    return r;
}

EvalReport evaluate(Model& model, const Corpus& corpus, const EmbeddingTable& table, OovKind kind,
                    const RandomEmbeddings& random) {
    return score_predictions(predict_corpus(model, corpus, table, kind, random), model.config.task, to_string(kind));
}

std::vector<EvalReport> compare_strategies(Model& model, const Corpus& corpus, const EmbeddingTable& table,
                                           std::span<const OovKind> kinds, const RandomEmbeddings& random) {
    std::vector<EvalReport> out;
    for (OovKind k : kinds) out.push_back(evaluate(model, corpus, table, k, random));
    return out;
}

}  // namespace ccoov
