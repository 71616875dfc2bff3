#pragma once

// Tagging metrics over all tokens and over the OOV split, and side-by-side
// evaluation of one trained model under several OOV strategies.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccoov/data.hpp"
#include "ccoov/model.hpp"

namespace ccoov {

// Masks are one byte per token (nonzero = included). An empty mask span
// selects every token.
using Mask = std::vector<std::uint8_t>;

// correct / total over masked tokens; nullopt when the mask selects nothing.
std::optional<double> pos_accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> gold,
                                   std::span<const std::uint8_t> mask = {});

struct PairCounts {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;

    // 2PR / (P + R). With no predicted and no gold pairs at all the two
    // sides agree perfectly and F1 is 1.
    double f1() const;
};

// Pools (category, value) pairs over masked tokens. Each token's pairs are
// treated as a set.
PairCounts count_feature_pairs(std::span<const std::vector<Feature>> predicted,
                               std::span<const std::vector<Feature>> gold, std::span<const std::uint8_t> mask = {});

std::optional<double> morph_micro_f1(std::span<const std::vector<Feature>> predicted,
                                     std::span<const std::vector<Feature>> gold,
                                     std::span<const std::uint8_t> mask = {});

struct EvalReport {
    std::string strategy;
    std::optional<double> pos_accuracy_all;
    std::optional<double> pos_accuracy_oov;
    std::optional<double> morph_micro_f1_all;
    std::optional<double> morph_micro_f1_oov;
    std::size_t tokens_all = 0;
    std::size_t tokens_oov = 0;

    bool operator==(const EvalReport&) const = default;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Aligned plain-text table, one row per report.
std::string format_reports(std::span<const EvalReport> reports);
nlohmann::json reports_to_json(std::span<const EvalReport> reports);
std::vector<EvalReport> reports_from_json(const nlohmann::json& j);

// OOV split: tokens missing from the embedding table and from the training corpus.
Mask oov_split_mask(const Model& model, const Sentence& sentence, const EmbeddingTable& table);

struct CorpusPredictions {
    std::vector<std::int32_t> predicted_pos;
    std::vector<std::int32_t> gold_pos;
    std::vector<std::vector<Feature>> predicted_feats;
    std::vector<std::vector<Feature>> gold_feats;
    Mask oov;
};

CorpusPredictions predict_corpus(Model& model, const Corpus& corpus, const EmbeddingTable& table, OovKind kind,
                                 const RandomEmbeddings& random);

EvalReport score_predictions(const CorpusPredictions& predictions, TaskMode task, const std::string& strategy);

EvalReport evaluate(Model& model, const Corpus& corpus, const EmbeddingTable& table, OovKind kind,
                    const RandomEmbeddings& random);

// Same trained weights, one report per strategy.
std::vector<EvalReport> compare_strategies(Model& model, const Corpus& corpus, const EmbeddingTable& table,
                                           std::span<const OovKind> kinds, const RandomEmbeddings& random);

}  // namespace ccoov
