#pragma once

// Export of the predictor's attention weights (context words and target
// characters) for every OOV occurrence, as JSON and as a static HTML heatmap.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccoov/model.hpp"

namespace ccoov {

// softmax(scores / temperature). Display only; temperature must be > 0.
std::vector<double> temperature_softmax(std::span<const double> scores, double temperature);

struct AttentionRecord {
    std::vector<std::string> forms;
    std::size_t oov_index = 0;
    std::vector<std::string> chars;
    std::vector<std::size_t> context_positions;  // sentence index of each context alpha
    std::vector<double> char_alphas;             // model weights
    std::vector<double> context_alphas;
    std::vector<double> display_char_alphas;     // after temperature
    std::vector<double> display_context_alphas;
    std::string predicted_tag;
    std::string gold_tag;
    double temperature = 1.0;
};

// One record per OOV occurrence (plus every occurrence of `targets`, which
// are routed through the predictor even when the table has them).
std::vector<AttentionRecord> collect_attention(Model& model, const Corpus& corpus, const EmbeddingTable& table,
                                               const RandomEmbeddings& random, const WordSet& targets,
                                               double temperature = 1.0);

nlohmann::json attention_to_json(std::span<const AttentionRecord> records);
std::string attention_html(std::span<const AttentionRecord> records);

struct ExportPaths {
    std::filesystem::path json;
    std::filesystem::path html;
};

// Writes <prefix>.json and <prefix>.html. Throws NoOovTargets when nothing
// in the corpus is routed through the predictor.
ExportPaths export_attention(Model& model, const Corpus& corpus, const EmbeddingTable& table,
                             const RandomEmbeddings& random, const WordSet& targets,
                             const std::filesystem::path& prefix, double temperature = 1.0);

}  // namespace ccoov
