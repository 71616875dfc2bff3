#pragma once

// End-to-end training: the only learning signal is the tagging loss. Each
// mini-batch samples word dropout over in-table training words so the
// predictor sees OOV slots even when the corpus has few natural OOVs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccoov/data.hpp"
#include "ccoov/evaluation.hpp"
#include "ccoov/init.hpp"
#include "ccoov/model.hpp"

namespace ccoov {

struct TrainConfig {
    std::size_t batch_size = 32;
    double dropout_fraction = 0.15;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 30;
    std::size_t patience = 5;
    std::uint64_t seed = 42;
    double clip_norm = 5.0;  // <= 0 disables clipping
    OovKind train_strategy = OovKind::predictor;
    ModelConfig model;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

// key = value lines; '#' starts a comment. Keys mirror TrainConfig fields
// (model fields are flattened: task, tagger_hidden, char_dim, ...).
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
std::map<std::string, std::string> config_key_values(const TrainConfig& config);

// k = ceil(fraction * n).
std::size_t dropout_count(std::size_t vocabulary_size, double fraction);

// Uniform sample of dropout_count(|vocabulary|, fraction) distinct words.
std::vector<std::string> sample_word_dropout(std::span<const std::string> vocabulary, double fraction, Rng& rng);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;
};

// Bias-corrected Adam update on every tensor's grad. State buffers are
// created on the first step and must keep mirroring the parameter shapes.
void adam_step(std::span<const std::pair<std::string, ad::Tensor*>> params, AdamState& state,
               const AdamConfig& config);

// Scales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_gradients(std::span<const std::pair<std::string, ad::Tensor*>> params, double max_norm);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::size_t clipped_batches = 0;
    std::optional<EvalReport> dev;
    bool best = false;
};

nlohmann::json to_json(const EpochLog& log);
nlohmann::json training_log_json(std::span<const EpochLog> log);

struct TrainResult {
    Model model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
};

using ProgressCallback = std::function<void(const EpochLog&)>;

// Words eligible for dropout: training forms that have a table row, sorted.
std::vector<std::string> dropout_vocabulary(const Corpus& training, const EmbeddingTable& table,
                                            bool lowercase_fallback);

// Dev selection score: mean of the enabled all-token metrics.
double selection_score(const EvalReport& report);

TrainResult train(const Corpus& training, const Corpus* dev, const EmbeddingTable& table, const TrainConfig& config,
                  const ProgressCallback& progress = {});

}  // namespace ccoov
