#pragma once

// Synthetic suffix-morphology language. Open-class words are stem + suffix
// and the suffix alone determines the POS tag and morphological features;
// word order carries little information. Test sentences mix in stems never
// seen in training, which are also missing from the embedding table.

#include <cstdint>

#include "ccoov/data.hpp"

namespace ccoov {

struct SyntheticConfig {
    std::uint64_t seed = 1;
    std::size_t train_sentences = 5000;
    std::size_t dev_sentences = 300;
    std::size_t test_sentences = 1000;
    std::size_t train_stems_per_class = 60;
    std::size_t heldout_stems_per_class = 40;
    std::size_t min_length = 4;  // including the final punctuation
    std::size_t max_length = 9;
    double heldout_probability = 0.35;  // per open-class token in dev/test
    double table_coverage = 0.9;        // share of training-pool forms given a table row
    std::size_t dim = 64;
    double noise = 0.5;
};

struct SyntheticData {
    Corpus train;
    Corpus dev;
    Corpus test;
    EmbeddingTable table;
};

SyntheticData generate_suffix_language(const SyntheticConfig& config);

}  // namespace ccoov
