#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ccoov/data.hpp"
#include "ccoov/model.hpp"
#include "ccoov/training.hpp"

namespace fixture {

inline const std::filesystem::path kData = CCOOV_TEST_DATA;

inline ccoov::Corpus corpus20() { return ccoov::read_conllu(kData / "fixture20.conllu"); }
inline ccoov::EmbeddingTable table20() { return ccoov::EmbeddingTable::load(kData / "fixture20.vec", 4); }

inline ccoov::ModelConfig tiny_config(std::size_t word_dim = 4) {
    ccoov::ModelConfig c;
    c.predictor = {word_dim, 3, 3, 4, 40};
    c.tagger_hidden = 3;
    return c;
}

inline ccoov::Model tiny_model(const ccoov::Corpus& corpus, std::uint64_t seed,
                               ccoov::ModelConfig config = tiny_config()) {
    ccoov::Rng rng(seed);
    return ccoov::Model::init(config, ccoov::Schema::build(corpus), ccoov::training_vocabulary(corpus), rng);
}

inline std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("ccoov_test_" + name);
}

}  // namespace fixture
