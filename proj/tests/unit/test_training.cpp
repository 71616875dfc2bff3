#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "ccoov/synthetic.hpp"
#include "ccoov/training.hpp"

using namespace ccoov;
using namespace ccoov::ad;

namespace {

std::vector<std::string> vocabulary(std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back("w" + std::to_string(i));
    return v;
}

std::vector<std::vector<double>> values_of(const NamedTensors& params) {
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : params) out.emplace_back(t->values().begin(), t->values().end());
    return out;
}

TrainConfig small_train_config(std::size_t word_dim) {
    TrainConfig c;
    c.model = fixture::tiny_config(word_dim);
    c.epochs = 3;
    c.batch_size = 2;
    c.seed = 5;
    return c;
}

SyntheticData small_language(std::uint64_t seed, std::size_t sentences) {
    SyntheticConfig s;
    s.seed = seed;
    s.train_sentences = sentences;
    s.dev_sentences = 10;
    s.test_sentences = 10;
    s.dim = 16;
    return generate_suffix_language(s);
}

}  // namespace

TEST_CASE("dropout count") {
    CHECK(dropout_count(100, 0.15) == 15);
    CHECK(dropout_count(10, 0.15) == 2);
    CHECK(dropout_count(7, 0.0) == 0);
    CHECK(dropout_count(0, 0.15) == 0);
    CHECK(dropout_count(3, 0.5) == 2);
    CHECK_THROWS_AS(dropout_count(10, 1.0), Error);
    CHECK_THROWS_AS(dropout_count(10, -0.1), Error);
}

TEST_CASE("word dropout samples exactly k distinct words with uniform inclusion") {
    const auto vocab = vocabulary(100);
    Rng rng(42);
    std::map<std::string, std::size_t> hits;
    const std::size_t batches = 10000;
    for (std::size_t b = 0; b < batches; ++b) {
        const auto s = sample_word_dropout(vocab, 0.15, rng);
        REQUIRE(s.size() == 15);
        REQUIRE(std::set<std::string>(s.begin(), s.end()).size() == 15);
        for (const auto& w : s) ++hits[w];
    }
    REQUIRE(hits.size() == 100);
    double chi2 = 0.0;
    for (const auto& [w, n] : hits) {
        INFO(w);
        CHECK(std::abs(static_cast<double>(n) / batches - 0.15) <= 0.01);
        const double expected = 0.15 * batches;
        chi2 += (n - expected) * (n - expected) / expected;
    }
    // 99th percentile of chi-square with 99 degrees of freedom.
    CHECK(chi2 < 134.6);
}

TEST_CASE("dropout vocabulary holds only in-table training words") {
    const Corpus c = fixture::corpus20();
    const EmbeddingTable table = fixture::table20();
    const auto v = dropout_vocabulary(c, table, true);
    CHECK(std::is_sorted(v.begin(), v.end()));
    for (const auto& w : v) CHECK(table.find(w, true).has_value());
    for (const char* oov : {"zorblat", "glimbered", "frobnic"})
        CHECK(std::find(v.begin(), v.end(), oov) == v.end());
    CHECK(std::find(v.begin(), v.end(), "The") != v.end());
    const auto exact = dropout_vocabulary(c, table, false);
    CHECK(std::find(exact.begin(), exact.end(), "The") == exact.end());
    CHECK(std::find(exact.begin(), exact.end(), "the") != exact.end());
}

TEST_CASE("word dropout leaves gold tags alone") {
    const Corpus c = fixture::corpus20();
    const EmbeddingTable table = fixture::table20();
    const Model m = fixture::tiny_model(c, 1);
    const WordSet dropped{"cat", "mat"};
    const auto plain = make_word_slots(m, c.sentences[0], table);
    const auto routed = make_word_slots(m, c.sentences[0], table, &dropped);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        const bool hit = dropped.count(c.sentences[0].tokens[i].form) > 0;
        CHECK(routed[i].table_row.has_value() == !hit);
        CHECK(routed[i].form == plain[i].form);
        CHECK(routed[i].chars == plain[i].chars);
    }
}

TEST_CASE("Adam") {
    SUBCASE("zero gradient leaves parameters unchanged and advances the step") {
        Tensor x({3}, 1.5);
        x.set_requires_grad(true);
        const NamedTensors params{{"x", &x}};
        AdamState state;
        adam_step(params, state, {});
        CHECK(state.step == 1);
        CHECK(std::vector<double>(x.values().begin(), x.values().end()) == std::vector<double>(3, 1.5));
    }
    SUBCASE("first step moves each coordinate by lr against the gradient sign") {
        Tensor x = Tensor::vector({0.5, -2.0, 3.0, 0.0});
        x.set_requires_grad(true);
        const std::vector<double> g{0.3, -7.0, 1e-3, 2.0};
        std::copy(g.begin(), g.end(), x.grad().begin());
        const NamedTensors params{{"x", &x}};
        AdamState state;
        const AdamConfig config{0.01, 0.9, 0.999, 1e-8};
        const std::vector<double> before(x.values().begin(), x.values().end());
        adam_step(params, state, config);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double expected = -config.learning_rate * g[i] / (std::abs(g[i]) + config.epsilon);
            CHECK(x[i] - before[i] == doctest::Approx(expected).epsilon(1e-9));
        }
    }
    SUBCASE("200 steps on x^2 from 5 with lr 0.1") {
        Tensor x = Tensor::vector({5.0});
        x.set_requires_grad(true);
        const NamedTensors params{{"x", &x}};
        AdamState state;
        for (int i = 0; i < 200; ++i) {
            x.grad()[0] = 2.0 * x[0];
            adam_step(params, state, {0.1, 0.9, 0.999, 1e-8});
        }
        CHECK(std::abs(x[0]) < 0.5);
    }
    SUBCASE("errors") {
        Tensor x = Tensor::vector({1.0});
        x.set_requires_grad(true);
        Tensor y = Tensor::vector({1.0, 2.0});
        y.set_requires_grad(true);
        AdamState state;
        adam_step(NamedTensors{{"x", &x}}, state, {});
        CHECK_THROWS_AS(adam_step(NamedTensors{{"x", &x}, {"y", &y}}, state, {}), ShapeMismatch);
        x.grad()[0] = NAN;
        CHECK_THROWS_AS(adam_step(NamedTensors{{"x", &x}}, state, {}), NonFinite);
    }
}

TEST_CASE("gradient clipping") {
    Tensor a = Tensor::vector({3.0, 0.0});
    Tensor b = Tensor::vector({4.0});
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    a.grad()[0] = 3.0;
    b.grad()[0] = 4.0;
    const NamedTensors params{{"a", &a}, {"b", &b}};
    CHECK(clip_gradients(params, 10.0) == doctest::Approx(5.0));
    CHECK(a.grad()[0] == 3.0);
    CHECK(clip_gradients(params, 1.0) == doctest::Approx(5.0));
    CHECK(a.grad()[0] == doctest::Approx(0.6));
    CHECK(b.grad()[0] == doctest::Approx(0.8));
    CHECK(clip_gradients(params, 0.0) == doctest::Approx(1.0));
    CHECK(b.grad()[0] == doctest::Approx(0.8));
}

TEST_CASE("config files") {
    std::istringstream in(
        "# comment\n"
        "learning_rate = 0.01\n"
        "  epochs=4   # trailing\n"
        "task = pos\n"
        "train_strategy = random\n"
        "lowercase_fallback = off\n"
        "word_dim = 32\n\n");
    const TrainConfig c = parse_train_config(in);
    CHECK(c.learning_rate == 0.01);
    CHECK(c.epochs == 4);
    CHECK(c.model.task == TaskMode::pos);
    CHECK(c.train_strategy == OovKind::random);
    CHECK_FALSE(c.model.lowercase_fallback);
    CHECK(c.model.predictor.word_dim == 32);
    CHECK(c.batch_size == 32);

    TrainConfig back;
    for (const auto& [k, v] : config_key_values(c)) set_config_value(back, k, v);
    CHECK(back == c);

    std::istringstream unknown("colour = red\n");
    CHECK_THROWS_AS(parse_train_config(unknown), ParseError);
    std::istringstream bad("epochs = many\n");
    CHECK_THROWS_AS(parse_train_config(bad), ParseError);
    std::istringstream no_eq("epochs 3\n");
    CHECK_THROWS_AS(parse_train_config(no_eq), ParseError);
    std::istringstream invalid("dropout_fraction = 1.5\n");
    CHECK_THROWS_AS(parse_train_config(invalid), Error);
    CHECK_THROWS_AS(load_train_config(fixture::temp_path("missing.cfg")), IoError);
}

TEST_CASE("train rejects bad inputs") {
    const EmbeddingTable table = fixture::table20();
    CHECK_THROWS_AS(train(Corpus{}, nullptr, table, small_train_config(4)), EmptyCorpus);
    CHECK_THROWS_AS(train(fixture::corpus20(), nullptr, table, small_train_config(5)), DimensionMismatch);
}

TEST_CASE("training is deterministic") {
    const Corpus c = fixture::corpus20();
    const EmbeddingTable table = fixture::table20();
    const TrainConfig config = small_train_config(4);
    auto a = train(c, &c, table, config);
    auto b = train(c, &c, table, config);
    CHECK(training_log_json(a.log).dump() == training_log_json(b.log).dump());
    CHECK(values_of(a.model.named_parameters()) == values_of(b.model.named_parameters()));
    TrainConfig other = config;
    other.seed = 6;
    auto d = train(c, &c, table, other);
    CHECK(values_of(a.model.named_parameters()) != values_of(d.model.named_parameters()));
}

TEST_CASE("without dropout or natural OOVs the predictor never changes") {
    Corpus c = fixture::corpus20();
    c.sentences.erase(c.sentences.begin() + 1, c.sentences.end());
    const EmbeddingTable table = fixture::table20();
    TrainConfig config = small_train_config(4);
    config.dropout_fraction = 0.0;
    Rng rng(config.seed);
    Model init = Model::init(config.model, Schema::build(c), training_vocabulary(c), rng);
    auto trained = train(c, nullptr, table, config);
    CHECK(values_of(trained.model.predictor.named_parameters()) == values_of(init.predictor.named_parameters()));
    CHECK(values_of(trained.model.tagger.named_parameters()) != values_of(init.tagger.named_parameters()));
}

TEST_CASE("patience stops training and the best epoch is restored") {
    const SyntheticData data = small_language(3, 30);
    TrainConfig config;
    config.model = fixture::tiny_config(16);
    config.epochs = 40;
    config.patience = 2;
    config.learning_rate = 0.05;
    std::vector<std::size_t> seen;
    auto r = train(data.train, &data.dev, data.table, config, [&](const EpochLog& l) { seen.push_back(l.epoch); });
    CHECK(seen.size() == r.log.size());
    REQUIRE(r.best_epoch >= 1);
    const auto& best = r.log[r.best_epoch - 1];
    CHECK(best.best);
    const RandomEmbeddings random = make_random_embeddings(data.table, config.seed);
    CHECK(evaluate(r.model, data.dev, data.table, OovKind::predictor, random) == *best.dev);
    if (r.log.size() < config.epochs) CHECK(r.log.size() - r.best_epoch == config.patience);
}

TEST_CASE("overfits a 20-sentence synthetic corpus") {
    const SyntheticData data = small_language(1, 20);
    TrainConfig config;
    config.model.predictor = {16, 3, 8, 4, 40};
    config.model.tagger_hidden = 16;
    config.epochs = 50;
    config.learning_rate = 0.003;
    config.batch_size = 4;
    auto r = train(data.train, nullptr, data.table, config);
    const RandomEmbeddings random = make_random_embeddings(data.table, config.seed);
    const auto report = evaluate(r.model, data.train, data.table, OovKind::predictor, random);
    CHECK(*report.pos_accuracy_all >= 0.95);

    std::vector<double> avg;
    for (std::size_t e = 10; e <= r.log.size(); ++e) {
        double s = 0;
        for (std::size_t k = e - 10; k < e; ++k) s += r.log[k].train_loss;
        avg.push_back(s / 10);
    }
    for (std::size_t i = 1; i < avg.size(); ++i) CHECK(avg[i] <= avg[i - 1]);
}
