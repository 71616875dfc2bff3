#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "doctest.h"
#include "pipeline_oracle.hpp"

#include "ccoov/gradcheck.hpp"
#include "ccoov/oov_predictor.hpp"

using namespace ccoov;
using namespace ccoov::ad;

namespace {

PredictorDims small_dims() { return {3, 2, 2, 3, 40}; }

// Exhaustive search over (left, right) splits: most context first, then the
// most balanced split, then the larger right side.
std::pair<std::size_t, std::size_t> best_split(std::size_t length, std::size_t target, std::size_t max_context) {
    std::pair<std::size_t, std::size_t> best{0, 0};
    for (std::size_t l = 0; l <= target; ++l)
        for (std::size_t r = 0; r + target + 1 <= length; ++r) {
            if (l + r > max_context) continue;
            const auto [bl, br] = best;
            const auto imbalance = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
            if (l + r > bl + br || (l + r == bl + br && (imbalance(l, r) < imbalance(bl, br) ||
                                                         (imbalance(l, r) == imbalance(bl, br) && r > br))))
                best = {l, r};
        }
    return best;
}

ContextWindow random_window(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
    ContextWindow w;
    for (std::size_t i = 0; i < n; ++i) w.embeddings.push_back(oracle::random_vec(rng, dim));
    w.oov_position = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    return w;
}

std::vector<std::size_t> random_chars(std::mt19937_64& rng, std::size_t n, std::size_t vocab) {
    std::vector<std::size_t> c(n);
    for (auto& x : c) x = std::uniform_int_distribution<std::size_t>(0, vocab - 1)(rng);
    return c;
}

std::vector<double> predict(OovPredictorParams& p, const ContextWindow& w, const std::vector<std::size_t>& chars) {
    Tape tape;
    const auto out = predict_embedding(tape, p, w, chars);
    const auto v = tape.value(out.embedding);
    return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("context window examples") {
    const auto w = extract_context_window(100, 50);
    CHECK(w.begin == 30);
    CHECK(w.end == 71);
    CHECK(w.context_size() == 40);
    CHECK(w.oov_position() == 20);

    const auto one = extract_context_window(1, 0);
    CHECK(one.context_size() == 0);
    CHECK(one.oov_position() == 0);

    const auto donated = extract_context_window(60, 2);
    CHECK(donated.oov_position() == 2);
    CHECK(donated.end - donated.target - 1 == 38);
    CHECK(donated.context_size() == 40);

    CHECK_THROWS_AS(extract_context_window(5, 5), IndexOutOfRange);
}

TEST_CASE("context window matches exhaustive search for every position of lengths 1..60") {
    for (std::size_t max_context : {40u, 5u, 1u}) {
        for (std::size_t len = 1; len <= 60; ++len)
            for (std::size_t t = 0; t < len; ++t) {
                const auto w = extract_context_window(len, t, max_context);
                const auto [l, r] = best_split(len, t, max_context);
                INFO("len=" << len << " target=" << t << " max=" << max_context);
                CHECK(w.target == t);
                CHECK(t - w.begin == l);
                CHECK(w.end - t - 1 == r);
                CHECK(w.context_size() <= max_context);
            }
    }
}

TEST_CASE("random embeddings are a pure function of seed and form") {
    const RandomEmbeddings a(7, 64, 0.3), b(7, 64, 0.3), c(8, 64, 0.3);
    const auto x = a.get("zorblat");
    CHECK(a.get("zorblat") == x);
    CHECK(b.get("zorblat") == x);
    CHECK(c.get("zorblat") != x);
    CHECK(a.get("glimber") != x);
    CHECK(x.size() == 64);
}

TEST_CASE("random embeddings follow the table spread") {
    const double sd = 0.37;
    const RandomEmbeddings r(11, 64, sd);
    const std::size_t draws = 10000;
    std::vector<double> sum(64, 0.0), sq(64, 0.0);
    for (std::size_t i = 0; i < draws; ++i) {
        const auto v = r.get("w" + std::to_string(i));
        for (std::size_t k = 0; k < 64; ++k) sum[k] += v[k], sq[k] += v[k] * v[k];
    }
    for (std::size_t k = 0; k < 64; ++k) {
        const double mean = sum[k] / draws;
        const double std = std::sqrt(sq[k] / draws - mean * mean);
        CHECK(std::abs(mean) < 0.05 * sd);
        CHECK(std == doctest::Approx(sd).epsilon(0.05));
    }
}

TEST_CASE("random embeddings are independent of thread count and order") {
    std::vector<std::string> forms;
    for (int i = 0; i < 400; ++i) forms.push_back("form" + std::to_string(i));
    const RandomEmbeddings serial(5, 16, 1.0);
    std::vector<std::vector<double>> expected;
    for (const auto& f : forms) expected.push_back(serial.get(f));

    const RandomEmbeddings shared(5, 16, 1.0);
    std::vector<std::vector<std::vector<double>>> seen(8, std::vector<std::vector<double>>(forms.size()));
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < 8; ++t)
        threads.emplace_back([&, t] {
            for (std::size_t k = 0; k < forms.size(); ++k) {
                const std::size_t i = (k * (t + 1) + t) % forms.size();
                seen[t][i] = shared.get(forms[i]);
            }
        });
    for (auto& th : threads) th.join();
    for (std::size_t t = 0; t < 8; ++t)
        for (std::size_t i = 0; i < forms.size(); ++i)
            if (!seen[t][i].empty()) CHECK(seen[t][i] == expected[i]);
}

TEST_CASE("resolve context embeddings") {
    EmbeddingTable table(3);
    table.add("the", std::vector<double>{1, 2, 3});
    table.add("cat", std::vector<double>{4, 5, 6});
    const RandomEmbeddings random(1, 3, 1.0);
    const std::vector<WordSlot> slots{{"the", 0, {}}, {"blorp", std::nullopt, {}}, {"cat", 1, {}},
                                      {"blorp", std::nullopt, {}}, {"the", 0, {}}};
    const auto w = resolve_context_embeddings(slots, extract_context_window(5, 2), table, random);
    REQUIRE(w.embeddings.size() == 5);
    CHECK(w.oov_position == 2);
    CHECK(w.context_size() == 4);
    CHECK(w.embeddings[0] == std::vector<double>{1, 2, 3});
    CHECK(w.embeddings[4] == std::vector<double>{1, 2, 3});
    CHECK(w.embeddings[1] == random.get("blorp"));
    CHECK(w.embeddings[3] == w.embeddings[1]);
}

TEST_CASE("predictor shapes follow the dimensions") {
    Rng rng(1);
    auto p = OovPredictorParams::init({}, 30, rng);
    CHECK(p.fuse1.in_dim() == 512);
    CHECK(p.fuse1.out_dim() == 64);
    CHECK(p.fuse2.in_dim() == 64);
    CHECK(p.fuse2.out_dim() == 64);
    CHECK(p.char_embeddings.dim() == 20);
    CHECK(p.context_bilstm.output_dim() == 256);
    std::mt19937_64 data(2);
    for (std::size_t n : {1u, 2u, 7u}) {
        const auto w = random_window(data, n, 64);
        CHECK(predict(p, w, random_chars(data, 1 + n, 30)).size() == 64);
    }
    Tape tape;
    CHECK_THROWS_AS(predict_embedding(tape, p, random_window(data, 3, 64), {}), EmptyCharacters);
}

TEST_CASE("predictor matches the composed oracle") {
    std::mt19937_64 data(9);
    for (int trial = 0; trial < 40; ++trial) {
        Rng rng(trial);
        PredictorDims dims{5, 3, 4, 6, 40};
        auto p = OovPredictorParams::init(dims, 7, rng);
        const auto w = random_window(data, 1 + trial % 6, 5);
        const auto chars = random_chars(data, 1 + trial % 5, 7);
        Tape tape;
        const auto out = predict_embedding(tape, p, w, chars);
        CHECK(oracle::max_abs_diff(tape.value(out.embedding), oracle::predictor<double>(p, w, chars)) <= 1e-12);
        CHECK(out.context_alphas.has_value() == (w.context_size() > 0));
        if (out.context_alphas) CHECK(tape.value(*out.context_alphas).size() == w.context_size());
        CHECK(tape.value(out.char_alphas).size() == chars.size());
        for (const auto& a : {std::optional<Var>(out.char_alphas), out.context_alphas}) {
            if (!a) continue;
            double total = 0;
            for (double v : tape.value(*a)) total += v;
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("predictor invariants") {
    Rng rng(4);
    auto p = OovPredictorParams::init({}, 12, rng);
    std::mt19937_64 data(4);
    const auto chars = std::vector<std::size_t>{1, 2, 3, 4, 5};

    SUBCASE("the target slot's vector is never read") {
        auto w = random_window(data, 9, 64);
        const auto a = predict(p, w, chars);
        w.embeddings[w.oov_position] = oracle::random_vec(data, 64, 10.0);
        CHECK(predict(p, w, chars) == a);
    }
    SUBCASE("words outside the window do not matter") {
        std::vector<WordSlot> slots;
        EmbeddingTable table(64);
        for (int i = 0; i < 60; ++i) {
            table.add("w" + std::to_string(i), oracle::random_vec(data, 64));
            slots.push_back({"w" + std::to_string(i), static_cast<std::size_t>(i), {}});
        }
        const RandomEmbeddings random(0, 64, 1.0);
        const auto span = extract_context_window(60, 10);
        const auto a = predict(p, resolve_context_embeddings(slots, span, table, random), chars);
        std::shuffle(slots.begin() + static_cast<std::ptrdiff_t>(span.end), slots.end(), data);
        const auto b = predict(p, resolve_context_embeddings(slots, span, table, random), chars);
        CHECK(a == b);
    }
    SUBCASE("character order matters") {
        const auto w = random_window(data, 5, 64);
        auto reversed = chars;
        std::reverse(reversed.begin(), reversed.end());
        CHECK(predict(p, w, chars) != predict(p, w, reversed));
    }
    SUBCASE("empty context pools to zero") {
        ContextWindow single;
        single.embeddings.push_back(oracle::random_vec(data, 64));
        Tape tape;
        const auto out = predict_embedding(tape, p, single, chars);
        CHECK_FALSE(out.context_alphas.has_value());
        CHECK(oracle::max_abs_diff(tape.value(out.embedding), oracle::predictor<double>(p, single, chars)) <= 1e-12);
    }
}

TEST_CASE("parallel prediction equals serial prediction") {
    Rng rng(6);
    auto p = OovPredictorParams::init({}, 12, rng);
    std::mt19937_64 data(6);
    std::vector<ContextWindow> windows;
    std::vector<std::vector<std::size_t>> chars;
    for (int i = 0; i < 16; ++i) {
        windows.push_back(random_window(data, 1 + i % 8, 64));
        chars.push_back(random_chars(data, 2 + i % 5, 12));
    }
    std::vector<std::vector<double>> serial, parallel(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) serial.push_back(predict(p, windows[i], chars[i]));
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            for (std::size_t i = t; i < windows.size(); i += 4) parallel[i] = predict(p, windows[i], chars[i]);
        });
    for (auto& th : threads) th.join();
    CHECK(parallel == serial);
}

TEST_CASE("predictor gradients pass finite differences") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Rng rng(seed);
        auto p = OovPredictorParams::init(small_dims(), 5, rng);
        std::mt19937_64 data(seed);
        const auto w = random_window(data, 4, 3);
        const auto chars = random_chars(data, 3, 5);
        const Tensor readout = Tensor::vector(oracle::random_vec(data, 3));
        const auto loss = [&](Tape& tape) {
            const auto out = predict_embedding(tape, p, w, chars);
            return tape.sum(tape.mul(tape.constant(readout), tape.tanh(out.embedding)));
        };
        const auto reference = [&] {
            const auto e = oracle::predictor<long double>(p, w, chars);
            long double total = 0;
            for (std::size_t i = 0; i < e.size(); ++i) total += readout[i] * std::tanh(e[i]);
            return total;
        };
        for (const auto& g : gradient_check_params(loss, p.named_parameters(), {}, reference)) {
            INFO(g.name);
            if (g.name.ends_with("attention.bias"))
                CHECK(g.max_relative_error < 1.0);
            else
                CHECK(g.max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("predictor gradients at full width on sampled coordinates") {
    Rng rng(21);
    auto p = OovPredictorParams::init({}, 20, rng);
    std::mt19937_64 data(21);
    const auto w = random_window(data, 6, 64);
    const auto chars = random_chars(data, 5, 20);
    const Tensor readout = Tensor::vector(oracle::random_vec(data, 64));
    const auto loss = [&](Tape& tape) {
        const auto out = predict_embedding(tape, p, w, chars);
        return tape.sum(tape.mul(tape.constant(readout), out.embedding));
    };
    ParamCheckOptions options;
    options.max_coordinates = 6;
    options.seed = 3;
    const auto reference = [&] {
        const auto e = oracle::predictor<long double>(p, w, chars);
        long double total = 0;
        for (std::size_t i = 0; i < e.size(); ++i) total += readout[i] * e[i];
        return total;
    };
    for (const auto& g : gradient_check_params(loss, p.named_parameters(), options, reference)) {
        INFO(g.name);
        if (g.name.ends_with("attention.bias"))
            CHECK(g.max_relative_error < 1.0);
        else
            CHECK(g.max_relative_error < 1e-4);
    }
}
