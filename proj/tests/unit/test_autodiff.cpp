#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "ccoov/gradcheck.hpp"

using namespace ccoov;
using namespace ccoov::ad;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double scale = 1.0) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), oracle::random_vec(rng, n, scale));
}

std::vector<double> values_of(const Tape& tape, Var v) {
    const auto s = tape.value(v);
    return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("tensor construction and invariants") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.grad().empty());
    t.set_requires_grad(true);
    CHECK(t.grad().size() == 6);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeMismatch);
    CHECK_THROWS_AS(Tensor(Shape{0, 2}), ShapeMismatch);
    CHECK(Tensor::scalar(2.0).shape() == Shape{1});
}

TEST_CASE("softmax forward") {
    Tape tape;
    const Var s = tape.softmax(tape.constant(Tensor::vector({0.0, 0.0})));
    CHECK(values_of(tape, s) == std::vector<double>{0.5, 0.5});

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Tape t;
        const auto x = oracle::random_vec(rng, 1 + trial % 7, 3.0);
        const Var y = t.softmax(t.constant(Tensor::vector(x)));
        const auto expected = oracle::softmax(x);
        CHECK(oracle::max_abs_diff(t.value(y), expected) <= 1e-12);
        double total = 0.0;
        for (double v : t.value(y)) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);

        auto shifted = x;
        for (double& v : shifted) v += 17.25;
        const Var z = t.softmax(t.constant(Tensor::vector(shifted)));
        CHECK(oracle::max_abs_diff(t.value(z), t.value(y)) <= 1e-12);
    }
}

TEST_CASE("softmax over matrix rows") {
    Tape tape;
    const Var s = tape.softmax(tape.constant(Tensor::matrix(2, 3, {0, 0, 0, 1, 2, 3})));
    const auto v = values_of(tape, s);
    CHECK(v[0] == doctest::Approx(1.0 / 3));
    CHECK(v[0] + v[1] + v[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v[3] + v[4] + v[5] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(oracle::max_abs_diff(std::span(v).subspan(3), oracle::softmax<double>({1, 2, 3})) <= 1e-12);
}

TEST_CASE("tanh and sigmoid at zero") {
    Tape tape;
    const Var x = tape.constant(Tensor::vector({0.0}));
    CHECK(tape.value(tape.tanh(x))[0] == 0.0);
    CHECK(tape.value(tape.sigmoid(x))[0] == 0.5);
}

TEST_CASE("cross entropy") {
    {
        Tape tape;
        const Var l = tape.cross_entropy(tape.constant(Tensor::vector({0, 0, 0, 0})), 2);
        CHECK(tape.scalar(l) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
        CHECK(tape.scalar(l) == doctest::Approx(1.386294).epsilon(1e-6));
    }
    {
        Tape tape;
        const Var l = tape.cross_entropy(tape.constant(Tensor::vector({1000, 0})), 0);
        CHECK(std::isfinite(tape.scalar(l)));
        CHECK(tape.scalar(l) == doctest::Approx(0.0));
        const Var wrong = tape.cross_entropy(tape.constant(Tensor::vector({1000, 0})), 1);
        CHECK(tape.scalar(wrong) == doctest::Approx(1000.0));
    }
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        Tape tape;
        const auto x = oracle::random_vec(rng, 2 + trial % 6, 2.0);
        const std::size_t gold = trial % x.size();
        const double naive = -std::log(oracle::softmax(x)[gold]);
        CHECK(std::abs(tape.scalar(tape.cross_entropy(tape.constant(Tensor::vector(x)), gold)) - naive) <= 1e-12);
    }
    Tape tape;
    CHECK_THROWS_AS(tape.cross_entropy(tape.constant(Tensor::vector({1, 2})), 2), IndexOutOfRange);
}

TEST_CASE("matvec and matmul forward") {
    std::mt19937_64 rng(5);
    Tape tape;
    Tensor W = random_tensor(rng, {3, 4});
    Tensor x = random_tensor(rng, {4});
    const Var y = tape.matvec(tape.leaf(W), tape.leaf(x));
    CHECK(oracle::max_abs_diff(tape.value(y), oracle::matvec(oracle::to_vec(W), 3, 4, oracle::to_vec(x))) <= 1e-12);

    Tensor A = random_tensor(rng, {2, 3});
    Tensor B = random_tensor(rng, {3, 2});
    const Var C = tape.matmul(tape.leaf(A), tape.leaf(B));
    CHECK(tape.shape(C) == Shape{2, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 3; ++k) s += A[i * 3 + k] * B[k * 2 + j];
            CHECK(std::abs(tape.value(C)[i * 2 + j] - s) <= 1e-12);
        }
}

TEST_CASE("shape mismatches are rejected") {
    Tape tape;
    const Var m = tape.constant(Tensor({2, 3}));
    const Var v2 = tape.constant(Tensor({2}));
    const Var v3 = tape.constant(Tensor({3}));
    CHECK_THROWS_AS(tape.matvec(m, v2), ShapeMismatch);
    CHECK_THROWS_AS(tape.matmul(m, m), ShapeMismatch);
    CHECK_THROWS_AS(tape.add(v2, v3), ShapeMismatch);
    CHECK_THROWS_AS(tape.mul(v2, m), ShapeMismatch);
    CHECK_THROWS_AS(tape.slice(v3, 2, 2), ShapeMismatch);
    const Var w2 = tape.constant(Tensor({2}));
    const std::vector<Var> items{v2, v3};
    CHECK_THROWS_AS(tape.weighted_sum(w2, items), ShapeMismatch);
    CHECK_NOTHROW(tape.matvec(m, v3));
}

TEST_CASE("non-finite values are rejected") {
    Tape tape;
    Tensor bad = Tensor::vector({1.0, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(tape.leaf(bad), NonFinite);
    CHECK_THROWS_AS(tape.constant(Tensor::vector({INFINITY})), NonFinite);
    const Var big = tape.constant(Tensor::vector({1e308}));
    CHECK_THROWS_AS(tape.scale(big, 10.0), NonFinite);
    CHECK_THROWS_AS(gradient_check([](Tape& t, Var x) { return t.sum(x); }, bad), NonFinite);
}

TEST_CASE("backward basics") {
    Tensor x({2, 3}, 0.7);
    x.set_requires_grad(true);
    {
        Tape tape;
        tape.backward(tape.sum(tape.leaf(x)));
        for (double g : x.grad()) CHECK(g == 1.0);
    }
    Tensor z = Tensor::vector({0.0});
    z.set_requires_grad(true);
    {
        Tape tape;
        tape.backward(tape.sum(tape.tanh(tape.leaf(z))));
        CHECK(z.grad()[0] == doctest::Approx(1.0));
    }
}

TEST_CASE("gradients from several paths are summed") {
    Tensor x = Tensor::vector({1.5, -2.0});
    x.set_requires_grad(true);
    Tape tape;
    const Var a = tape.leaf(x);
    const Var b = tape.leaf(x);
    CHECK(a.id() == b.id());
    // sum(x*x + 3x) -> 2x + 3
    const Var y = tape.add(tape.mul(a, b), tape.scale(a, 3.0));
    tape.backward(tape.sum(y));
    CHECK(x.grad()[0] == doctest::Approx(6.0));
    CHECK(x.grad()[1] == doctest::Approx(-1.0));
    CHECK(tape.grad(a)[0] == doctest::Approx(6.0));
}

TEST_CASE("gradients accumulate into parameters across tapes until zeroed") {
    Tensor x = Tensor::vector({2.0});
    x.set_requires_grad(true);
    for (int i = 0; i < 2; ++i) {
        Tape tape;
        tape.backward(tape.sum(tape.leaf(x)));
    }
    CHECK(x.grad()[0] == 2.0);
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward errors") {
    Tensor x({3}, 1.0);
    x.set_requires_grad(true);
    Tape tape;
    const Var v = tape.leaf(x);
    CHECK_THROWS_AS(tape.backward(v), NotScalar);
    CHECK_THROWS_AS(tape.backward(Var{}), DetachedTensor);
    Tape other;
    const Var foreign = other.sum(other.leaf(x));
    CHECK_THROWS_AS(tape.backward(foreign), DetachedTensor);

    const Var loss = tape.sum(v);
    tape.backward(loss);
    CHECK(tape.consumed());
    CHECK_THROWS_AS(tape.backward(loss), TapeConsumed);
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("concat then complementary slices reconstructs inputs bit-exactly") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        Tape tape;
        std::vector<Var> parts;
        std::vector<std::vector<double>> raw;
        for (int p = 0; p < 1 + trial % 4; ++p) {
            raw.push_back(oracle::random_vec(rng, 1 + (trial + p) % 5));
            parts.push_back(tape.constant(Tensor::vector(raw.back())));
        }
        const Var joined = tape.concat(parts);
        std::size_t offset = 0;
        for (const auto& r : raw) {
            const Var piece = tape.slice(joined, offset, r.size());
            CHECK(values_of(tape, piece) == r);
            offset += r.size();
        }
    }
}

TEST_CASE("gradient_check on simple functions") {
    const double quad = gradient_check([](Tape& t, Var x) { return t.sum(t.mul(x, x)); }, Tensor::vector({3.0}));
    CHECK(quad < 1e-7);
    CHECK(relative_error(6.0, 6.0) == 0.0);
    CHECK(relative_error(0.0, 1e-9) == doctest::Approx(0.1));
    // A deliberately wrong "gradient" is detected: an op with a broken rule
    // would look like this comparison.
    CHECK(relative_error(6.0, 5.0) > 1e-4);
}

TEST_CASE("per-op finite-difference checks on 100 random small instances") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = dim(rng), n = dim(rng), k = dim(rng);
        Tensor W = random_tensor(rng, {m, n});
        Tensor B = random_tensor(rng, {n, k});
        Tensor other = random_tensor(rng, {n});
        Tensor weights = random_tensor(rng, {3});
        Tensor mix = random_tensor(rng, {m});
        const std::size_t gold = trial % m;
        const auto check = [&](const PointFunction& f, Shape shape) {
            worst = std::max(worst, gradient_check(f, random_tensor(rng, std::move(shape))));
        };
        // Each function ends in a random linear read-out so the upstream
        // gradient is not all ones.
        auto readout = [&](Tape& t, Var y) {
            Tensor r({shape_size(t.shape(y))});
            std::mt19937_64 local(trial);
            for (double& v : r.values()) v = std::normal_distribution<double>(0, 1)(local);
            const Var flat = t.shape(y).size() == 2 ? t.slice(y, 0, shape_size(t.shape(y))) : y;
            return t.sum(t.mul(t.constant(std::move(r)), flat));
        };
        check([&](Tape& t, Var x) { return readout(t, t.matvec(t.leaf(W), x)); }, {n});
        check([&](Tape& t, Var x) { return readout(t, t.matvec(x, t.leaf(other))); }, {m, n});
        check([&](Tape& t, Var x) { return readout(t, t.slice(t.matmul(x, t.leaf(B)), 0, m * k)); }, {m, n});
        check([&](Tape& t, Var x) { return readout(t, t.slice(t.matmul(t.leaf(W), x), 0, m * k)); }, {n, k});
        check([&](Tape& t, Var x) { return readout(t, t.add(x, t.leaf(other))); }, {n});
        check([&](Tape& t, Var x) { return readout(t, t.mul(x, t.leaf(other))); }, {n});
        check([&](Tape& t, Var x) { return readout(t, t.mul(x, x)); }, {n});
        check([&](Tape& t, Var x) { return readout(t, t.tanh(x)); }, {n});
        check([&](Tape& t, Var x) { return readout(t, t.sigmoid(x)); }, {n});
        check([&](Tape& t, Var x) { return readout(t, t.scale(x, -1.7)); }, {n});
        check(
            [&](Tape& t, Var x) {
                const std::vector<Var> parts{x, t.leaf(other), x};
                return readout(t, t.concat(parts));
            },
            {m});
        check([&](Tape& t, Var x) { return readout(t, t.slice(x, n / 2, n - n / 2)); }, {n});
        check([&](Tape& t, Var x) { return readout(t, t.softmax(x)); }, {n});
        check([&](Tape& t, Var x) { return readout(t, t.slice(t.softmax(x), 0, m * n)); }, {m, n});
        check(
            [&](Tape& t, Var x) {
                const std::vector<Var> items{x, t.tanh(x), t.leaf(other)};
                return readout(t, t.weighted_sum(t.softmax(t.leaf(weights)), items));
            },
            {n});
        const Tensor a = Tensor::vector(oracle::random_vec(rng, n));
        const Tensor b = Tensor::vector(oracle::random_vec(rng, n));
        check(
            [&](Tape& t, Var x) {
                const std::vector<Var> items{t.constant(a), t.leaf(other), t.constant(b)};
                return readout(t, t.weighted_sum(x, items));
            },
            {3});
        check([&](Tape& t, Var x) { return t.cross_entropy(t.add(x, t.leaf(mix)), gold); }, {m});
        check([&](Tape& t, Var x) { return t.sum(t.mul(t.sum(x), t.sum(t.tanh(x)))); }, {m, n});
    }
    CHECK(worst < 1e-4);
}
