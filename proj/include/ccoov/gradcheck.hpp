#pragma once

// Central finite-difference gradient checking.
//
// Relative error per coordinate is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// Non-differentiable points (|x| at 0, ReLU kinks) are not meaningful inputs.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccoov/autodiff.hpp"

namespace ccoov::ad {

double relative_error(double analytic, double numeric);

// f maps a point (registered as a leaf on a fresh tape) to a scalar.
using PointFunction = std::function<Var(Tape&, Var)>;

// Max relative error between backward() and central differences of f at point.
double gradient_check(const PointFunction& f, const Tensor& point, double h = 1e-5);

struct GroupCheck {
    std::string name;
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
};

struct ParamCheckOptions {
    double h = 1e-5;
    // When set, checks a seeded random subset of at most this many coordinates per tensor.
    std::optional<std::size_t> max_coordinates;
    std::uint64_t seed = 0;
};

// `loss` builds a scalar on the given tape, reading `params` through Tape::leaf.
// Each named tensor must have requires_grad set. Existing gradients are zeroed.
std::vector<GroupCheck> gradient_check_params(const std::function<Var(Tape&)>& loss,
                                              std::span<const std::pair<std::string, Tensor*>> params,
                                              const ParamCheckOptions& options = {});

// Same, but the central differences are taken on `reference`, an independent
// evaluation of the same loss that reads the current parameter values. With
// a long double reference the differences are not swamped by float64
// rounding of the loss (about 1e-16 * |loss| / h), which otherwise dominates
// for coordinates whose gradient is below roughly 1e-6.
using ReferenceLoss = std::function<long double()>;
std::vector<GroupCheck> gradient_check_params(const std::function<Var(Tape&)>& loss,
                                              std::span<const std::pair<std::string, Tensor*>> params,
                                              const ParamCheckOptions& options, const ReferenceLoss& reference);

}  // namespace ccoov::ad
