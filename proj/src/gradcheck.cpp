#include "ccoov/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ccoov::ad {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double gradient_check(const PointFunction& f, const Tensor& point, double h) {
    if (!point.all_finite()) throw NonFinite("gradient_check point");
    Tensor x = point;
    x.set_requires_grad(true);

    std::vector<double> analytic;
    {
        Tape tape;
        Var out = f(tape, tape.leaf(x));
        tape.backward(out);
        analytic.assign(x.grad().begin(), x.grad().end());
    }
    auto eval = [&](Tensor& at) {
        Tape tape;
        return tape.scalar(f(tape, tape.leaf(at)));
    };

    double worst = 0.0;
    Tensor probe = point;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const long double up = eval(probe);
        probe[i] = orig - h;
        const long double down = eval(probe);
        probe[i] = orig;
        const long double step = static_cast<long double>(orig + h) - (orig - h);
        worst = std::max(worst, relative_error(analytic[i], static_cast<double>((up - down) / step)));
    }
    return worst;
}

std::vector<GroupCheck> gradient_check_params(const std::function<Var(Tape&)>& loss,
                                              std::span<const std::pair<std::string, Tensor*>> params,
                                              const ParamCheckOptions& options) {
    return gradient_check_params(loss, params, options, ReferenceLoss{});
}

std::vector<GroupCheck> gradient_check_params(const std::function<Var(Tape&)>& loss,
                                              std::span<const std::pair<std::string, Tensor*>> params,
                                              const ParamCheckOptions& options, const ReferenceLoss& reference) {
    for (const auto& [name, t] : params) {
        if (!t->requires_grad()) throw Error("gradient_check_params: " + name + " does not require grad");
        t->zero_grad();
    }
    {
        Tape tape;
        tape.backward(loss(tape));
    }
    auto eval = [&]() -> long double {
        if (reference) return reference();
        Tape tape;
        return tape.scalar(loss(tape));
    };

    std::mt19937_64 rng(options.seed);
    std::vector<GroupCheck> report;
    for (const auto& [name, t] : params) {
        std::vector<std::size_t> coords(t->size());
        std::iota(coords.begin(), coords.end(), 0);
        if (options.max_coordinates && coords.size() > *options.max_coordinates) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(*options.max_coordinates);
        }
        GroupCheck check{name, 0.0, coords.size()};
        for (std::size_t i : coords) {
            const double orig = (*t)[i];
            (*t)[i] = orig + options.h;
            const long double up = eval();
            (*t)[i] = orig - options.h;
            const long double down = eval();
            (*t)[i] = orig;
            // The perturbed coordinate is rounded to double, so divide by the
            // step actually taken.
            const long double step = static_cast<long double>(orig + options.h) - (orig - options.h);
            const double numeric = static_cast<double>((up - down) / step);
            check.max_relative_error = std::max(check.max_relative_error, relative_error(t->grad()[i], numeric));
        }
        report.push_back(check);
    }
    return report;
}

}  // namespace ccoov::ad
