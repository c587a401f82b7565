#include "ecgbeatnet/nn.hpp"

namespace ecg::nn {

double grad_check(const std::function<double()> &loss_fn, std::span<double *const> coords,
                  std::span<const double> analytic, rng::Generator &gen, int max_coords,
                  double epsilon) {
    if (coords.size() != analytic.size()) {
        throw ShapeMismatch("grad_check: coordinate and gradient counts differ");
    }
    const size_t total = coords.size();
    std::vector<size_t> picks;
    if (total <= static_cast<size_t>(max_coords)) {
        picks.resize(total);
        std::iota(picks.begin(), picks.end(), size_t{0});
    } else {
        // Partial Fisher-Yates: the first max_coords entries form a uniform
        // sample without replacement.
        std::vector<size_t> all(total);
        std::iota(all.begin(), all.end(), size_t{0});
        for (int i = 0; i < max_coords; ++i) {
            const size_t j = i + static_cast<size_t>(gen.next_below(total - i));
            std::swap(all[static_cast<size_t>(i)], all[j]);
        }
        picks.assign(all.begin(), all.begin() + max_coords);
    }

    double max_rel_error = 0.0;
    for (size_t idx : picks) {
        double *coord = coords[idx];
        const double saved = *coord;
        *coord = saved + epsilon;
        const double loss_plus = loss_fn();
        *coord = saved - epsilon;
        const double loss_minus = loss_fn();
        *coord = saved;

        const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        const double a = analytic[idx];
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_rel_error = std::max(max_rel_error, rel);
    }
    return max_rel_error;
}

} // namespace ecg::nn
