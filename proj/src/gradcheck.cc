#include "hstgnn/gradcheck.h"
#include "hstgnn/rng.h"

#include <algorithm>
#include <cmath>

namespace diff {

    namespace {

        double eval_loss(std::function<var(tape&)> const& build)
        {
            tape t;
            var loss = build(t);
            return loss.scalar();
        }

        std::vector<std::size_t> pick_coords(std::size_t total,
            grad_check_options const& opts, std::string const& name)
        {
            std::vector<std::size_t> coords;
            if (total <= opts.subsample_threshold) {
                coords.resize(total);
                for (std::size_t i = 0; i < total; ++i) {
                    coords[i] = i;
                }
                return coords;
            }
            rng::generator gen(rng::derive(opts.seed, "gradcheck." + name));
            std::vector<std::uint8_t> taken(total, 0);
            while (coords.size() < opts.subsample_count) {
                std::size_t i = std::size_t(gen.below(total));
                if (!taken[i]) {
                    taken[i] = 1;
                    coords.push_back(i);
                }
            }
            std::sort(coords.begin(), coords.end());
            return coords;
        }

    }

    grad_check_result grad_check(std::function<var(tape&)> const& build,
        param_store& store, grad_check_options const& opts)
    {
        grad_check_result res;

        store.zero_grads();
        {
            tape t;
            var loss = build(t);
            t.backward(loss);
        }
        std::map<std::string, la::matrix> analytic;
        for (auto const& [name, e] : store.entries) {
            analytic.emplace(name, e.grad);
        }
        store.zero_grads();

        for (auto& [name, e] : store.entries) {
            auto coords = pick_coords(e.value.size(), opts, name);
            for (std::size_t c : coords) {
                double saved = e.value.data()[c];
                e.value.data()[c] = saved + opts.eps;
                double lp = eval_loss(build);
                e.value.data()[c] = saved - opts.eps;
                double lm = eval_loss(build);
                e.value.data()[c] = saved;
                if (!std::isfinite(lp) || !std::isfinite(lm)) {
                    res.ok = false;
                    res.message = "non-finite loss at perturbed point: " + name
                        + "[" + std::to_string(c) + "]";
                    return res;
                }
                double numeric = (lp - lm) / (2.0 * opts.eps);
                double a = analytic.at(name).data()[c];
                double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
                double rel = std::fabs(a - numeric) / denom;
                res.coords_checked += 1;
                if (rel > res.max_rel_error) {
                    res.max_rel_error = rel;
                    res.worst_param = name;
                    res.worst_coord = c;
                    res.worst_analytic = a;
                    res.worst_numeric = numeric;
                }
            }
        }
        return res;
    }

}
