#ifndef HSTGNN_GRADCHECK_H
#define HSTGNN_GRADCHECK_H

#include "hstgnn/diff.h"

#include <functional>
#include <string>

namespace diff {

    struct grad_check_options {
        double eps = 1e-5;
        // parameters with more coordinates than this get a seeded random
        // subsample of subsample_count coordinates
        std::size_t subsample_threshold = 200;
        std::size_t subsample_count = 200;
        std::uint64_t seed = 0;
    };

    struct grad_check_result {
        bool ok = true;            // false when a perturbed loss was non-finite
        std::string message;
        double max_rel_error = 0.0;
        std::string worst_param;
        std::size_t worst_coord = 0;
        double worst_analytic = 0.0;
        double worst_numeric = 0.0;
        std::size_t coords_checked = 0;
    };

    // Compares the analytic gradient of build's scalar output against
    // central finite differences, coordinate by coordinate. The builder is
    // re-invoked on a fresh tape for every evaluation and must read
    // parameters from the store.
    grad_check_result grad_check(std::function<var(tape&)> const& build,
        param_store& store, grad_check_options const& opts = {});

}

#endif
