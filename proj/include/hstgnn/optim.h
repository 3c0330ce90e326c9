#ifndef HSTGNN_OPTIM_H
#define HSTGNN_OPTIM_H

#include "hstgnn/store.h"

#include <cstdint>
#include <map>

namespace diff {

    struct adam_state {
        double lr = 0.001;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        std::int64_t t = 0;
        // first/second moment per parameter, same shapes as the values
        std::map<std::string, std::pair<la::matrix, la::matrix>> moments;
    };

    // Bias-corrected Adam update over every parameter in the store, then
    // zeroes the gradients and increments t. A non-finite gradient aborts
    // the step before any parameter is touched.
    void adam_step(param_store& store, adam_state& opt);

}

#endif
