#ifndef HSTGNN_LOSSES_H
#define HSTGNN_LOSSES_H

#include "hstgnn/diff.h"

#include <vector>

namespace losses {

    struct loss_weights {
        double lambda_ctc = 0.5;
        double lambda_ce = 0.5;
        double lambda_r = 1e-4;
    };

    struct ctc_result {
        diff::var loss;          // -log p_ctc; invalid when infeasible
        bool feasible = true;
        double log_prob = 0.0;   // log p_ctc when feasible
    };

    // Forward dynamic program over the blank-interleaved target, in log
    // space. log_probs is T x (|G|+1) with the blank as the last column;
    // targets holds content label indices. Targets requiring more frames
    // than available (a blank is needed between repeated labels) are
    // reported infeasible rather than scored.
    ctc_result ctc_loss(diff::tape& t, diff::var log_probs, std::vector<int> const& targets,
        int blank);

    // Literal path sum: enumerates every length-T label sequence whose
    // collapse (merge repeats, then drop blanks) equals the target and adds
    // up the per-frame probability products. Guarded to (|G|+1)^T <= 1e7.
    double ctc_brute_force(la::matrix const& probs, std::vector<int> const& targets,
        int blank);

    // Sum over positions of -log p(target_l); one distribution per target
    // position, the stop position included.
    diff::var cross_entropy(diff::tape& t, std::vector<diff::var> const& log_dists,
        std::vector<int> const& targets);

    // Squared L2 over every parameter in the store.
    diff::var l2_penalty(diff::tape& t, diff::param_store& store);

    // lambda_ctc * L_ctc + lambda_ce * L_ce + lambda_r * ||theta||^2
    diff::var total_loss(diff::tape& t, diff::param_store& store, diff::var l_ctc,
        diff::var l_ce, loss_weights const& w);

}

#endif
