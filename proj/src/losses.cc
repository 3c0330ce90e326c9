#include "hstgnn/losses.h"

#include <cmath>
#include <stdexcept>

namespace losses {

    namespace {

        std::vector<int> extended_target(std::vector<int> const& targets, int blank)
        {
            std::vector<int> ext;
            ext.reserve(2 * targets.size() + 1);
            ext.push_back(blank);
            for (int g : targets) {
                ext.push_back(g);
                ext.push_back(blank);
            }
            return ext;
        }

        std::size_t min_frames(std::vector<int> const& targets)
        {
            std::size_t need = targets.size();
            for (std::size_t i = 1; i < targets.size(); ++i) {
                if (targets[i] == targets[i - 1]) {
                    need += 1;  // a blank must separate the repeat
                }
            }
            return need;
        }

    }

    ctc_result ctc_loss(diff::tape& t, diff::var log_probs, std::vector<int> const& targets,
        int blank)
    {
        la::check_shape(log_probs.t == &t, "ctc_loss: log_probs from a different tape");
        std::size_t frames = log_probs.rows();
        std::size_t labels = log_probs.cols();
        if (frames == 0) {
            throw std::invalid_argument("ctc_loss: no frames");
        }
        for (int g : targets) {
            if (g < 0 || std::size_t(g) >= labels || g == blank) {
                throw std::invalid_argument("ctc_loss: target label "
                    + std::to_string(g) + " out of vocabulary");
            }
        }

        ctc_result res;
        if (frames < min_frames(targets)) {
            res.feasible = false;
            return res;
        }

        std::vector<int> ext = extended_target(targets, blank);
        std::size_t s_count = ext.size();

        auto cell_reachable = [&](std::size_t frame, std::size_t s) {
            // forward: at most two ext positions advance per frame;
            // backward: the remaining frames must be able to finish
            if (s > 2 * frame + 1) {
                return false;
            }
            std::size_t remaining = frames - 1 - frame;
            std::size_t needed = (s_count - 1) - s;  // to reach the final blank
            return needed <= 2 * remaining + 1;
        };

        std::vector<diff::var> prev(s_count), cur(s_count);
        for (std::size_t frame = 0; frame < frames; ++frame) {
            for (std::size_t s = 0; s < s_count; ++s) {
                cur[s] = diff::var{};
                if (!cell_reachable(frame, s)) {
                    continue;
                }
                diff::var emit = diff::entry(log_probs, frame, std::size_t(ext[s]));
                if (frame == 0) {
                    if (s <= 1) {
                        cur[s] = emit;
                    }
                    continue;
                }
                diff::var acc;
                if (prev[s].valid()) {
                    acc = prev[s];
                }
                if (s >= 1 && prev[s - 1].valid()) {
                    acc = acc.valid() ? diff::logaddexp(acc, prev[s - 1]) : prev[s - 1];
                }
                if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]
                    && prev[s - 2].valid()) {
                    acc = acc.valid() ? diff::logaddexp(acc, prev[s - 2]) : prev[s - 2];
                }
                if (acc.valid()) {
                    cur[s] = diff::add(acc, emit);
                }
            }
            std::swap(prev, cur);
        }

        diff::var total;
        if (prev[s_count - 1].valid()) {
            total = prev[s_count - 1];
        }
        if (s_count >= 2 && prev[s_count - 2].valid()) {
            total = total.valid() ? diff::logaddexp(total, prev[s_count - 2])
                                  : prev[s_count - 2];
        }
        if (!total.valid()) {
            res.feasible = false;
            return res;
        }
        res.log_prob = total.scalar();
        res.loss = diff::scale(total, -1.0);
        return res;
    }

    double ctc_brute_force(la::matrix const& probs, std::vector<int> const& targets,
        int blank)
    {
        std::size_t frames = probs.rows();
        std::size_t labels = probs.cols();
        if (frames == 0) {
            throw std::invalid_argument("ctc_brute_force: no frames");
        }
        double paths = std::pow(double(labels), double(frames));
        if (paths > 1e7) {
            throw std::invalid_argument("ctc_brute_force: instance too large ("
                + std::to_string(labels) + "^" + std::to_string(frames) + " paths)");
        }

        std::vector<int> path(frames, 0);
        double total = 0.0;
        while (true) {
            // collapse: merge consecutive repeats, then drop blanks
            std::vector<int> collapsed;
            int prev = -1;
            for (int z : path) {
                if (z != prev && z != blank) {
                    collapsed.push_back(z);
                }
                prev = z;
            }
            if (collapsed == targets) {
                double p = 1.0;
                for (std::size_t f = 0; f < frames; ++f) {
                    p *= probs(f, std::size_t(path[f]));
                }
                total += p;
            }
            // next path, odometer order
            std::size_t pos = 0;
            while (pos < frames) {
                path[pos] += 1;
                if (std::size_t(path[pos]) < labels) {
                    break;
                }
                path[pos] = 0;
                pos += 1;
            }
            if (pos == frames) {
                break;
            }
        }
        return total;
    }

    diff::var cross_entropy(diff::tape& t, std::vector<diff::var> const& log_dists,
        std::vector<int> const& targets)
    {
        if (log_dists.size() != targets.size()) {
            throw std::invalid_argument("cross_entropy: " + std::to_string(log_dists.size())
                + " distributions vs " + std::to_string(targets.size()) + " targets");
        }
        diff::var acc;
        for (std::size_t l = 0; l < targets.size(); ++l) {
            la::check_shape(targets[l] >= 0 && std::size_t(targets[l]) < log_dists[l].cols(),
                "cross_entropy: target out of range");
            diff::var term = diff::entry(log_dists[l], 0, std::size_t(targets[l]));
            acc = acc.valid() ? diff::add(acc, term) : term;
        }
        if (!acc.valid()) {
            return t.constant(0.0);
        }
        return diff::scale(acc, -1.0);
    }

    diff::var l2_penalty(diff::tape& t, diff::param_store& store)
    {
        diff::var acc;
        for (auto const& [name, e] : store.entries) {
            diff::var term = diff::sum_squares(t.param(store, name));
            acc = acc.valid() ? diff::add(acc, term) : term;
        }
        if (!acc.valid()) {
            return t.constant(0.0);
        }
        return acc;
    }

    diff::var total_loss(diff::tape& t, diff::param_store& store, diff::var l_ctc,
        diff::var l_ce, loss_weights const& w)
    {
        la::check_shape(l_ctc.valid() && l_ce.valid(), "total_loss: missing loss term");
        diff::var total = diff::add(diff::scale(l_ctc, w.lambda_ctc),
            diff::scale(l_ce, w.lambda_ce));
        if (w.lambda_r != 0.0) {
            total = diff::add(total, diff::scale(l2_penalty(t, store), w.lambda_r));
        }
        return total;
    }

}
