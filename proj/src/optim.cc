#include "hstgnn/optim.h"

#include <cmath>
#include <stdexcept>

namespace diff {

    void adam_step(param_store& store, adam_state& opt)
    {
        for (auto const& [name, e] : store.entries) {
            for (std::size_t i = 0; i < e.grad.size(); ++i) {
                if (!std::isfinite(e.grad.data()[i])) {
                    throw std::runtime_error("adam_step: non-finite gradient in " + name);
                }
            }
        }

        opt.t += 1;
        double bc1 = 1.0 - std::pow(opt.beta1, double(opt.t));
        double bc2 = 1.0 - std::pow(opt.beta2, double(opt.t));

        for (auto& [name, e] : store.entries) {
            auto it = opt.moments.find(name);
            if (it == opt.moments.end()) {
                it = opt.moments.emplace(name,
                    std::make_pair(la::matrix(e.value.rows(), e.value.cols()),
                        la::matrix(e.value.rows(), e.value.cols()))).first;
            }
            la::matrix& m = it->second.first;
            la::matrix& v = it->second.second;
            for (std::size_t i = 0; i < e.value.size(); ++i) {
                double g = e.grad.data()[i];
                double mi = opt.beta1 * m.data()[i] + (1.0 - opt.beta1) * g;
                double vi = opt.beta2 * v.data()[i] + (1.0 - opt.beta2) * g * g;
                m.data()[i] = mi;
                v.data()[i] = vi;
                double mhat = mi / bc1;
                double vhat = vi / bc2;
                e.value.data()[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.epsilon);
            }
            e.grad.fill(0.0);
        }
    }

}
