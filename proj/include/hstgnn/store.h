#ifndef HSTGNN_STORE_H
#define HSTGNN_STORE_H

#include "hstgnn/mat.h"

#include <cstdint>
#include <map>
#include <string>

namespace diff {

    struct init_spec {
        enum class kind { zeros, xavier_uniform, uniform };

        kind k = kind::zeros;
        double lo = 0.0;
        double hi = 0.0;
        std::uint64_t seed = 0;

        static init_spec zeros() { return {}; }

        // uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)), fan_in = rows,
        // fan_out = cols of the registered shape
        static init_spec xavier(std::uint64_t seed)
        {
            init_spec s;
            s.k = kind::xavier_uniform;
            s.seed = seed;
            return s;
        }

        static init_spec uniform(double lo, double hi, std::uint64_t seed)
        {
            init_spec s;
            s.k = kind::uniform;
            s.lo = lo;
            s.hi = hi;
            s.seed = seed;
            return s;
        }
    };

    struct param_entry {
        la::matrix value;
        la::matrix grad;
    };

    // Named trainable parameters with gradient accumulators. Iteration over
    // entries is lexicographic by name (std::map), so every walk of the
    // store is deterministic.
    struct param_store {
        std::map<std::string, param_entry> entries;

        void register_param(std::string const& name, std::size_t rows, std::size_t cols,
            init_spec const& init);

        bool exists(std::string const& name) const;
        param_entry& at(std::string const& name);
        param_entry const& at(std::string const& name) const;

        void zero_grads();
        std::size_t total_coords() const;
    };

    // Binary checkpoint: header (magic, version, seed, count) then one
    // record per parameter (name, rows, cols, row-major doubles).
    // Round-trips are value-exact.
    void save_checkpoint(param_store const& store, std::string const& path, std::uint64_t seed);
    param_store load_checkpoint(std::string const& path, std::uint64_t* seed_out = nullptr);

}

#endif
