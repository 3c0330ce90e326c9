#ifndef HSTGNN_RNG_H
#define HSTGNN_RNG_H

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace rng {

    // Deterministic generator. Draws go through our own mappings rather than
    // std distributions so that streams are identical across standard
    // libraries.
    struct generator {
        explicit generator(std::uint64_t seed) : gen(seed) {}

        std::uint64_t bits() { return gen(); }

        // in [0, 1)
        double uniform()
        {
            return (gen() >> 11) * 0x1.0p-53;
        }

        double uniform(double lo, double hi)
        {
            return lo + (hi - lo) * uniform();
        }

        // Box-Muller, one value per call; the pair partner is discarded to
        // keep the stream position independent of call parity.
        double normal()
        {
            double u1 = uniform();
            double u2 = uniform();
            while (u1 <= 0.0) {
                u1 = uniform();
            }
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        }

        // integer in [0, n)
        std::uint64_t below(std::uint64_t n)
        {
            return gen() % n;
        }

    private:
        std::mt19937_64 gen;
    };

    // FNV-1a, used to derive independent per-name streams from one seed.
    inline std::uint64_t hash_name(std::string const& name)
    {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : name) {
            h = (h ^ c) * 1099511628211ull;
        }
        return h;
    }

    inline std::uint64_t derive(std::uint64_t seed, std::string const& name)
    {
        std::uint64_t h = hash_name(name);
        // splitmix64 finalizer over seed ^ h
        std::uint64_t z = seed ^ h;
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

}

#endif
