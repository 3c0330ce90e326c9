#include "hstgnn/store.h"
#include "hstgnn/rng.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace diff {

    void param_store::register_param(std::string const& name, std::size_t rows,
        std::size_t cols, init_spec const& init)
    {
        if (rows == 0 || cols == 0) {
            throw std::invalid_argument("register_param: shape must be positive for " + name);
        }
        if (entries.count(name)) {
            throw std::invalid_argument("register_param: duplicate name " + name);
        }
        param_entry e;
        e.value = la::matrix(rows, cols);
        e.grad = la::matrix(rows, cols);
        switch (init.k) {
        case init_spec::kind::zeros:
            break;
        case init_spec::kind::xavier_uniform: {
            double a = std::sqrt(6.0 / double(rows + cols));
            rng::generator gen(init.seed);
            for (std::size_t i = 0; i < e.value.size(); ++i) {
                e.value.data()[i] = gen.uniform(-a, a);
            }
            break;
        }
        case init_spec::kind::uniform: {
            rng::generator gen(init.seed);
            for (std::size_t i = 0; i < e.value.size(); ++i) {
                e.value.data()[i] = gen.uniform(init.lo, init.hi);
            }
            break;
        }
        }
        entries.emplace(name, std::move(e));
    }

    bool param_store::exists(std::string const& name) const
    {
        return entries.count(name) != 0;
    }

    param_entry& param_store::at(std::string const& name)
    {
        auto it = entries.find(name);
        if (it == entries.end()) {
            throw std::out_of_range("param_store: no parameter named " + name);
        }
        return it->second;
    }

    param_entry const& param_store::at(std::string const& name) const
    {
        auto it = entries.find(name);
        if (it == entries.end()) {
            throw std::out_of_range("param_store: no parameter named " + name);
        }
        return it->second;
    }

    void param_store::zero_grads()
    {
        for (auto& [name, e] : entries) {
            e.grad.fill(0.0);
        }
    }

    std::size_t param_store::total_coords() const
    {
        std::size_t n = 0;
        for (auto const& [name, e] : entries) {
            n += e.value.size();
        }
        return n;
    }

    namespace {

        constexpr char const* magic = "HSTG";
        constexpr std::uint32_t format_version = 1;

        template <typename T>
        void write_pod(std::ostream& os, T v)
        {
            os.write(reinterpret_cast<char const*>(&v), sizeof(T));
        }

        template <typename T>
        T read_pod(std::istream& is)
        {
            T v;
            is.read(reinterpret_cast<char*>(&v), sizeof(T));
            if (!is) {
                throw std::runtime_error("checkpoint: truncated file");
            }
            return v;
        }

    }

    void save_checkpoint(param_store const& store, std::string const& path, std::uint64_t seed)
    {
        std::ofstream os(path, std::ios::binary);
        if (!os) {
            throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
        }
        os.write(magic, 4);
        write_pod(os, format_version);
        write_pod(os, seed);
        write_pod(os, std::uint64_t(store.entries.size()));
        for (auto const& [name, e] : store.entries) {
            write_pod(os, std::uint64_t(name.size()));
            os.write(name.data(), std::streamsize(name.size()));
            write_pod(os, std::uint64_t(e.value.rows()));
            write_pod(os, std::uint64_t(e.value.cols()));
            os.write(reinterpret_cast<char const*>(e.value.data()),
                std::streamsize(e.value.size() * sizeof(double)));
        }
        if (!os) {
            throw std::runtime_error("checkpoint: write failed for " + path);
        }
    }

    param_store load_checkpoint(std::string const& path, std::uint64_t* seed_out)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is) {
            throw std::runtime_error("checkpoint: cannot open " + path);
        }
        char m[4];
        is.read(m, 4);
        if (!is || std::memcmp(m, magic, 4) != 0) {
            throw std::runtime_error("checkpoint: bad magic in " + path);
        }
        auto version = read_pod<std::uint32_t>(is);
        if (version != format_version) {
            throw std::runtime_error("checkpoint: unsupported version "
                + std::to_string(version) + " in " + path);
        }
        auto seed = read_pod<std::uint64_t>(is);
        if (seed_out) {
            *seed_out = seed;
        }
        auto count = read_pod<std::uint64_t>(is);
        param_store store;
        for (std::uint64_t p = 0; p < count; ++p) {
            auto name_len = read_pod<std::uint64_t>(is);
            std::string name(name_len, '\0');
            is.read(name.data(), std::streamsize(name_len));
            auto rows = read_pod<std::uint64_t>(is);
            auto cols = read_pod<std::uint64_t>(is);
            param_entry e;
            e.value = la::matrix(rows, cols);
            e.grad = la::matrix(rows, cols);
            is.read(reinterpret_cast<char*>(e.value.data()),
                std::streamsize(e.value.size() * sizeof(double)));
            if (!is) {
                throw std::runtime_error("checkpoint: truncated record for " + name);
            }
            store.entries.emplace(std::move(name), std::move(e));
        }
        return store;
    }

}
