#include "hstgnn/graphs.h"
#include "hstgnn/rng.h"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace graphs {

    nonlinearity nonlinearity_from_name(std::string const& name)
    {
        if (name == "sigmoid") {
            return nonlinearity::sigmoid;
        }
        if (name == "relu") {
            return nonlinearity::relu;
        }
        throw std::invalid_argument("unknown adjacency nonlinearity '" + name + "'");
    }

    char const* nonlinearity_name(nonlinearity nl)
    {
        return nl == nonlinearity::sigmoid ? "sigmoid" : "relu";
    }

    adjacency_learner make_learner(diff::param_store& store, std::string const& prefix,
        std::size_t dim, std::size_t rank, nonlinearity sigma, std::uint64_t seed)
    {
        if (dim < 2) {
            throw std::invalid_argument("adjacency learner needs dim >= 2, got "
                + std::to_string(dim));
        }
        adjacency_learner l;
        l.dim = dim;
        l.rank = std::min(rank, dim - 1);
        l.sigma = sigma;
        l.m1 = prefix + ".m1";
        l.m2 = prefix + ".m2";
        store.register_param(l.m1, dim, l.rank,
            diff::init_spec::xavier(rng::derive(seed, l.m1)));
        store.register_param(l.m2, dim, l.rank,
            diff::init_spec::xavier(rng::derive(seed, l.m2)));
        return l;
    }

    st_graph graph_vars::values() const
    {
        st_graph g;
        g.v = v.value();
        g.a = a.value();
        g.tags = tags;
        g.degenerate = degenerate;
        return g;
    }

    namespace {

        std::size_t half_width(std::size_t span)
        {
            if (span % 2 == 0 || span == 0) {
                throw std::invalid_argument("window span must be odd and positive, got "
                    + std::to_string(span));
            }
            return (span - 1) / 2;
        }

        std::size_t clamp_frame(long long idx, std::size_t t_count)
        {
            if (idx < 0) {
                return 0;
            }
            if (idx >= (long long)t_count) {
                return t_count - 1;
            }
            return std::size_t(idx);
        }

    }

    la::matrix window_vertices(dataio::sample_record const& sample, std::size_t t,
        std::size_t span, modality m, std::vector<vertex_tag>* tags)
    {
        std::size_t w = half_width(span);
        if (sample.frames.empty()) {
            throw std::invalid_argument("window_vertices: sample has no frames");
        }
        std::size_t d = m == modality::appearance ? sample.d_a() : sample.d_o();
        la::matrix v(dataio::n_regions * span, d);
        if (tags) {
            tags->clear();
        }
        std::size_t row = 0;
        for (long long off = -(long long)w; off <= (long long)w; ++off) {
            std::size_t src = clamp_frame((long long)t + off, sample.frames.size());
            la::matrix const& feat = m == modality::appearance
                ? sample.frames[src].appearance : sample.frames[src].flow;
            for (std::size_t r = 0; r < dataio::n_regions; ++r, ++row) {
                std::copy(feat.row(r), feat.row(r) + d, v.row(row));
                if (tags) {
                    tags->push_back({int(off), int(r)});
                }
            }
        }
        return v;
    }

    la::matrix window_keypoints(dataio::sample_record const& sample, std::size_t t,
        std::size_t span, region r, std::vector<vertex_tag>* tags)
    {
        std::size_t w = half_width(span);
        if (sample.frames.empty()) {
            throw std::invalid_argument("window_keypoints: sample has no frames");
        }
        std::size_t ri = std::size_t(r);
        std::size_t pts = r == region::face ? dataio::face_points : dataio::hand_points;
        la::matrix v(pts * span, 2);
        if (tags) {
            tags->clear();
        }
        std::size_t row = 0;
        for (long long off = -(long long)w; off <= (long long)w; ++off) {
            std::size_t src = clamp_frame((long long)t + off, sample.frames.size());
            la::matrix const& kp = sample.frames[src].keypoints(ri);
            for (std::size_t p = 0; p < pts; ++p, ++row) {
                v(row, 0) = kp(p, 0);
                v(row, 1) = kp(p, 1);
                if (tags) {
                    tags->push_back({int(off), int(p)});
                }
            }
        }
        return v;
    }

    diff::var raw_adjacency(diff::tape& t, diff::param_store& store, diff::var v,
        adjacency_learner const& learner)
    {
        la::check_shape(v.cols() == learner.dim,
            "raw_adjacency: vertex dim " + std::to_string(v.cols())
            + " vs learner dim " + std::to_string(learner.dim));
        diff::var m1 = t.param(store, learner.m1);
        diff::var m2 = t.param(store, learner.m2);
        diff::var scores = diff::matmul_nt(diff::matmul(v, m1), diff::matmul(v, m2));
        switch (learner.sigma) {
        case nonlinearity::sigmoid:
            return diff::sigmoid(scores);
        case nonlinearity::relu:
            return diff::relu(scores);
        }
        throw std::logic_error("unreachable");
    }

    diff::var learned_adjacency(diff::tape& t, diff::param_store& store, diff::var v,
        adjacency_learner const& learner, bool* degenerate)
    {
        diff::var a = normalize(symmetrize(raw_adjacency(t, store, v, learner)));
        if (degenerate) {
            *degenerate = t.degenerate(a);
        }
        return a;
    }

    graph_vars build_high_level(diff::tape& t, diff::param_store& store,
        dataio::sample_record const& sample, std::size_t frame, std::size_t span,
        modality m, adjacency_learner const& learner)
    {
        graph_vars g;
        la::matrix v = window_vertices(sample, frame, span, m, &g.tags);
        g.v = t.input(std::move(v));
        g.a = learned_adjacency(t, store, g.v, learner, &g.degenerate);
        return g;
    }

    graph_vars build_fine_level(diff::tape& t, diff::param_store& store,
        dataio::sample_record const& sample, std::size_t frame, std::size_t span,
        region r, adjacency_learner const& learner)
    {
        graph_vars g;
        la::matrix v = window_keypoints(sample, frame, span, r, &g.tags);
        g.v = t.input(std::move(v));
        g.a = learned_adjacency(t, store, g.v, learner, &g.degenerate);
        return g;
    }

    void dump_graph(st_graph const& g, std::string const& path)
    {
        nlohmann::json j;
        j["version"] = 1;
        j["degenerate"] = g.degenerate;
        auto mat = [](la::matrix const& m) {
            nlohmann::json rows = nlohmann::json::array();
            for (std::size_t i = 0; i < m.rows(); ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (std::size_t k = 0; k < m.cols(); ++k) {
                    row.push_back(m(i, k));
                }
                rows.push_back(std::move(row));
            }
            return rows;
        };
        j["v"] = mat(g.v);
        j["a"] = mat(g.a);
        j["tags"] = nlohmann::json::array();
        for (auto const& tag : g.tags) {
            j["tags"].push_back({{"offset", tag.frame_offset}, {"id", tag.id}});
        }
        std::ofstream os(path);
        if (!os) {
            throw std::runtime_error("dump_graph: cannot open " + path);
        }
        os << j.dump(1) << "\n";
    }

}
