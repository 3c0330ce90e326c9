#ifndef HSTGNN_GRAPHS_H
#define HSTGNN_GRAPHS_H

#include "hstgnn/dataio.h"
#include "hstgnn/diff.h"

#include <string>
#include <vector>

namespace graphs {

    struct vertex_tag {
        int frame_offset;  // w in [-W, W]
        int id;            // region index or keypoint index
    };

    enum class nonlinearity { sigmoid, relu };

    nonlinearity nonlinearity_from_name(std::string const& name);
    char const* nonlinearity_name(nonlinearity nl);

    // Low-rank bilinear similarity: a_ij = sigma(v_i^T M1 M2^T v_j) with
    // M1, M2 of shape d x p, p < d. The matrices live in the parameter
    // store under <prefix>.m1 / <prefix>.m2.
    struct adjacency_learner {
        std::string m1;
        std::string m2;
        nonlinearity sigma = nonlinearity::sigmoid;
        std::size_t dim = 0;
        std::size_t rank = 0;
    };

    // Registers the two factor matrices. The requested rank is clamped to
    // d - 1 to keep the decomposition strictly low-rank.
    adjacency_learner make_learner(diff::param_store& store, std::string const& prefix,
        std::size_t dim, std::size_t rank, nonlinearity sigma, std::uint64_t seed);

    struct st_graph {
        la::matrix v;
        la::matrix a;
        std::vector<vertex_tag> tags;
        bool degenerate = false;  // normalization hit the zero-norm path
    };

    struct graph_vars {
        diff::var v;
        diff::var a;
        std::vector<vertex_tag> tags;
        bool degenerate = false;

        st_graph values() const;
    };

    enum class modality { appearance, flow };
    enum class region { face, lhand, rhand };

    // Vertex features over the clamped window t-W .. t+W, W = (span-1)/2.
    // Rows ordered by frame offset ascending, then region/keypoint id.
    la::matrix window_vertices(dataio::sample_record const& sample, std::size_t t,
        std::size_t span, modality m, std::vector<vertex_tag>* tags = nullptr);
    la::matrix window_keypoints(dataio::sample_record const& sample, std::size_t t,
        std::size_t span, region r, std::vector<vertex_tag>* tags = nullptr);

    diff::var raw_adjacency(diff::tape& t, diff::param_store& store, diff::var v,
        adjacency_learner const& learner);

    // symmetrize = A^T A (exact mirror); normalize = Frobenius unit with a
    // degenerate pass-through. Thin aliases over the engine primitives so
    // the two constraints are applied the same way everywhere.
    inline diff::var symmetrize(diff::var a) { return diff::gram(a); }
    inline diff::var normalize(diff::var a) { return diff::unit_fro(a); }

    // adjacency = normalize(symmetrize(raw_adjacency(v))); degenerate flag
    // reports the zero-norm fallback
    diff::var learned_adjacency(diff::tape& t, diff::param_store& store, diff::var v,
        adjacency_learner const& learner, bool* degenerate = nullptr);

    graph_vars build_high_level(diff::tape& t, diff::param_store& store,
        dataio::sample_record const& sample, std::size_t frame, std::size_t span,
        modality m, adjacency_learner const& learner);

    graph_vars build_fine_level(diff::tape& t, diff::param_store& store,
        dataio::sample_record const& sample, std::size_t frame, std::size_t span,
        region r, adjacency_learner const& learner);

    // Debug dump in the fixture text format.
    void dump_graph(st_graph const& g, std::string const& path);

}

#endif
