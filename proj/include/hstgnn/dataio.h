#ifndef HSTGNN_DATAIO_H
#define HSTGNN_DATAIO_H

#include "hstgnn/mat.h"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dataio {

    constexpr std::size_t n_regions = 3;  // fixed order: face, lhand, rhand
    constexpr std::size_t face_points = 29;
    constexpr std::size_t hand_points = 21;
    constexpr int fixture_version = 1;

    extern char const* const region_names[n_regions];

    struct parse_error : std::runtime_error {
        using std::runtime_error::runtime_error;
    };

    struct frame_bundle {
        la::matrix appearance;  // 3 x d_a, one row per region
        la::matrix flow;        // 3 x d_o
        la::matrix face;        // 29 x 2, coordinates in [0, 1]
        la::matrix lhand;       // 21 x 2
        la::matrix rhand;       // 21 x 2

        la::matrix const& keypoints(std::size_t region) const
        {
            return region == 0 ? face : region == 1 ? lhand : rhand;
        }
    };

    struct sample_record {
        std::string id;
        std::vector<frame_bundle> frames;
        std::vector<std::string> glosses;
        std::vector<std::string> text;

        std::size_t d_a() const { return frames.empty() ? 0 : frames[0].appearance.cols(); }
        std::size_t d_o() const { return frames.empty() ? 0 : frames[0].flow.cols(); }
    };

    // Structural validation: counts, dimensions, coordinate ranges.
    // Violations throw parse_error naming the field and frame index.
    void validate(sample_record const& s, bool require_annotations = true);

    sample_record load_sample(std::string const& path);
    void write_sample(sample_record const& s, std::string const& path);

    enum class vocab_kind { gloss, text };

    struct vocabulary {
        std::vector<std::string> tokens;
        int blank = -1;  // gloss vocabularies
        int start = -1;  // text vocabularies
        int stop = -1;
        int unk = -1;

        std::size_t size() const { return tokens.size(); }
        bool contains(std::string const& tok) const { return index_.count(tok) != 0; }

        // unknown tokens map to unk when one exists, otherwise throw
        int lookup(std::string const& tok) const;
        std::string const& token(int idx) const { return tokens.at(std::size_t(idx)); }

        void rebuild_index();
        void save(std::string const& path) const;
        static vocabulary load(std::string const& path);

    private:
        std::unordered_map<std::string, int> index_;
    };

    // Content tokens sorted frequency-descending (ties lexicographic), then
    // the kind's special tokens. Gloss vocabularies end with the blank.
    vocabulary build_vocab(std::vector<sample_record> const& samples, vocab_kind kind,
        bool include_unk = false);

    struct manifest {
        int version = 1;
        std::string dataset;
        std::string split;
        std::size_t d_a = 0;
        std::size_t d_o = 0;
        std::uint64_t seed = 0;
        std::vector<std::string> paths;  // relative to the manifest's directory

        void save(std::string const& path) const;
        static manifest load(std::string const& path);
    };

    // Every sample of a split, loaded and validated, in manifest order.
    std::vector<sample_record> load_split(std::string const& manifest_path);

    struct synth_config {
        std::size_t n_samples = 20;
        std::size_t gloss_vocab_size = 10;
        std::size_t text_vocab_size = 14;  // gloss images + 2 function words + <s> + </s>
        std::size_t frames_per_gloss = 3;
        std::size_t d_a = 64;
        std::size_t d_o = 64;
        double noise_sigma = 0.0;
        std::uint64_t seed = 13;
        std::size_t min_glosses = 2;
        std::size_t max_glosses = 4;
    };

    // Generates a separable synthetic corpus under out_dir: every gloss maps
    // to fixed per-region feature prototypes and keypoint templates; text is
    // a deterministic transduction of the gloss sequence (one function word
    // on each side). Writes sample fixtures plus train/dev/test manifests
    // (80/10/10 by sample index) and returns the manifest paths.
    std::array<std::string, 3> synth_corpus(synth_config const& cfg, std::string const& out_dir);

    // The transduction rule used by the generator (exposed for tests).
    std::vector<std::string> gloss_to_text(std::vector<std::string> const& glosses);

}

#endif
