#ifndef HSTGNN_METRICS_H
#define HSTGNN_METRICS_H

#include <array>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

namespace metrics {

    using tokens = std::vector<std::string>;

    struct wer_counts {
        std::size_t substitutions = 0;
        std::size_t deletions = 0;
        std::size_t insertions = 0;
        std::size_t ref_len = 0;

        double wer() const
        {
            return double(substitutions + deletions + insertions) / double(ref_len);
        }

        wer_counts& operator+=(wer_counts const& other)
        {
            substitutions += other.substitutions;
            deletions += other.deletions;
            insertions += other.insertions;
            ref_len += other.ref_len;
            return *this;
        }
    };

    // Levenshtein alignment with unit costs; ties resolved preferring
    // substitution over insertion over deletion. Empty ref is an error.
    wer_counts wer(tokens const& ref, tokens const& hyp);

    struct bleu_report {
        std::array<double, 4> bleu = {0, 0, 0, 0};        // BLEU-1..4
        std::array<std::size_t, 4> match = {0, 0, 0, 0};  // clipped n-gram matches
        std::array<std::size_t, 4> total = {0, 0, 0, 0};  // hypothesis n-gram counts
        double brevity_penalty = 0.0;
        std::size_t ref_len = 0;
        std::size_t hyp_len = 0;
    };

    // Corpus-level BLEU with uniform weights and a single reference per
    // hypothesis. A zero match count at any order k <= n zeroes BLEU-n
    // unless add-one smoothing is requested.
    bleu_report bleu(std::vector<tokens> const& refs, std::vector<tokens> const& hyps,
        bool smooth = false);

    struct score_report {
        wer_counts gloss;
        bleu_report text;
    };

    // Stable key=value lines: wer=, bleu1=..bleu4=, plus the count fields.
    void write_report(std::ostream& os, score_report const& r);

}

#endif
