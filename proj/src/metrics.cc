#include "hstgnn/metrics.h"

#include <cmath>
#include <map>
#include <stdexcept>

namespace metrics {

    wer_counts wer(tokens const& ref, tokens const& hyp)
    {
        if (ref.empty()) {
            throw std::invalid_argument("wer: empty reference");
        }
        std::size_t R = ref.size();
        std::size_t H = hyp.size();
        std::vector<std::size_t> d((R + 1) * (H + 1));
        auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
            return d[i * (H + 1) + j];
        };
        for (std::size_t i = 0; i <= R; ++i) {
            at(i, 0) = i;
        }
        for (std::size_t j = 0; j <= H; ++j) {
            at(0, j) = j;
        }
        for (std::size_t i = 1; i <= R; ++i) {
            for (std::size_t j = 1; j <= H; ++j) {
                std::size_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
                std::size_t ins = at(i, j - 1) + 1;
                std::size_t del = at(i - 1, j) + 1;
                at(i, j) = std::min({sub, ins, del});
            }
        }

        wer_counts c;
        c.ref_len = R;
        std::size_t i = R, j = H;
        while (i > 0 || j > 0) {
            if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1)
                && ref[i - 1] == hyp[j - 1]) {
                --i;
                --j;
            } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
                c.substitutions += 1;  // preferred over insertion and deletion
                --i;
                --j;
            } else if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
                c.insertions += 1;
                --j;
            } else {
                c.deletions += 1;
                --i;
            }
        }
        return c;
    }

    namespace {

        std::map<std::vector<std::string>, std::size_t> ngram_counts(tokens const& seq,
            std::size_t n)
        {
            std::map<std::vector<std::string>, std::size_t> counts;
            if (seq.size() >= n) {
                for (std::size_t i = 0; i + n <= seq.size(); ++i) {
                    counts[std::vector<std::string>(seq.begin() + long(i),
                        seq.begin() + long(i + n))] += 1;
                }
            }
            return counts;
        }

    }

    bleu_report bleu(std::vector<tokens> const& refs, std::vector<tokens> const& hyps,
        bool smooth)
    {
        if (refs.size() != hyps.size()) {
            throw std::invalid_argument("bleu: " + std::to_string(refs.size())
                + " references vs " + std::to_string(hyps.size()) + " hypotheses");
        }
        bleu_report r;
        for (std::size_t s = 0; s < refs.size(); ++s) {
            r.ref_len += refs[s].size();
            r.hyp_len += hyps[s].size();
            for (std::size_t n = 1; n <= 4; ++n) {
                auto rc = ngram_counts(refs[s], n);
                auto hc = ngram_counts(hyps[s], n);
                for (auto const& [gram, count] : hc) {
                    r.total[n - 1] += count;
                    auto it = rc.find(gram);
                    if (it != rc.end()) {
                        r.match[n - 1] += std::min(count, it->second);
                    }
                }
            }
        }
        if (r.hyp_len == 0) {
            r.brevity_penalty = 0.0;
            return r;  // all scores stay 0
        }
        r.brevity_penalty = std::min(1.0,
            std::exp(1.0 - double(r.ref_len) / double(r.hyp_len)));
        for (std::size_t n = 1; n <= 4; ++n) {
            bool zero = false;
            double log_prec = 0.0;
            for (std::size_t k = 1; k <= n; ++k) {
                double m = double(r.match[k - 1]);
                double tot = double(r.total[k - 1]);
                if (smooth) {
                    m += 1.0;
                    tot += 1.0;
                }
                if (m <= 0.0 || tot <= 0.0) {
                    zero = true;
                    break;
                }
                log_prec += std::log(m / tot) / double(n);
            }
            r.bleu[n - 1] = zero ? 0.0 : r.brevity_penalty * std::exp(log_prec);
        }
        return r;
    }

    void write_report(std::ostream& os, score_report const& r)
    {
        os << "wer=" << r.gloss.wer() << "\n"
           << "substitutions=" << r.gloss.substitutions << "\n"
           << "deletions=" << r.gloss.deletions << "\n"
           << "insertions=" << r.gloss.insertions << "\n"
           << "ref_len=" << r.gloss.ref_len << "\n";
        for (std::size_t n = 1; n <= 4; ++n) {
            os << "bleu" << n << "=" << r.text.bleu[n - 1] << "\n";
        }
        for (std::size_t n = 1; n <= 4; ++n) {
            os << "ngram_match_" << n << "=" << r.text.match[n - 1] << "\n"
               << "ngram_total_" << n << "=" << r.text.total[n - 1] << "\n";
        }
        os << "brevity_penalty=" << r.text.brevity_penalty << "\n"
           << "text_ref_len=" << r.text.ref_len << "\n"
           << "text_hyp_len=" << r.text.hyp_len << "\n";
    }

}
