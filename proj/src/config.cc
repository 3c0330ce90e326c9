#include "hstgnn/config.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pipeline {

    std::map<std::string, std::string> read_kv_file(std::string const& path)
    {
        std::ifstream is(path);
        if (!is) {
            throw std::invalid_argument("config: cannot open " + path);
        }
        std::map<std::string, std::string> kv;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            lineno += 1;
            if (line.empty() || line[0] == '#') {
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument("config: " + path + ":"
                    + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
            }
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
        return kv;
    }

    namespace {

        struct kv_reader {
            std::map<std::string, std::string> kv;

            explicit kv_reader(std::map<std::string, std::string> const& m) : kv(m) {}

            bool take(std::string const& key, std::string& out)
            {
                auto it = kv.find(key);
                if (it == kv.end()) {
                    return false;
                }
                out = it->second;
                kv.erase(it);
                return true;
            }

            template <typename T, typename Parse>
            void opt(std::string const& key, T& field, Parse parse)
            {
                std::string raw;
                if (take(key, raw)) {
                    try {
                        field = parse(raw);
                    } catch (std::exception const&) {
                        throw std::invalid_argument("config: bad value for " + key
                            + ": '" + raw + "'");
                    }
                }
            }

            void opt_size(std::string const& key, std::size_t& field)
            {
                opt(key, field, [](std::string const& s) {
                    long long v = std::stoll(s);
                    if (v < 0) throw std::invalid_argument("negative");
                    return std::size_t(v);
                });
            }

            void opt_u64(std::string const& key, std::uint64_t& field)
            {
                opt(key, field, [](std::string const& s) { return std::stoull(s); });
            }

            void opt_double(std::string const& key, double& field)
            {
                opt(key, field, [](std::string const& s) { return std::stod(s); });
            }

            void reject_leftovers(std::string const& what)
            {
                if (!kv.empty()) {
                    throw std::invalid_argument(what + ": unknown key '"
                        + kv.begin()->first + "'");
                }
            }
        };

    }

    void model_config::validate() const
    {
        if (span % 2 == 0 || span == 0) {
            throw std::invalid_argument("config: span must be odd and positive");
        }
        if (rank_p == 0) {
            throw std::invalid_argument("config: rank_p must be positive");
        }
        if (lr <= 0.0 || beta1 <= 0.0 || beta2 <= 0.0 || adam_epsilon <= 0.0) {
            throw std::invalid_argument("config: optimizer settings must be positive");
        }
        if (weights.lambda_ctc < 0.0 || weights.lambda_ce < 0.0 || weights.lambda_r < 0.0) {
            throw std::invalid_argument("config: loss weights must be nonnegative");
        }
        if (enc.d_model == 0 || dec.hidden == 0) {
            throw std::invalid_argument("config: dims must be positive");
        }
    }

    model_config model_config::from_map(std::map<std::string, std::string> const& kv)
    {
        model_config c;
        kv_reader r(kv);
        r.opt_u64("seed", c.seed);
        r.opt_size("span", c.span);
        r.opt_size("rank_p", c.rank_p);
        r.opt("adjacency_sigma", c.adjacency_sigma,
            [](std::string const& s) { return graphs::nonlinearity_from_name(s); });
        r.opt("fusion_sigma", c.fusion_sigma,
            [](std::string const& s) { return graphs::nonlinearity_from_name(s); });
        r.opt_size("n_conv_layers", c.enc.n_conv_layers);
        r.opt_size("n_transformer_layers", c.enc.n_transformer_layers);
        r.opt_size("d_model", c.enc.d_model);
        r.opt_size("d_ff", c.enc.d_ff);
        r.opt_size("n_heads", c.enc.n_heads);
        r.opt_size("d_head", c.enc.d_head);
        r.opt("conv_activation", c.enc.conv_activation,
            [](std::string const& s) { return layers::activation_from_name(s); });
        r.opt("ffn_activation", c.enc.ffn_activation,
            [](std::string const& s) { return layers::activation_from_name(s); });
        r.opt_size("dec_hidden", c.dec.hidden);
        r.opt_size("gloss_emb", c.dec.gloss_emb);
        r.opt_size("word_emb", c.dec.word_emb);
        r.opt_size("max_text_len", c.dec.max_text_len);
        r.opt_double("lambda_ctc", c.weights.lambda_ctc);
        r.opt_double("lambda_ce", c.weights.lambda_ce);
        r.opt_double("lambda_r", c.weights.lambda_r);
        r.opt_double("lr", c.lr);
        r.opt_double("beta1", c.beta1);
        r.opt_double("beta2", c.beta2);
        r.opt_double("adam_epsilon", c.adam_epsilon);
        r.opt_size("epochs", c.epochs);
        r.opt_size("eval_train_every", c.eval_train_every);
        r.opt_double("stop_train_wer", c.stop_train_wer);
        r.opt_double("stop_train_bleu4", c.stop_train_bleu4);
        r.reject_leftovers("config");
        c.validate();
        return c;
    }

    model_config model_config::from_file(std::string const& path)
    {
        return from_map(read_kv_file(path));
    }

    std::map<std::string, std::string> model_config::to_map() const
    {
        auto fmt = [](double v) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            return os.str();
        };
        std::map<std::string, std::string> kv;
        kv["seed"] = std::to_string(seed);
        kv["span"] = std::to_string(span);
        kv["rank_p"] = std::to_string(rank_p);
        kv["adjacency_sigma"] = graphs::nonlinearity_name(adjacency_sigma);
        kv["fusion_sigma"] = graphs::nonlinearity_name(fusion_sigma);
        kv["n_conv_layers"] = std::to_string(enc.n_conv_layers);
        kv["n_transformer_layers"] = std::to_string(enc.n_transformer_layers);
        kv["d_model"] = std::to_string(enc.d_model);
        kv["d_ff"] = std::to_string(enc.d_ff);
        kv["n_heads"] = std::to_string(enc.n_heads);
        kv["d_head"] = std::to_string(enc.d_head);
        kv["conv_activation"] = layers::activation_name(enc.conv_activation);
        kv["ffn_activation"] = layers::activation_name(enc.ffn_activation);
        kv["dec_hidden"] = std::to_string(dec.hidden);
        kv["gloss_emb"] = std::to_string(dec.gloss_emb);
        kv["word_emb"] = std::to_string(dec.word_emb);
        kv["max_text_len"] = std::to_string(dec.max_text_len);
        kv["lambda_ctc"] = fmt(weights.lambda_ctc);
        kv["lambda_ce"] = fmt(weights.lambda_ce);
        kv["lambda_r"] = fmt(weights.lambda_r);
        kv["lr"] = fmt(lr);
        kv["beta1"] = fmt(beta1);
        kv["beta2"] = fmt(beta2);
        kv["adam_epsilon"] = fmt(adam_epsilon);
        kv["epochs"] = std::to_string(epochs);
        kv["eval_train_every"] = std::to_string(eval_train_every);
        kv["stop_train_wer"] = fmt(stop_train_wer);
        kv["stop_train_bleu4"] = fmt(stop_train_bleu4);
        return kv;
    }

    void model_config::save(std::string const& path) const
    {
        std::ofstream os(path);
        if (!os) {
            throw std::runtime_error("config: cannot open " + path + " for writing");
        }
        for (auto const& [k, v] : to_map()) {
            os << k << "=" << v << "\n";
        }
    }

    dataio::synth_config synth_config_from_map(std::map<std::string, std::string> const& kv)
    {
        dataio::synth_config c;
        kv_reader r(kv);
        r.opt_size("n_samples", c.n_samples);
        r.opt_size("gloss_vocab_size", c.gloss_vocab_size);
        r.opt_size("text_vocab_size", c.text_vocab_size);
        r.opt_size("frames_per_gloss", c.frames_per_gloss);
        r.opt_size("d_a", c.d_a);
        r.opt_size("d_o", c.d_o);
        r.opt_double("noise_sigma", c.noise_sigma);
        r.opt_u64("seed", c.seed);
        r.opt_size("min_glosses", c.min_glosses);
        r.opt_size("max_glosses", c.max_glosses);
        r.reject_leftovers("synth config");
        return c;
    }

    dataio::synth_config synth_config_from_file(std::string const& path)
    {
        return synth_config_from_map(read_kv_file(path));
    }

}
