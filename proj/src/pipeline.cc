#include "hstgnn/pipeline.h"
#include "hstgnn/gradcheck.h"
#include "hstgnn/losses.h"
#include "hstgnn/rng.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

namespace fs = std::filesystem;

namespace pipeline {

    namespace {

        bool log_enabled()
        {
            char const* env = std::getenv("HSTGNN_LOG");
            return !(env && std::string(env) == "quiet");
        }

        constexpr std::size_t coord_dim = 2;

    }

    model model::init(model_config const& cfg, std::size_t d_a, std::size_t d_o,
        dataio::vocabulary gloss_vocab, dataio::vocabulary word_vocab)
    {
        cfg.validate();
        cfg.enc.validate(d_a);
        cfg.enc.validate(d_o);
        cfg.enc.validate(coord_dim);

        model m;
        m.cfg = cfg;
        m.d_a = d_a;
        m.d_o = d_o;
        m.gloss_vocab = std::move(gloss_vocab);
        m.word_vocab = std::move(word_vocab);

        std::uint64_t seed = cfg.seed;
        m.adj_app = graphs::make_learner(m.store, "adj.app", d_a, cfg.rank_p,
            cfg.adjacency_sigma, seed);
        m.adj_flow = graphs::make_learner(m.store, "adj.flow", d_o, cfg.rank_p,
            cfg.adjacency_sigma, seed);
        m.adj_face = graphs::make_learner(m.store, "adj.face", coord_dim, cfg.rank_p,
            cfg.adjacency_sigma, seed);
        m.adj_lhand = graphs::make_learner(m.store, "adj.lhand", coord_dim, cfg.rank_p,
            cfg.adjacency_sigma, seed);
        m.adj_rhand = graphs::make_learner(m.store, "adj.rhand", coord_dim, cfg.rank_p,
            cfg.adjacency_sigma, seed);
        m.adj_fuse = graphs::make_learner(m.store, "adj.fuse", cfg.enc.d_model, cfg.rank_p,
            cfg.fusion_sigma, seed);

        layers::register_stream(m.store, "enc.app", d_a, cfg.enc, seed);
        layers::register_stream(m.store, "enc.flow", d_o, cfg.enc, seed);
        layers::register_stream(m.store, "enc.face", coord_dim, cfg.enc, seed);
        layers::register_stream(m.store, "enc.lhand", coord_dim, cfg.enc, seed);
        layers::register_stream(m.store, "enc.rhand", coord_dim, cfg.enc, seed);

        decoder::register_decoder(m.store, 3 * cfg.enc.d_model, m.gloss_vocab.size(),
            m.word_vocab.size(), cfg.dec, seed);
        return m;
    }

    void model::adopt_params(diff::param_store&& loaded)
    {
        for (auto const& [name, e] : store.entries) {
            if (!loaded.exists(name)) {
                throw std::runtime_error("checkpoint: missing parameter " + name);
            }
            auto const& le = loaded.at(name);
            if (!le.value.same_shape(e.value)) {
                throw std::runtime_error("checkpoint: shape mismatch for " + name);
            }
        }
        if (loaded.entries.size() != store.entries.size()) {
            throw std::runtime_error("checkpoint: parameter count mismatch");
        }
        store = std::move(loaded);
    }

    diff::var encode_frame(diff::tape& t, model& m, dataio::sample_record const& sample,
        std::size_t frame)
    {
        auto g_app = graphs::build_high_level(t, m.store, sample, frame, m.cfg.span,
            graphs::modality::appearance, m.adj_app);
        auto g_flow = graphs::build_high_level(t, m.store, sample, frame, m.cfg.span,
            graphs::modality::flow, m.adj_flow);
        auto g_face = graphs::build_fine_level(t, m.store, sample, frame, m.cfg.span,
            graphs::region::face, m.adj_face);
        auto g_lhand = graphs::build_fine_level(t, m.store, sample, frame, m.cfg.span,
            graphs::region::lhand, m.adj_lhand);
        auto g_rhand = graphs::build_fine_level(t, m.store, sample, frame, m.cfg.span,
            graphs::region::rhand, m.adj_rhand);

        auto e_app = layers::encode_stream(t, m.store, g_app, "enc.app", m.cfg.enc);
        auto e_flow = layers::encode_stream(t, m.store, g_flow, "enc.flow", m.cfg.enc);
        auto e_face = layers::encode_stream(t, m.store, g_face, "enc.face", m.cfg.enc);
        auto e_lhand = layers::encode_stream(t, m.store, g_lhand, "enc.lhand", m.cfg.enc);
        auto e_rhand = layers::encode_stream(t, m.store, g_rhand, "enc.rhand", m.cfg.enc);

        return layers::hierarchical_pool(t, m.store, e_app, e_flow, e_face, e_lhand,
            e_rhand, m.adj_fuse).p;
    }

    namespace {

        diff::var emissions_for(diff::tape& t, model& m, dataio::sample_record const& sample)
        {
            std::vector<diff::var> fused;
            fused.reserve(sample.frames.size());
            for (std::size_t f = 0; f < sample.frames.size(); ++f) {
                fused.push_back(encode_frame(t, m, sample, f));
            }
            return decoder::feats2gloss(t, m.store, fused, m.cfg.dec);
        }

        std::vector<int> gloss_ids_of(model const& m, std::vector<std::string> const& glosses)
        {
            std::vector<int> ids;
            ids.reserve(glosses.size());
            for (auto const& g : glosses) {
                ids.push_back(m.gloss_vocab.lookup(g));
            }
            return ids;
        }

    }

    forward_result forward_training(diff::tape& t, model& m,
        dataio::sample_record const& sample)
    {
        forward_result res;
        res.log_emissions = emissions_for(t, m, sample);

        std::vector<int> gloss_ids = gloss_ids_of(m, sample.glosses);
        auto ctc = losses::ctc_loss(t, res.log_emissions, gloss_ids, m.gloss_vocab.blank);
        if (!ctc.feasible) {
            res.ctc_feasible = false;
            return res;
        }
        res.loss_ctc = ctc.loss;

        std::vector<int> word_ids;
        word_ids.reserve(sample.text.size() + 1);
        for (auto const& w : sample.text) {
            word_ids.push_back(m.word_vocab.lookup(w));
        }
        word_ids.push_back(m.word_vocab.stop);
        auto dists = decoder::gloss2text_teacher_forced(t, m.store, gloss_ids, word_ids,
            m.word_vocab, m.cfg.dec);
        res.loss_ce = losses::cross_entropy(t, dists, word_ids);

        res.loss_total = losses::total_loss(t, m.store, res.loss_ctc, res.loss_ce,
            m.cfg.weights);
        return res;
    }

    decode_result decode_sample(model& m, dataio::sample_record const& sample)
    {
        diff::tape t;
        diff::var logy = emissions_for(t, m, sample);
        la::matrix probs = decoder::emission_probs(logy);
        std::vector<int> gloss_ids = decoder::best_path_decode(probs, m.gloss_vocab.blank);
        std::vector<int> word_ids = decoder::generate_text(t, m.store, gloss_ids,
            m.word_vocab, m.cfg.dec, m.cfg.dec.max_text_len);

        decode_result out;
        for (int g : gloss_ids) {
            out.glosses.push_back(m.gloss_vocab.token(g));
        }
        for (int w : word_ids) {
            out.words.push_back(m.word_vocab.token(w));
        }
        return out;
    }

    metrics::score_report evaluate(model& m, std::vector<dataio::sample_record> const& samples)
    {
        metrics::score_report rep;
        std::vector<metrics::tokens> refs;
        std::vector<metrics::tokens> hyps;
        for (auto const& s : samples) {
            decode_result d = decode_sample(m, s);
            rep.gloss += metrics::wer(s.glosses, d.glosses);
            refs.push_back(s.text);
            hyps.push_back(d.words);
        }
        rep.text = metrics::bleu(refs, hyps);
        return rep;
    }

    std::vector<dataio::sample_record> load_manifest_split(std::string const& data_dir,
        std::string const& split)
    {
        return dataio::load_split((fs::path(data_dir)
            / ("manifest." + split + ".txt")).string());
    }

    namespace {

        std::string fmt_double(double v)
        {
            std::ostringstream os;
            os << std::setprecision(17) << v;
            return os.str();
        }

        void write_train_log(std::string const& path, std::vector<epoch_log> const& log)
        {
            std::ofstream os(path);
            for (auto const& e : log) {
                os << "epoch=" << e.epoch
                   << " loss=" << fmt_double(e.loss)
                   << " ctc=" << fmt_double(e.ctc)
                   << " ce=" << fmt_double(e.ce)
                   << " reg=" << fmt_double(e.reg)
                   << " dev_wer=" << fmt_double(e.dev_wer)
                   << " dev_bleu1=" << fmt_double(e.dev_bleu[0])
                   << " dev_bleu2=" << fmt_double(e.dev_bleu[1])
                   << " dev_bleu3=" << fmt_double(e.dev_bleu[2])
                   << " dev_bleu4=" << fmt_double(e.dev_bleu[3])
                   << " infeasible=" << e.infeasible
                   << " wall_ms=" << e.wall_ms
                   << "\n";
            }
        }

        double regularizer_value(diff::param_store& store)
        {
            double sq = 0.0;
            for (auto const& [name, e] : store.entries) {
                for (std::size_t i = 0; i < e.value.size(); ++i) {
                    sq += e.value.data()[i] * e.value.data()[i];
                }
            }
            return sq;
        }

    }

    train_result train(std::string const& data_dir, model_config const& cfg,
        std::string const& out_dir)
    {
        auto train_samples = load_manifest_split(data_dir, "train");
        if (train_samples.empty()) {
            throw std::invalid_argument("train: empty train split in " + data_dir);
        }
        auto dev_samples = load_manifest_split(data_dir, "dev");
        auto test_samples = load_manifest_split(data_dir, "test");

        dataio::manifest train_manifest = dataio::manifest::load(
            (fs::path(data_dir) / "manifest.train.txt").string());

        // the synthetic corpus has a closed vocabulary, so the tables are
        // built over every split to keep dev/test tokens addressable
        std::vector<dataio::sample_record> all = train_samples;
        all.insert(all.end(), dev_samples.begin(), dev_samples.end());
        all.insert(all.end(), test_samples.begin(), test_samples.end());
        auto gloss_vocab = dataio::build_vocab(all, dataio::vocab_kind::gloss);
        auto word_vocab = dataio::build_vocab(all, dataio::vocab_kind::text);

        model m = model::init(cfg, train_manifest.d_a, train_manifest.d_o,
            std::move(gloss_vocab), std::move(word_vocab));

        fs::create_directories(out_dir);
        m.gloss_vocab.save((fs::path(out_dir) / "gloss.vocab").string());
        m.word_vocab.save((fs::path(out_dir) / "word.vocab").string());
        {
            auto meta = cfg.to_map();
            meta["data.d_a"] = std::to_string(m.d_a);
            meta["data.d_o"] = std::to_string(m.d_o);
            std::ofstream os((fs::path(out_dir) / "model.meta").string());
            for (auto const& [k, v] : meta) {
                os << k << "=" << v << "\n";
            }
        }

        diff::adam_state opt;
        opt.lr = cfg.lr;
        opt.beta1 = cfg.beta1;
        opt.beta2 = cfg.beta2;
        opt.epsilon = cfg.adam_epsilon;

        train_result res;
        res.best_dev_wer = std::numeric_limits<double>::infinity();
        res.best_checkpoint = (fs::path(out_dir) / "checkpoint_best.bin").string();
        res.final_checkpoint = (fs::path(out_dir) / "checkpoint_final.bin").string();

        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
            auto started = std::chrono::steady_clock::now();
            epoch_log el;
            el.epoch = epoch;
            std::size_t counted = 0;

            for (auto const& sample : train_samples) {
                diff::tape t;
                forward_result f = forward_training(t, m, sample);
                if (!f.ctc_feasible) {
                    el.infeasible += 1;
                    continue;
                }
                el.loss += f.loss_total.scalar();
                el.ctc += f.loss_ctc.scalar();
                el.ce += f.loss_ce.scalar();
                counted += 1;
                t.backward(f.loss_total);
                diff::adam_step(m.store, opt);
            }
            if (counted > 0) {
                el.loss /= double(counted);
                el.ctc /= double(counted);
                el.ce /= double(counted);
            }
            el.reg = cfg.weights.lambda_r * regularizer_value(m.store);

            if (!dev_samples.empty()) {
                metrics::score_report dev = evaluate(m, dev_samples);
                el.dev_wer = dev.gloss.wer();
                el.dev_bleu = dev.text.bleu;
            }
            if (dev_samples.empty() || el.dev_wer < res.best_dev_wer) {
                res.best_dev_wer = el.dev_wer;
                res.best_epoch = epoch;
                diff::save_checkpoint(m.store, res.best_checkpoint, cfg.seed);
            }

            el.wall_ms = std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - started).count();
            res.log.push_back(el);
            if (log_enabled()) {
                std::cerr << "epoch " << epoch << " loss " << el.loss
                          << " dev_wer " << el.dev_wer << "\n";
            }

            if (cfg.eval_train_every > 0 && epoch % cfg.eval_train_every == 0) {
                metrics::score_report tr = evaluate(m, train_samples);
                if (log_enabled()) {
                    std::cerr << "  train_wer " << tr.gloss.wer()
                              << " train_bleu4 " << tr.text.bleu[3] << "\n";
                }
                if (tr.gloss.wer() <= cfg.stop_train_wer
                    && tr.text.bleu[3] >= cfg.stop_train_bleu4) {
                    res.stopped_early = true;
                    break;
                }
            }
        }

        diff::save_checkpoint(m.store, res.final_checkpoint, cfg.seed);
        if (cfg.epochs == 0) {
            // zero-epoch runs still leave a usable pair of checkpoints
            diff::save_checkpoint(m.store, res.best_checkpoint, cfg.seed);
        }
        write_train_log((fs::path(out_dir) / "train_log.txt").string(), res.log);
        return res;
    }

    model load_model(std::string const& checkpoint_path)
    {
        fs::path dir = fs::path(checkpoint_path).parent_path();
        auto meta = read_kv_file((dir / "model.meta").string());
        std::size_t d_a = std::stoul(meta.at("data.d_a"));
        std::size_t d_o = std::stoul(meta.at("data.d_o"));
        meta.erase("data.d_a");
        meta.erase("data.d_o");
        model_config cfg = model_config::from_map(meta);

        auto gloss_vocab = dataio::vocabulary::load((dir / "gloss.vocab").string());
        auto word_vocab = dataio::vocabulary::load((dir / "word.vocab").string());

        model m = model::init(cfg, d_a, d_o, std::move(gloss_vocab), std::move(word_vocab));
        m.adopt_params(diff::load_checkpoint(checkpoint_path));
        return m;
    }

    metrics::score_report evaluate_checkpoint(std::string const& checkpoint_path,
        std::string const& data_dir, std::string const& split)
    {
        model m = load_model(checkpoint_path);
        auto samples = load_manifest_split(data_dir, split);
        if (samples.empty()) {
            throw std::invalid_argument("evaluate: empty split '" + split + "' in "
                + data_dir);
        }
        return evaluate(m, samples);
    }

    std::vector<sweep_row> sweep_window(std::string const& data_dir,
        model_config const& cfg, std::vector<std::size_t> const& spans,
        std::string const& out_dir)
    {
        if (spans.empty()) {
            throw std::invalid_argument("sweep: no spans given");
        }
        std::vector<sweep_row> rows;
        for (std::size_t span : spans) {
            if (span % 2 == 0 || span == 0) {
                throw std::invalid_argument("sweep: spans must be odd, got "
                    + std::to_string(span));
            }
            model_config c = cfg;
            c.span = span;
            std::string sub = (fs::path(out_dir) / ("span" + std::to_string(span))).string();
            train_result tr = train(data_dir, c, sub);
            metrics::score_report rep = evaluate_checkpoint(tr.best_checkpoint,
                data_dir, "dev");
            rows.push_back({span, rep.gloss.wer(), rep.text.bleu[3]});
        }
        return rows;
    }

    model_config tiny_gradcheck_config()
    {
        model_config c;
        c.seed = 5;
        c.span = 3;
        c.rank_p = 2;
        c.enc.n_conv_layers = 2;
        c.enc.n_transformer_layers = 1;
        c.enc.d_model = 8;
        c.enc.d_ff = 16;
        c.enc.n_heads = 2;
        c.enc.d_head = 4;
        c.dec.hidden = 8;
        c.dec.gloss_emb = 4;
        c.dec.word_emb = 4;
        // smooth activations: finite differences across a relu kink read as
        // spurious gradient error, so the verification fixture avoids them
        c.enc.conv_activation = layers::activation::tanh;
        c.enc.ffn_activation = layers::activation::tanh;
        c.fusion_sigma = graphs::nonlinearity::sigmoid;
        // a firm weight-decay floor keeps every coordinate's gradient clear
        // of the finite-difference noise floor
        c.weights.lambda_r = 0.02;
        return c;
    }

    namespace {

        dataio::sample_record gradcheck_sample(std::uint64_t seed, std::size_t frames,
            std::size_t d_a, std::size_t d_o)
        {
            rng::generator gen(rng::derive(seed, "gradcheck.sample"));
            auto rand_mat = [&](std::size_t r, std::size_t c, double lo, double hi) {
                la::matrix m(r, c);
                for (std::size_t i = 0; i < m.size(); ++i) {
                    m.data()[i] = gen.uniform(lo, hi);
                }
                return m;
            };
            dataio::sample_record s;
            s.id = "gradcheck";
            for (std::size_t f = 0; f < frames; ++f) {
                dataio::frame_bundle fb;
                fb.appearance = rand_mat(dataio::n_regions, d_a, -1.0, 1.0);
                fb.flow = rand_mat(dataio::n_regions, d_o, -1.0, 1.0);
                fb.face = rand_mat(dataio::face_points, 2, 0.0, 1.0);
                fb.lhand = rand_mat(dataio::hand_points, 2, 0.0, 1.0);
                fb.rhand = rand_mat(dataio::hand_points, 2, 0.0, 1.0);
                s.frames.push_back(std::move(fb));
            }
            s.glosses = {"G00", "G01"};
            s.text = {"w0", "w1"};
            return s;
        }

    }

    gradcheck_report run_gradcheck(model_config const& cfg, double eps, std::uint64_t seed)
    {
        model_config c = cfg;
        c.seed = seed;

        dataio::vocabulary glosses;
        glosses.tokens = {"G00", "G01", "G02", "<blank>"};
        glosses.blank = 3;
        glosses.rebuild_index();
        dataio::vocabulary words;
        words.tokens = {"w0", "w1", "<s>", "</s>"};
        words.start = 2;
        words.stop = 3;
        words.rebuild_index();

        model m = model::init(c, 4, 4, glosses, words);
        // evaluate at a generic point: zero-initialized biases sit on a
        // symmetric point where several gradients vanish, right at the
        // finite-difference noise floor
        {
            rng::generator jitter(rng::derive(seed, "gradcheck.jitter"));
            for (auto& [name, e] : m.store.entries) {
                for (std::size_t i = 0; i < e.value.size(); ++i) {
                    double sign = jitter.uniform() < 0.5 ? -1.0 : 1.0;
                    e.value.data()[i] += sign * jitter.uniform(0.1, 0.3);
                }
            }
        }
        dataio::sample_record sample = gradcheck_sample(seed, 3, 4, 4);

        auto build = [&](diff::tape& t) {
            forward_result f = forward_training(t, m, sample);
            la::check_shape(f.ctc_feasible, "gradcheck fixture must be feasible");
            return f.loss_total;
        };

        diff::grad_check_options opts;
        opts.eps = eps;
        opts.seed = seed;
        auto res = diff::grad_check(build, m.store, opts);

        gradcheck_report rep;
        rep.ok = res.ok;
        rep.max_rel_error = res.max_rel_error;
        rep.worst_param = res.worst_param;
        rep.worst_coord = res.worst_coord;
        rep.coords_checked = res.coords_checked;
        rep.message = res.message;
        return rep;
    }

    ctc_check_report run_ctc_check(std::size_t trials, std::uint64_t seed)
    {
        rng::generator gen(seed);
        ctc_check_report rep;
        rep.trials = trials;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            std::size_t frames = 1 + gen.below(6);
            std::size_t content = 1 + gen.below(3);
            std::size_t labels = content + 1;
            int blank = int(content);
            std::size_t len = gen.below(4);
            std::vector<int> target;
            for (std::size_t i = 0; i < len; ++i) {
                target.push_back(int(gen.below(content)));
            }
            la::matrix probs(frames, labels);
            for (std::size_t f = 0; f < frames; ++f) {
                double z = 0.0;
                for (std::size_t j = 0; j < labels; ++j) {
                    probs(f, j) = 0.05 + gen.uniform();
                    z += probs(f, j);
                }
                for (std::size_t j = 0; j < labels; ++j) {
                    probs(f, j) /= z;
                }
            }
            double p_bf = losses::ctc_brute_force(probs, target, blank);

            la::matrix logp(frames, labels);
            for (std::size_t i = 0; i < logp.size(); ++i) {
                logp.data()[i] = std::log(probs.data()[i]);
            }
            diff::tape t;
            auto res = losses::ctc_loss(t, t.input(logp), target, blank);
            if (!res.feasible) {
                if (p_bf != 0.0) {
                    rep.max_abs_log_diff = std::numeric_limits<double>::infinity();
                }
                continue;
            }
            rep.feasible += 1;
            double diff_abs = std::fabs(res.log_prob - std::log(p_bf));
            rep.max_abs_log_diff = std::max(rep.max_abs_log_diff, diff_abs);
        }
        return rep;
    }

}
