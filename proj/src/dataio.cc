#include "hstgnn/dataio.h"
#include "hstgnn/rng.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace dataio {

    char const* const region_names[n_regions] = {"face", "lhand", "rhand"};

    namespace {

        std::size_t region_point_count(std::size_t region)
        {
            return region == 0 ? face_points : hand_points;
        }

        void fail(std::string const& file, std::string const& what)
        {
            throw parse_error(file.empty() ? what : file + ": " + what);
        }

    }

    void validate(sample_record const& s, bool require_annotations)
    {
        if (s.id.empty()) {
            fail(s.id, "id: empty");
        }
        if (s.frames.empty()) {
            fail(s.id, "frames: empty");
        }
        std::size_t da = s.frames[0].appearance.cols();
        std::size_t d_flow = s.frames[0].flow.cols();
        for (std::size_t f = 0; f < s.frames.size(); ++f) {
            auto const& fb = s.frames[f];
            std::string at = " (frame " + std::to_string(f) + ")";
            if (fb.appearance.rows() != n_regions || fb.appearance.cols() != da
                || fb.appearance.cols() == 0) {
                fail(s.id, "appearance: expected 3 region rows of fixed dimension" + at);
            }
            if (fb.flow.rows() != n_regions || fb.flow.cols() != d_flow || fb.flow.cols() == 0) {
                fail(s.id, "flow: expected 3 region rows of fixed dimension" + at);
            }
            for (std::size_t r = 0; r < n_regions; ++r) {
                la::matrix const& kp = fb.keypoints(r);
                std::size_t want = region_point_count(r);
                if (kp.rows() != want || kp.cols() != 2) {
                    fail(s.id, std::string(region_names[r]) + " keypoints: expected "
                        + std::to_string(want) + " 2-d points, got "
                        + std::to_string(kp.rows()) + at);
                }
                for (std::size_t i = 0; i < kp.size(); ++i) {
                    double v = kp.data()[i];
                    if (!(v >= 0.0 && v <= 1.0)) {
                        fail(s.id, std::string(region_names[r])
                            + " keypoints: coordinate out of [0,1]" + at);
                    }
                }
            }
            for (std::size_t i = 0; i < fb.appearance.size(); ++i) {
                if (!std::isfinite(fb.appearance.data()[i])) {
                    fail(s.id, "appearance: non-finite value" + at);
                }
            }
            for (std::size_t i = 0; i < fb.flow.size(); ++i) {
                if (!std::isfinite(fb.flow.data()[i])) {
                    fail(s.id, "flow: non-finite value" + at);
                }
            }
        }
        if (require_annotations) {
            if (s.glosses.empty()) {
                fail(s.id, "glosses: empty");
            }
            if (s.text.empty()) {
                fail(s.id, "text: empty");
            }
        }
    }

    namespace {

        la::matrix matrix_from_json(json const& j, std::string const& file,
            std::string const& field, std::size_t want_rows, std::size_t want_cols)
        {
            if (!j.is_array() || j.size() != want_rows) {
                fail(file, field + ": expected " + std::to_string(want_rows) + " rows"
                    + (j.is_array() ? ", got " + std::to_string(j.size()) : ""));
            }
            la::matrix m(want_rows, want_cols == 0 ? j[0].size() : want_cols);
            for (std::size_t i = 0; i < want_rows; ++i) {
                if (!j[i].is_array() || j[i].size() != m.cols()) {
                    fail(file, field + ": row " + std::to_string(i) + " has "
                        + std::to_string(j[i].size()) + " values, expected "
                        + std::to_string(m.cols()));
                }
                for (std::size_t k = 0; k < m.cols(); ++k) {
                    if (!j[i][k].is_number()) {
                        fail(file, field + ": non-numeric value");
                    }
                    m(i, k) = j[i][k].get<double>();
                }
            }
            return m;
        }

        json matrix_to_json(la::matrix const& m)
        {
            json rows = json::array();
            for (std::size_t i = 0; i < m.rows(); ++i) {
                json row = json::array();
                for (std::size_t j = 0; j < m.cols(); ++j) {
                    row.push_back(m(i, j));
                }
                rows.push_back(std::move(row));
            }
            return rows;
        }

    }

    sample_record load_sample(std::string const& path)
    {
        std::ifstream is(path);
        if (!is) {
            fail(path, "cannot open");
        }
        json j;
        try {
            is >> j;
        } catch (json::exception const& e) {
            fail(path, std::string("invalid json: ") + e.what());
        }
        for (char const* key : {"version", "id", "frames", "glosses", "text"}) {
            if (!j.contains(key)) {
                fail(path, std::string(key) + ": missing");
            }
        }
        if (!j["version"].is_number_integer() || j["version"].get<int>() != fixture_version) {
            fail(path, "version: unsupported");
        }
        sample_record s;
        s.id = j["id"].get<std::string>();
        for (std::size_t f = 0; f < j["frames"].size(); ++f) {
            json const& jf = j["frames"][f];
            std::string ctx = "frame " + std::to_string(f);
            for (char const* key : {"appearance", "flow", "face", "lhand", "rhand"}) {
                if (!jf.contains(key)) {
                    fail(path, ctx + ": " + key + ": missing");
                }
            }
            frame_bundle fb;
            fb.appearance = matrix_from_json(jf["appearance"], path, ctx + ": appearance",
                n_regions, 0);
            fb.flow = matrix_from_json(jf["flow"], path, ctx + ": flow", n_regions, 0);
            fb.face = matrix_from_json(jf["face"], path, ctx + ": face", jf["face"].size(), 2);
            fb.lhand = matrix_from_json(jf["lhand"], path, ctx + ": lhand", jf["lhand"].size(), 2);
            fb.rhand = matrix_from_json(jf["rhand"], path, ctx + ": rhand", jf["rhand"].size(), 2);
            s.frames.push_back(std::move(fb));
        }
        s.glosses = j["glosses"].get<std::vector<std::string>>();
        s.text = j["text"].get<std::vector<std::string>>();
        try {
            validate(s);
        } catch (parse_error const& e) {
            fail(path, e.what());
        }
        return s;
    }

    void write_sample(sample_record const& s, std::string const& path)
    {
        json j;
        j["version"] = fixture_version;
        j["id"] = s.id;
        j["frames"] = json::array();
        for (auto const& fb : s.frames) {
            json jf;
            jf["appearance"] = matrix_to_json(fb.appearance);
            jf["flow"] = matrix_to_json(fb.flow);
            jf["face"] = matrix_to_json(fb.face);
            jf["lhand"] = matrix_to_json(fb.lhand);
            jf["rhand"] = matrix_to_json(fb.rhand);
            j["frames"].push_back(std::move(jf));
        }
        j["glosses"] = s.glosses;
        j["text"] = s.text;
        std::ofstream os(path);
        if (!os) {
            fail(path, "cannot open for writing");
        }
        os << j.dump(1) << "\n";
    }

    int vocabulary::lookup(std::string const& tok) const
    {
        auto it = index_.find(tok);
        if (it != index_.end()) {
            return it->second;
        }
        if (unk >= 0) {
            return unk;
        }
        throw std::out_of_range("vocabulary: unknown token '" + tok + "' and no <unk>");
    }

    void vocabulary::rebuild_index()
    {
        index_.clear();
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            index_[tokens[i]] = int(i);
        }
    }

    void vocabulary::save(std::string const& path) const
    {
        std::ofstream os(path);
        if (!os) {
            throw std::runtime_error("vocabulary: cannot open " + path + " for writing");
        }
        os << "version=1\n"
           << "blank=" << blank << "\n"
           << "start=" << start << "\n"
           << "stop=" << stop << "\n"
           << "unk=" << unk << "\n"
           << "tokens=" << tokens.size() << "\n";
        for (auto const& t : tokens) {
            os << t << "\n";
        }
    }

    vocabulary vocabulary::load(std::string const& path)
    {
        std::ifstream is(path);
        if (!is) {
            throw std::runtime_error("vocabulary: cannot open " + path);
        }
        vocabulary v;
        std::string line;
        std::size_t count = 0;
        for (int h = 0; h < 6; ++h) {
            if (!std::getline(is, line)) {
                throw std::runtime_error("vocabulary: truncated header in " + path);
            }
            auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error("vocabulary: bad header line '" + line + "'");
            }
            std::string key = line.substr(0, eq);
            std::string val = line.substr(eq + 1);
            if (key == "version") {
                if (val != "1") throw std::runtime_error("vocabulary: unsupported version");
            } else if (key == "blank") {
                v.blank = std::stoi(val);
            } else if (key == "start") {
                v.start = std::stoi(val);
            } else if (key == "stop") {
                v.stop = std::stoi(val);
            } else if (key == "unk") {
                v.unk = std::stoi(val);
            } else if (key == "tokens") {
                count = std::stoul(val);
            } else {
                throw std::runtime_error("vocabulary: unknown header key '" + key + "'");
            }
        }
        for (std::size_t i = 0; i < count; ++i) {
            if (!std::getline(is, line)) {
                throw std::runtime_error("vocabulary: truncated token list in " + path);
            }
            v.tokens.push_back(line);
        }
        v.rebuild_index();
        return v;
    }

    vocabulary build_vocab(std::vector<sample_record> const& samples, vocab_kind kind,
        bool include_unk)
    {
        std::map<std::string, std::size_t> freq;
        for (auto const& s : samples) {
            auto const& toks = kind == vocab_kind::gloss ? s.glosses : s.text;
            for (auto const& t : toks) {
                freq[t] += 1;
            }
        }
        if (freq.empty()) {
            throw parse_error("build_vocab: empty token stream");
        }
        std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
        std::sort(items.begin(), items.end(), [](auto const& a, auto const& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        vocabulary v;
        for (auto const& [tok, n] : items) {
            v.tokens.push_back(tok);
        }
        if (include_unk) {
            v.unk = int(v.tokens.size());
            v.tokens.push_back("<unk>");
        }
        if (kind == vocab_kind::gloss) {
            // the blank stays the last index
            v.blank = int(v.tokens.size());
            v.tokens.push_back("<blank>");
        } else {
            v.start = int(v.tokens.size());
            v.tokens.push_back("<s>");
            v.stop = int(v.tokens.size());
            v.tokens.push_back("</s>");
        }
        v.rebuild_index();
        return v;
    }

    void manifest::save(std::string const& path) const
    {
        std::ofstream os(path);
        if (!os) {
            throw std::runtime_error("manifest: cannot open " + path + " for writing");
        }
        os << "version=" << version << "\n"
           << "dataset=" << dataset << "\n"
           << "split=" << split << "\n"
           << "d_a=" << d_a << "\n"
           << "d_o=" << d_o << "\n"
           << "seed=" << seed << "\n"
           << "\n";
        for (auto const& p : paths) {
            os << p << "\n";
        }
    }

    manifest manifest::load(std::string const& path)
    {
        std::ifstream is(path);
        if (!is) {
            throw parse_error("manifest: cannot open " + path);
        }
        manifest m;
        std::string line;
        bool in_header = true;
        bool saw_version = false;
        while (std::getline(is, line)) {
            if (in_header) {
                if (line.empty()) {
                    in_header = false;
                    continue;
                }
                auto eq = line.find('=');
                if (eq == std::string::npos) {
                    throw parse_error("manifest: bad header line '" + line + "' in " + path);
                }
                std::string key = line.substr(0, eq);
                std::string val = line.substr(eq + 1);
                if (key == "version") {
                    m.version = std::stoi(val);
                    saw_version = true;
                    if (m.version != 1) {
                        throw parse_error("manifest: unsupported version in " + path);
                    }
                } else if (key == "dataset") {
                    m.dataset = val;
                } else if (key == "split") {
                    m.split = val;
                } else if (key == "d_a") {
                    m.d_a = std::stoul(val);
                } else if (key == "d_o") {
                    m.d_o = std::stoul(val);
                } else if (key == "seed") {
                    m.seed = std::stoull(val);
                } else {
                    throw parse_error("manifest: unknown header key '" + key + "' in " + path);
                }
            } else if (!line.empty()) {
                m.paths.push_back(line);
            }
        }
        if (!saw_version) {
            throw parse_error("manifest: missing version field in " + path);
        }
        return m;
    }

    std::vector<sample_record> load_split(std::string const& manifest_path)
    {
        manifest m = manifest::load(manifest_path);
        fs::path base = fs::path(manifest_path).parent_path();
        std::vector<sample_record> out;
        out.reserve(m.paths.size());
        for (auto const& rel : m.paths) {
            fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
            if (!fs::exists(p)) {
                throw parse_error("manifest: referenced file missing: " + p.string());
            }
            sample_record s = load_sample(p.string());
            if ((m.d_a && s.d_a() != m.d_a) || (m.d_o && s.d_o() != m.d_o)) {
                throw parse_error("manifest: feature dims of " + s.id
                    + " disagree with header");
            }
            out.push_back(std::move(s));
        }
        return out;
    }

    std::vector<std::string> gloss_to_text(std::vector<std::string> const& glosses)
    {
        std::vector<std::string> words;
        words.reserve(glosses.size() + 2);
        words.push_back("le");
        for (auto const& g : glosses) {
            std::string w = g;
            std::transform(w.begin(), w.end(), w.begin(),
                [](unsigned char c) { return char(std::tolower(c)); });
            words.push_back(w);
        }
        words.push_back("fin");
        return words;
    }

    namespace {

        std::string gloss_token(std::size_t idx)
        {
            std::ostringstream os;
            os << "G" << (idx < 10 ? "0" : "") << idx;
            return os.str();
        }

        la::matrix prototype(std::uint64_t seed, std::string const& tag,
            std::size_t rows, std::size_t cols, double lo, double hi)
        {
            rng::generator gen(rng::derive(seed, tag));
            la::matrix m(rows, cols);
            for (std::size_t i = 0; i < m.size(); ++i) {
                m.data()[i] = gen.uniform(lo, hi);
            }
            return m;
        }

        void add_noise(la::matrix& m, double sigma, rng::generator& gen,
            bool clamp_unit)
        {
            if (sigma > 0.0) {
                for (std::size_t i = 0; i < m.size(); ++i) {
                    m.data()[i] += sigma * gen.normal();
                }
            }
            if (clamp_unit) {
                for (std::size_t i = 0; i < m.size(); ++i) {
                    m.data()[i] = std::clamp(m.data()[i], 0.0, 1.0);
                }
            }
        }

    }

    std::array<std::string, 3> synth_corpus(synth_config const& cfg, std::string const& out_dir)
    {
        if (cfg.n_samples == 0 || cfg.gloss_vocab_size == 0 || cfg.text_vocab_size == 0
            || cfg.frames_per_gloss == 0 || cfg.d_a == 0 || cfg.d_o == 0) {
            throw std::invalid_argument("synth_corpus: all sizes must be positive");
        }
        if (cfg.min_glosses < 1 || cfg.max_glosses < cfg.min_glosses) {
            throw std::invalid_argument("synth_corpus: bad gloss length range");
        }
        // transduction adds 2 function words; <s> and </s> complete the table
        std::size_t expect_text = cfg.gloss_vocab_size + 2 + 2;
        if (cfg.text_vocab_size != expect_text) {
            throw std::invalid_argument("synth_corpus: text_vocab_size must be "
                + std::to_string(expect_text) + " for gloss_vocab_size "
                + std::to_string(cfg.gloss_vocab_size));
        }

        fs::create_directories(fs::path(out_dir) / "samples");

        std::vector<std::string> rel_paths;
        for (std::size_t i = 0; i < cfg.n_samples; ++i) {
            rng::generator gen(rng::derive(cfg.seed, "sample." + std::to_string(i)));
            std::size_t len = cfg.min_glosses
                + std::size_t(gen.below(cfg.max_glosses - cfg.min_glosses + 1));
            std::vector<std::string> glosses;
            std::vector<std::size_t> gloss_ids;
            // first gloss cycles through the vocabulary so every token is
            // guaranteed to appear somewhere in the corpus; no immediate
            // repeats (vocabulary permitting), since identical noiseless
            // frame blocks carry no cue for the blank between repeats
            gloss_ids.push_back(i % cfg.gloss_vocab_size);
            for (std::size_t k = 1; k < len; ++k) {
                std::size_t gid = std::size_t(gen.below(cfg.gloss_vocab_size));
                while (cfg.gloss_vocab_size > 1 && gid == gloss_ids.back()) {
                    gid = std::size_t(gen.below(cfg.gloss_vocab_size));
                }
                gloss_ids.push_back(gid);
            }
            for (std::size_t gid : gloss_ids) {
                glosses.push_back(gloss_token(gid));
            }

            sample_record s;
            s.id = "synth_" + std::to_string(i);
            s.glosses = glosses;
            s.text = gloss_to_text(glosses);
            for (std::size_t gid : gloss_ids) {
                std::string tag = gloss_token(gid);
                la::matrix app = prototype(cfg.seed, "proto.app." + tag, n_regions, cfg.d_a,
                    -1.0, 1.0);
                la::matrix flo = prototype(cfg.seed, "proto.flow." + tag, n_regions, cfg.d_o,
                    -1.0, 1.0);
                la::matrix face = prototype(cfg.seed, "proto.face." + tag, face_points, 2,
                    0.05, 0.95);
                la::matrix lh = prototype(cfg.seed, "proto.lhand." + tag, hand_points, 2,
                    0.05, 0.95);
                la::matrix rh = prototype(cfg.seed, "proto.rhand." + tag, hand_points, 2,
                    0.05, 0.95);
                for (std::size_t f = 0; f < cfg.frames_per_gloss; ++f) {
                    frame_bundle fb;
                    fb.appearance = app;
                    fb.flow = flo;
                    fb.face = face;
                    fb.lhand = lh;
                    fb.rhand = rh;
                    add_noise(fb.appearance, cfg.noise_sigma, gen, false);
                    add_noise(fb.flow, cfg.noise_sigma, gen, false);
                    add_noise(fb.face, cfg.noise_sigma, gen, true);
                    add_noise(fb.lhand, cfg.noise_sigma, gen, true);
                    add_noise(fb.rhand, cfg.noise_sigma, gen, true);
                    s.frames.push_back(std::move(fb));
                }
            }
            std::string rel = "samples/" + s.id + ".json";
            write_sample(s, (fs::path(out_dir) / rel).string());
            rel_paths.push_back(rel);
        }

        // 80/10/10 by sample index
        std::size_t n_train = (cfg.n_samples * 8) / 10;
        std::size_t n_dev = cfg.n_samples / 10;
        if (n_train == 0) {
            n_train = cfg.n_samples;
        }
        std::array<std::string, 3> names = {"train", "dev", "test"};
        std::array<std::string, 3> manifest_paths;
        for (int sp = 0; sp < 3; ++sp) {
            manifest m;
            m.dataset = "synth";
            m.split = names[std::size_t(sp)];
            m.d_a = cfg.d_a;
            m.d_o = cfg.d_o;
            m.seed = cfg.seed;
            std::size_t lo = sp == 0 ? 0 : sp == 1 ? n_train : n_train + n_dev;
            std::size_t hi = sp == 0 ? n_train : sp == 1 ? std::min(n_train + n_dev, cfg.n_samples)
                                               : cfg.n_samples;
            for (std::size_t i = lo; i < hi && i < cfg.n_samples; ++i) {
                m.paths.push_back(rel_paths[i]);
            }
            std::string mp = (fs::path(out_dir) / ("manifest." + m.split + ".txt")).string();
            m.save(mp);
            manifest_paths[std::size_t(sp)] = mp;
        }
        return manifest_paths;
    }

}
