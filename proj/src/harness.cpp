#include "dr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dr/generator.hpp"
#include "dr/perception.hpp"
#include "dr/raster.hpp"
#include "dr/rng.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace dr {

namespace {

// --- base64 ---------------------------------------------------------------

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::string& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < bytes.size()) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                     static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
        i += 3;
    }
    std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rest == 2) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::string base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw DataError("base64: length not a multiple of 4");
    std::string out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            char c = text[i + static_cast<std::size_t>(k)];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = b64_value(c);
                if (vals[k] < 0) throw DataError("base64: invalid character");
            }
        }
        unsigned v = (static_cast<unsigned>(vals[0]) << 18) |
                     (static_cast<unsigned>(vals[1]) << 12) |
                     (static_cast<unsigned>(vals[2]) << 6) |
                     static_cast<unsigned>(vals[3]);
        out.push_back(static_cast<char>((v >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<char>(v & 0xFF));
    }
    return out;
}

// --- scene JSON -------------------------------------------------------------

ordered_json scene_to_json(const Scene& scene) {
    ordered_json j;
    j["width"] = scene.width;
    j["height"] = scene.height;
    ordered_json prims = ordered_json::array();
    for (const Primitive& p : scene.primitives) {
        ordered_json pj;
        pj["kind"] = to_string(p.kind);
        pj["cx"] = p.cx;
        pj["cy"] = p.cy;
        pj["size"] = p.size;
        pj["rotation_deg"] = p.rotation_deg;
        pj["filled"] = p.filled;
        prims.push_back(std::move(pj));
    }
    j["primitives"] = std::move(prims);
    return j;
}

Scene scene_from_json(const ordered_json& j) {
    Scene scene;
    scene.width = j.at("width").get<int>();
    scene.height = j.at("height").get<int>();
    for (const auto& pj : j.at("primitives")) {
        Primitive p;
        p.kind = shape_kind_from_string(pj.at("kind").get<std::string>());
        p.cx = pj.at("cx").get<double>();
        p.cy = pj.at("cy").get<double>();
        p.size = pj.at("size").get<double>();
        p.rotation_deg = pj.at("rotation_deg").get<double>();
        p.filled = pj.at("filled").get<bool>();
        scene.primitives.push_back(p);
    }
    return scene;
}

std::string format_accuracy(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

std::string predicted_knowledge_text(const Prediction& p) {
    std::ostringstream os;
    if (p.predicted_rf) {
        const RelationalFeatures& rf = *p.predicted_rf;
        if (rf.rho) {
            os << "rho=" << std::lround(*rf.rho);
        } else if (!rf.chi.empty()) {
            os << "chi=" << rf.chi_total();
        } else if (!rf.sigma.empty()) {
            os << "sigma=" << to_string(rf.sigma.front());
        } else {
            os << "rf=empty";
        }
    } else if (p.predicted_vector) {
        os << "vector[" << p.predicted_vector->size() << "]";
    } else {
        os << "none";
    }
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

std::array<int, kCategoryCount> CorpusManifest::category_counts() const {
    std::array<int, kCategoryCount> counts{};
    for (const ProblemRecord& rec : problems)
        if (rec.problem.true_category)
            ++counts[static_cast<std::size_t>(*rec.problem.true_category)];
    return counts;
}

CorpusManifest corpus_from_problems(std::vector<ProblemSpace> problems,
                                    std::uint64_t seed) {
    CorpusManifest corpus;
    corpus.seed = seed;
    if (!problems.empty()) corpus.panel_size = problems[0].panels[0].width;
    int i = 0;
    for (ProblemSpace& p : problems) {
        char id[16];
        std::snprintf(id, sizeof id, "p%04d", i++);
        corpus.problems.push_back({id, std::move(p)});
    }
    return corpus;
}

void save_corpus(const CorpusManifest& corpus, const std::string& path,
                 bool inline_panels) {
    ordered_json root;
    root["format_version"] = corpus.format_version;
    root["seed"] = corpus.seed;
    root["panel_size"] = corpus.panel_size;
    root["problem_count"] = corpus.problems.size();
    ordered_json counts;
    auto by_category = corpus.category_counts();
    for (Category c : all_categories())
        counts[to_string(c)] = by_category[static_cast<std::size_t>(c)];
    root["category_counts"] = std::move(counts);
    root["panels_inline"] = inline_panels;

    fs::path manifest_path(path);
    fs::path panel_dir;
    std::string panel_dir_name;
    if (!inline_panels) {
        panel_dir_name = manifest_path.stem().string() + "_panels";
        panel_dir = manifest_path.parent_path() / panel_dir_name;
        fs::create_directories(panel_dir);
    }

    ordered_json problems = ordered_json::array();
    for (const ProblemRecord& rec : corpus.problems) {
        validate(rec.problem);
        ordered_json pj;
        pj["id"] = rec.id;
        pj["answer_index"] = rec.problem.answer_index;
        if (rec.problem.true_category)
            pj["true_category"] = to_string(*rec.problem.true_category);
        ordered_json panels = ordered_json::array();
        for (int k = 0; k < kPanelCount; ++k) {
            std::string pgm = encode_pgm(rec.problem.panels[k]);
            if (inline_panels) {
                panels.push_back(base64_encode(pgm));
            } else {
                std::string name = rec.id + "_" + std::to_string(k + 1) + ".pgm";
                std::ofstream f(panel_dir / name, std::ios::binary);
                if (!f) throw DataError("cannot write panel file for " + rec.id);
                f.write(pgm.data(), static_cast<std::streamsize>(pgm.size()));
                panels.push_back(panel_dir_name + "/" + name);
            }
        }
        pj[inline_panels ? "panels_b64" : "panels"] = std::move(panels);
        if (rec.problem.scenes) {
            ordered_json scenes = ordered_json::array();
            for (const Scene& s : *rec.problem.scenes)
                scenes.push_back(scene_to_json(s));
            pj["scenes"] = std::move(scenes);
        }
        problems.push_back(std::move(pj));
    }
    root["problems"] = std::move(problems);

    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open for writing: " + path);
    file << root.dump(2) << "\n";
    if (!file) throw DataError("write failed: " + path);
}

CorpusManifest load_corpus(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open corpus: " + path);
    ordered_json root;
    try {
        file >> root;
    } catch (const std::exception& e) {
        throw DataError("corpus parse error in " + path + ": " + e.what());
    }

    CorpusManifest corpus;
    if (!root.contains("format_version"))
        throw DataError("corpus missing mandatory format_version");
    corpus.format_version = root["format_version"].get<int>();
    if (corpus.format_version != kManifestVersion)
        throw DataError("unsupported corpus format_version " +
                        std::to_string(corpus.format_version));
    corpus.seed = root.value("seed", 0ULL);
    corpus.panel_size = root.value("panel_size", 0);
    bool inline_panels = root.value("panels_inline", false);

    const fs::path base = fs::path(path).parent_path();
    for (const auto& pj : root.at("problems")) {
        ProblemRecord rec;
        rec.id = pj.at("id").get<std::string>();
        rec.problem.answer_index = pj.at("answer_index").get<int>();
        if (pj.contains("true_category"))
            rec.problem.true_category =
                category_from_string(pj["true_category"].get<std::string>());

        const char* key = inline_panels ? "panels_b64" : "panels";
        if (!pj.contains(key))
            throw DataError("problem " + rec.id + ": missing " + key);
        const auto& panels = pj[key];
        if (panels.size() != kPanelCount)
            throw DataError("problem " + rec.id + ": expected 7 panels");
        for (int k = 0; k < kPanelCount; ++k) {
            std::string pgm;
            if (inline_panels) {
                pgm = base64_decode(panels[static_cast<std::size_t>(k)]
                                        .get<std::string>());
            } else {
                fs::path panel_path =
                    base / panels[static_cast<std::size_t>(k)].get<std::string>();
                std::ifstream pf(panel_path, std::ios::binary);
                if (!pf)
                    throw DataError("problem " + rec.id + ": missing panel file " +
                                    panel_path.string());
                std::ostringstream os;
                os << pf.rdbuf();
                pgm = os.str();
            }
            try {
                rec.problem.panels[k] = decode_pgm(pgm);
            } catch (const DataError& e) {
                throw DataError("problem " + rec.id + ": " + e.what());
            }
            if (corpus.panel_size > 0 &&
                (rec.problem.panels[k].width != corpus.panel_size ||
                 rec.problem.panels[k].height != corpus.panel_size))
                throw DataError("problem " + rec.id +
                                ": panel size differs from manifest panel_size");
        }
        if (pj.contains("scenes")) {
            const auto& scenes = pj["scenes"];
            if (scenes.size() != kPanelCount)
                throw DataError("problem " + rec.id + ": expected 7 scenes");
            std::array<Scene, kPanelCount> arr;
            for (int k = 0; k < kPanelCount; ++k)
                arr[k] = scene_from_json(scenes[static_cast<std::size_t>(k)]);
            rec.problem.scenes = std::move(arr);
        }
        validate(rec.problem);
        corpus.problems.push_back(std::move(rec));
    }

    if (root.contains("problem_count") &&
        root["problem_count"].get<std::size_t>() != corpus.problems.size())
        throw DataError("corpus problem_count does not match the record list");
    if (root.contains("category_counts")) {
        auto actual = corpus.category_counts();
        for (Category c : all_categories()) {
            const std::string name = to_string(c);
            if (root["category_counts"].contains(name) &&
                root["category_counts"][name].get<int>() !=
                    actual[static_cast<std::size_t>(c)])
                throw DataError("corpus category_counts mismatch for " + name);
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

namespace {

bool all_labeled(const CorpusManifest& corpus) {
    for (const ProblemRecord& rec : corpus.problems)
        if (!rec.problem.true_category) return false;
    return true;
}

}  // namespace

SplitResult split(const CorpusManifest& corpus, double train_fraction,
                  std::uint64_t seed) {
    if (corpus.problems.empty()) throw DataError("split: empty corpus");
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw ConfigError("split: train_fraction must be in (0,1)");

    SplitResult result;
    const int n = static_cast<int>(corpus.problems.size());

    std::array<std::vector<int>, kCategoryCount> buckets;
    bool stratify = all_labeled(corpus);
    if (stratify) {
        for (int i = 0; i < n; ++i)
            buckets[static_cast<std::size_t>(
                        *corpus.problems[static_cast<std::size_t>(i)]
                             .problem.true_category)]
                .push_back(i);
        for (const auto& bucket : buckets)
            if (!bucket.empty() && bucket.size() < 2) stratify = false;
    }

    if (stratify) {
        for (Category c : all_categories()) {
            auto& bucket = buckets[static_cast<std::size_t>(c)];
            if (bucket.empty()) continue;
            Rng rng(splitmix64(seed) ^
                    (static_cast<std::uint64_t>(c) + 0x9E37));
            rng.shuffle(bucket);
            int n_train = static_cast<int>(
                std::lround(train_fraction * static_cast<double>(bucket.size())));
            n_train = std::clamp(n_train, 1, static_cast<int>(bucket.size()) - 1);
            for (std::size_t i = 0; i < bucket.size(); ++i)
                (static_cast<int>(i) < n_train ? result.train_indices
                                               : result.test_indices)
                    .push_back(bucket[i]);
        }
    } else {
        result.stratified = false;
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(splitmix64(seed) ^ 0x57A11);
        rng.shuffle(order);
        int n_train = std::clamp(
            static_cast<int>(std::lround(train_fraction * n)), 1, n - 1);
        for (int i = 0; i < n; ++i)
            (i < n_train ? result.train_indices : result.test_indices)
                .push_back(order[static_cast<std::size_t>(i)]);
    }
    std::sort(result.train_indices.begin(), result.train_indices.end());
    std::sort(result.test_indices.begin(), result.test_indices.end());
    return result;
}

std::vector<int> fold_assignment(const CorpusManifest& corpus, int folds,
                                 std::uint64_t seed) {
    const int n = static_cast<int>(corpus.problems.size());
    if (folds < 2) throw ConfigError("cross-validation needs folds >= 2");
    if (n < folds)
        throw ConfigError("cross-validation needs at least one problem per fold");

    std::vector<int> assignment(static_cast<std::size_t>(n), 0);
    if (all_labeled(corpus)) {
        for (Category c : all_categories()) {
            std::vector<int> bucket;
            for (int i = 0; i < n; ++i)
                if (*corpus.problems[static_cast<std::size_t>(i)]
                         .problem.true_category == c)
                    bucket.push_back(i);
            Rng rng(splitmix64(seed) ^
                    (static_cast<std::uint64_t>(c) + 0xF01D));
            rng.shuffle(bucket);
            for (std::size_t i = 0; i < bucket.size(); ++i)
                assignment[static_cast<std::size_t>(bucket[i])] =
                    static_cast<int>(i) % folds;
        }
    } else {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(splitmix64(seed) ^ 0xF01D5);
        rng.shuffle(order);
        for (int i = 0; i < n; ++i)
            assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
                i % folds;
    }
    return assignment;
}

// ---------------------------------------------------------------------------
// Training orchestration
// ---------------------------------------------------------------------------

namespace {

std::vector<KnowledgeBase> build_kb_cache(const CorpusManifest& corpus,
                                          const std::vector<int>& indices,
                                          const FeatureConfig& cfg,
                                          std::vector<KnowledgeBase>& cache,
                                          std::vector<char>& cached) {
    if (cache.size() != corpus.problems.size()) {
        cache.resize(corpus.problems.size());
        cached.assign(corpus.problems.size(), 0);
    }
    for (int idx : indices) {
        std::size_t i = static_cast<std::size_t>(idx);
        if (!cached[i]) {
            cache[i] = acquire_knowledge(corpus.problems[i].problem, cfg);
            cached[i] = 1;
        }
    }
    return cache;
}

ModelSet train_models_cached(const CorpusManifest& corpus,
                             const std::vector<int>& train_indices,
                             const SolverConfig& solver_cfg,
                             const TrainSettings& tcfg,
                             std::vector<KnowledgeBase>& kb_cache,
                             std::vector<char>& kb_cached) {
    validate(solver_cfg);
    build_kb_cache(corpus, train_indices, solver_cfg.features, kb_cache,
                   kb_cached);

    std::array<std::vector<TrainSample>, kCategoryCount> cat1;
    std::vector<TrainSample> ot_samples, image_samples, rf_samples;
    for (int idx : train_indices) {
        const ProblemRecord& rec = corpus.problems[static_cast<std::size_t>(idx)];
        const KnowledgeBase& kb = kb_cache[static_cast<std::size_t>(idx)];
        Category cat = rec.problem.true_category ? *rec.problem.true_category
                                                 : classify(kb);
        int answer = rec.problem.answer_index;
        if (is_category1(cat))
            cat1[static_cast<std::size_t>(cat)].push_back(
                make_category1_sample(kb, cat, answer));
        else
            ot_samples.push_back(make_image_sample(rec.problem.panels, answer,
                                                   solver_cfg.grid_size));
        if (tcfg.ablations) {
            image_samples.push_back(make_image_sample(rec.problem.panels, answer,
                                                      solver_cfg.grid_size));
            rf_samples.push_back(make_rf_sample(kb, answer));
        }
    }

    auto fit = [&](LstmModel& model, const std::vector<TrainSample>& data,
                   double lr, int epochs, int batch, std::uint64_t salt) {
        if (data.empty()) return;  // untrained init model; matching still runs
        TrainConfig cfg;
        cfg.learning_rate = lr;
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        cfg.seed = splitmix64(tcfg.seed ^ salt);
        cfg.clip_norm = tcfg.clip_norm;
        train(model, data, cfg);
    };

    int grid_dim = solver_cfg.grid_size * solver_cfg.grid_size;
    ModelSet models;
    models.rt = make_lstm(2, tcfg.cat1_hidden, 2, splitmix64(tcfg.seed ^ 0xA1));
    models.ct = make_lstm(1, tcfg.cat1_hidden, 1, splitmix64(tcfg.seed ^ 0xA2));
    models.ss = make_lstm(1, tcfg.cat1_hidden, 1, splitmix64(tcfg.seed ^ 0xA3));
    models.ot = make_lstm(grid_dim, tcfg.image_hidden, grid_dim,
                          splitmix64(tcfg.seed ^ 0xA4));
    fit(models.rt, cat1[0], tcfg.cat1_lr, tcfg.cat1_epochs, tcfg.cat1_batch, 0xB1);
    fit(models.ct, cat1[1], tcfg.cat1_lr, tcfg.cat1_epochs, tcfg.cat1_batch, 0xB2);
    fit(models.ss, cat1[2], tcfg.cat1_lr, tcfg.cat1_epochs, tcfg.cat1_batch, 0xB3);
    fit(models.ot, ot_samples, tcfg.image_lr, tcfg.image_epochs,
        tcfg.image_batch, 0xB4);
    if (tcfg.ablations) {
        models.image = make_lstm(grid_dim, tcfg.image_hidden, grid_dim,
                                 splitmix64(tcfg.seed ^ 0xA5));
        models.rf = make_lstm(4, tcfg.cat1_hidden, 4, splitmix64(tcfg.seed ^ 0xA6));
        fit(*models.image, image_samples, tcfg.image_lr, tcfg.image_epochs,
            tcfg.image_batch, 0xB5);
        fit(*models.rf, rf_samples, tcfg.cat1_lr, tcfg.cat1_epochs,
            tcfg.cat1_batch, 0xB6);
    }
    return models;
}

}  // namespace

ModelSet train_models(const CorpusManifest& corpus,
                      const std::vector<int>& train_indices,
                      const SolverConfig& solver_cfg,
                      const TrainSettings& train_cfg) {
    std::vector<KnowledgeBase> cache;
    std::vector<char> cached;
    return train_models_cached(corpus, train_indices, solver_cfg, train_cfg,
                               cache, cached);
}

void save_models(const ModelSet& models, const std::string& dir) {
    fs::create_directories(dir);
    fs::path base(dir);
    save_model(models.rt, (base / "rt.ckpt").string());
    save_model(models.ct, (base / "ct.ckpt").string());
    save_model(models.ss, (base / "ss.ckpt").string());
    save_model(models.ot, (base / "ot.ckpt").string());
    if (models.image) save_model(*models.image, (base / "image.ckpt").string());
    if (models.rf) save_model(*models.rf, (base / "rf.ckpt").string());
}

ModelSet load_models(const std::string& dir, bool need_ablations) {
    fs::path base(dir);
    ModelSet models;
    models.rt = load_model((base / "rt.ckpt").string());
    models.ct = load_model((base / "ct.ckpt").string());
    models.ss = load_model((base / "ss.ckpt").string());
    models.ot = load_model((base / "ot.ckpt").string());
    if (fs::exists(base / "image.ckpt"))
        models.image = load_model((base / "image.ckpt").string());
    if (fs::exists(base / "rf.ckpt"))
        models.rf = load_model((base / "rf.ckpt").string());
    if (need_ablations && (!models.image || !models.rf))
        throw ConfigError("ablation checkpoints missing in " + dir);
    return models;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

// Detector accuracy against ground-truth scenes: a primitive counts as
// correct when the nearest unclaimed detection matches its kind and fill.
void score_detector(const ProblemSpace& problem, long long& correct,
                    long long& total) {
    if (!problem.scenes) return;
    for (int k = 0; k < kPanelCount; ++k) {
        const Scene& scene = (*problem.scenes)[k];
        std::vector<DetectedShape> dets = detect_shapes(problem.panels[k]);
        std::vector<char> claimed(dets.size(), 0);
        for (const Primitive& prim : scene.primitives) {
            ++total;
            double px = prim.cx * scene.width;
            double py = prim.cy * scene.height;
            double tol = std::max(5.0, prim.size * std::min(scene.width,
                                                            scene.height));
            int best = -1;
            double best_d = tol;
            for (std::size_t d = 0; d < dets.size(); ++d) {
                if (claimed[d]) continue;
                double cx = (dets[d].bbox.x0 + dets[d].bbox.x1) / 2.0;
                double cy = (dets[d].bbox.y0 + dets[d].bbox.y1) / 2.0;
                double dist = std::hypot(px - cx, py - cy);
                if (dist < best_d) {
                    best_d = dist;
                    best = static_cast<int>(d);
                }
            }
            if (best < 0) continue;
            claimed[static_cast<std::size_t>(best)] = 1;
            if (dets[static_cast<std::size_t>(best)].kind == prim.kind &&
                dets[static_cast<std::size_t>(best)].filled == prim.filled)
                ++correct;
        }
    }
}

}  // namespace

EvalReport evaluate(const CorpusManifest& corpus,
                    const std::vector<int>& test_indices,
                    const ModelSet& models, const SolverConfig& cfg,
                    int threads) {
    validate(cfg);
    for (int idx : test_indices) {
        if (idx < 0 || idx >= static_cast<int>(corpus.problems.size()))
            throw StructuralError("evaluate: test index out of range");
        if (!corpus.problems[static_cast<std::size_t>(idx)]
                 .problem.true_category)
            throw DataError("evaluate: problem " +
                            corpus.problems[static_cast<std::size_t>(idx)].id +
                            " has no true_category label");
    }

    // Solve every problem; slots are index-addressed so any worker schedule
    // reduces to the same report.
    std::vector<SolveRecord> records(test_indices.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= test_indices.size()) break;
            const ProblemRecord& rec =
                corpus.problems[static_cast<std::size_t>(test_indices[i])];
            records[i] = solve(rec.problem.panels, models, cfg);
        }
    };
    int worker_count = std::max(1, threads);
    if (worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < worker_count; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    EvalReport report;
    long long det_correct = 0, det_total = 0;
    for (std::size_t i = 0; i < test_indices.size(); ++i) {
        const ProblemRecord& rec =
            corpus.problems[static_cast<std::size_t>(test_indices[i])];
        const SolveRecord& sol = records[i];
        Category truth = *rec.problem.true_category;

        DecisionRecord decision;
        decision.problem_id = rec.id;
        decision.true_category = truth;
        decision.detected_category = sol.detected_category;
        decision.chosen_option = sol.prediction.chosen_option;
        decision.answer_index = rec.problem.answer_index;
        decision.correct = decision.chosen_option == decision.answer_index;
        decision.predicted_knowledge = predicted_knowledge_text(sol.prediction);
        report.decisions.push_back(std::move(decision));

        ++report.confusion[static_cast<std::size_t>(truth)]
                          [static_cast<std::size_t>(sol.detected_category)];
        ++report.per_category_count[static_cast<std::size_t>(truth)];
        if (report.decisions.back().correct)
            report.per_category_accuracy[static_cast<std::size_t>(truth)] += 1.0;

        score_detector(rec.problem, det_correct, det_total);
    }

    long long correct_total = 0;
    for (Category c : all_categories()) {
        std::size_t i = static_cast<std::size_t>(c);
        correct_total += static_cast<long long>(report.per_category_accuracy[i]);
        if (report.per_category_count[i] > 0)
            report.per_category_accuracy[i] /= report.per_category_count[i];
    }
    report.mean_accuracy =
        test_indices.empty()
            ? 0.0
            : static_cast<double>(correct_total) /
                  static_cast<double>(test_indices.size());
    report.detector_accuracy =
        det_total > 0 ? static_cast<double>(det_correct) / det_total : -1.0;
    return report;
}

EvalReport cross_validate(const CorpusManifest& corpus, int folds,
                          std::uint64_t seed, const SolverConfig& solver_cfg,
                          const TrainSettings& train_cfg, int threads) {
    std::vector<int> assignment = fold_assignment(corpus, folds, seed);

    // Knowledge extraction is label-free and fold-independent; compute once.
    std::vector<KnowledgeBase> kb_cache;
    std::vector<char> kb_cached;

    EvalReport report;
    std::array<long long, kCategoryCount> correct{};
    std::array<long long, kCategoryCount> count{};
    double det_acc_sum = 0.0;
    int det_acc_folds = 0;
    double fold_acc_sum = 0.0;

    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_idx, test_idx;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            (assignment[i] == f ? test_idx : train_idx)
                .push_back(static_cast<int>(i));
        ModelSet models = train_models_cached(corpus, train_idx, solver_cfg,
                                              train_cfg, kb_cache, kb_cached);
        EvalReport fold_report =
            evaluate(corpus, test_idx, models, solver_cfg, threads);

        FoldStats stats;
        stats.fold = f;
        stats.accuracy = fold_report.mean_accuracy;
        stats.per_category = fold_report.per_category_accuracy;
        stats.counts = fold_report.per_category_count;
        report.folds.push_back(stats);
        fold_acc_sum += fold_report.mean_accuracy;

        for (Category c : all_categories()) {
            std::size_t i = static_cast<std::size_t>(c);
            correct[i] += static_cast<long long>(
                std::lround(fold_report.per_category_accuracy[i] *
                            fold_report.per_category_count[i]));
            count[i] += fold_report.per_category_count[i];
            for (Category d : all_categories())
                report.confusion[i][static_cast<std::size_t>(d)] +=
                    fold_report.confusion[i][static_cast<std::size_t>(d)];
        }
        if (fold_report.detector_accuracy >= 0.0) {
            det_acc_sum += fold_report.detector_accuracy;
            ++det_acc_folds;
        }
        for (DecisionRecord& d : fold_report.decisions)
            report.decisions.push_back(std::move(d));
    }

    for (Category c : all_categories()) {
        std::size_t i = static_cast<std::size_t>(c);
        report.per_category_count[i] = static_cast<int>(count[i]);
        report.per_category_accuracy[i] =
            count[i] > 0 ? static_cast<double>(correct[i]) / count[i] : 0.0;
    }
    report.mean_accuracy = fold_acc_sum / folds;  // average of fold accuracies
    report.detector_accuracy =
        det_acc_folds > 0 ? det_acc_sum / det_acc_folds : -1.0;
    return report;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

ReportFormat report_format_from_string(const std::string& name) {
    if (name == "text") return ReportFormat::Text;
    if (name == "json") return ReportFormat::Json;
    if (name == "csv") return ReportFormat::Csv;
    throw ConfigError("unknown report format: " + name);
}

namespace {

std::string report_text(const EvalReport& r) {
    std::ostringstream os;
    os << "== evaluation report ==\n";
    long long total = 0;
    for (int c : r.per_category_count) total += c;
    os << "problems: " << total << "\n";
    os << "detector accuracy: "
       << (r.detector_accuracy >= 0.0 ? format_accuracy(r.detector_accuracy)
                                      : std::string("n/a"))
       << "\n\n";
    os << "category   accuracy  count\n";
    for (Category c : all_categories()) {
        std::size_t i = static_cast<std::size_t>(c);
        os << to_string(c) << "         "
           << format_accuracy(r.per_category_accuracy[i]) << "  "
           << r.per_category_count[i] << "\n";
    }
    os << "average    " << format_accuracy(r.mean_accuracy) << "  " << total
       << "\n\n";
    os << "confusion (rows true, cols detected; rt ct ss ot):\n";
    for (Category c : all_categories()) {
        std::size_t i = static_cast<std::size_t>(c);
        os << to_string(c);
        for (Category d : all_categories())
            os << "  " << r.confusion[i][static_cast<std::size_t>(d)];
        os << "\n";
    }
    if (!r.folds.empty()) {
        os << "\nfolds:\n";
        for (const FoldStats& f : r.folds)
            os << "fold " << f.fold << ": accuracy "
               << format_accuracy(f.accuracy) << "\n";
    }
    if (!r.config_echo.empty()) os << "\nconfig: " << r.config_echo << "\n";
    return os.str();
}

std::string report_json(const EvalReport& r) {
    ordered_json j;
    j["format_version"] = 1;
    ordered_json cats;
    long long total = 0;
    for (Category c : all_categories()) {
        std::size_t i = static_cast<std::size_t>(c);
        ordered_json cj;
        cj["accuracy"] = r.per_category_accuracy[i];
        cj["count"] = r.per_category_count[i];
        cats[to_string(c)] = std::move(cj);
        total += r.per_category_count[i];
    }
    j["categories"] = std::move(cats);
    j["mean_accuracy"] = r.mean_accuracy;
    j["problem_count"] = total;
    if (r.detector_accuracy >= 0.0)
        j["detector_accuracy"] = r.detector_accuracy;
    else
        j["detector_accuracy"] = nullptr;
    ordered_json conf = ordered_json::array();
    for (Category c : all_categories()) {
        ordered_json row = ordered_json::array();
        for (Category d : all_categories())
            row.push_back(r.confusion[static_cast<std::size_t>(c)]
                                     [static_cast<std::size_t>(d)]);
        conf.push_back(std::move(row));
    }
    j["confusion"] = std::move(conf);
    if (!r.folds.empty()) {
        ordered_json folds = ordered_json::array();
        for (const FoldStats& f : r.folds) {
            ordered_json fj;
            fj["fold"] = f.fold;
            fj["accuracy"] = f.accuracy;
            ordered_json per;
            for (Category c : all_categories()) {
                std::size_t i = static_cast<std::size_t>(c);
                per[to_string(c)] = ordered_json{
                    {"accuracy", f.per_category[i]}, {"count", f.counts[i]}};
            }
            fj["categories"] = std::move(per);
            folds.push_back(std::move(fj));
        }
        j["folds"] = std::move(folds);
    }
    ordered_json decisions = ordered_json::array();
    for (const DecisionRecord& d : r.decisions) {
        ordered_json dj;
        dj["id"] = d.problem_id;
        dj["true_category"] = to_string(d.true_category);
        dj["detected_category"] = to_string(d.detected_category);
        dj["chosen_option"] = d.chosen_option;
        dj["answer_index"] = d.answer_index;
        dj["correct"] = d.correct;
        dj["predicted_knowledge"] = d.predicted_knowledge;
        decisions.push_back(std::move(dj));
    }
    j["decisions"] = std::move(decisions);
    if (!r.config_echo.empty()) j["config"] = r.config_echo;
    return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "category,accuracy,count\n";
    long long total = 0;
    for (Category c : all_categories()) {
        std::size_t i = static_cast<std::size_t>(c);
        os << to_string(c) << "," << format_accuracy(r.per_category_accuracy[i])
           << "," << r.per_category_count[i] << "\n";
        total += r.per_category_count[i];
    }
    os << "average," << format_accuracy(r.mean_accuracy) << "," << total << "\n";
    os << "confusion,rt,ct,ss,ot\n";
    for (Category c : all_categories()) {
        std::size_t i = static_cast<std::size_t>(c);
        os << to_string(c);
        for (Category d : all_categories())
            os << "," << r.confusion[i][static_cast<std::size_t>(d)];
        os << "\n";
    }
    return os.str();
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::Text: return report_text(report);
        case ReportFormat::Json: return report_json(report);
        case ReportFormat::Csv: return report_csv(report);
    }
    throw StructuralError("invalid report format");
}

std::string render_decision(const DecisionRecord& d, ReportFormat format) {
    switch (format) {
        case ReportFormat::Text: {
            std::ostringstream os;
            os << "problem " << d.problem_id << ": detected "
               << to_string(d.detected_category) << ", predicted "
               << d.predicted_knowledge << ", chose option "
               << option_letter(d.chosen_option) << " (panel "
               << d.chosen_option << "), answer "
               << option_letter(d.answer_index) << " -> "
               << (d.correct ? "correct" : "wrong") << "\n";
            return os.str();
        }
        case ReportFormat::Json: {
            ordered_json dj;
            dj["id"] = d.problem_id;
            dj["true_category"] = to_string(d.true_category);
            dj["detected_category"] = to_string(d.detected_category);
            dj["chosen_option"] = d.chosen_option;
            dj["answer_index"] = d.answer_index;
            dj["correct"] = d.correct;
            dj["predicted_knowledge"] = d.predicted_knowledge;
            return dj.dump(2) + "\n";
        }
        case ReportFormat::Csv: {
            std::ostringstream os;
            os << "id,true_category,detected_category,chosen_option,"
                  "answer_index,correct,predicted_knowledge\n";
            os << d.problem_id << "," << to_string(d.true_category) << ","
               << to_string(d.detected_category) << "," << d.chosen_option
               << "," << d.answer_index << "," << (d.correct ? 1 : 0) << ","
               << d.predicted_knowledge << "\n";
            return os.str();
        }
    }
    throw StructuralError("invalid report format");
}

// ---------------------------------------------------------------------------
// Tool config
// ---------------------------------------------------------------------------

ToolConfig load_tool_config(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open config: " + path);
    ordered_json j;
    try {
        file >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    ToolConfig cfg;
    cfg.solver.features.rotation_threshold =
        j.value("rotation_threshold", cfg.solver.features.rotation_threshold);
    cfg.solver.features.dbscan_eps_fraction =
        j.value("dbscan_eps_fraction", cfg.solver.features.dbscan_eps_fraction);
    cfg.solver.features.dbscan_min_pts =
        j.value("dbscan_min_pts", cfg.solver.features.dbscan_min_pts);
    cfg.solver.grid_size = j.value("grid_size", cfg.solver.grid_size);
    if (j.contains("predictor")) {
        std::string p = j["predictor"].get<std::string>();
        if (p == "lstm")
            cfg.solver.predictor = PredictorMode::Lstm;
        else if (p == "arithmetic")
            cfg.solver.predictor = PredictorMode::Arithmetic;
        else
            throw ConfigError("config: unknown predictor " + p);
    }
    cfg.train.seed = j.value("train_seed", cfg.train.seed);
    cfg.train.cat1_hidden = j.value("cat1_hidden", cfg.train.cat1_hidden);
    cfg.train.cat1_epochs = j.value("cat1_epochs", cfg.train.cat1_epochs);
    cfg.train.cat1_lr = j.value("cat1_lr", cfg.train.cat1_lr);
    cfg.train.cat1_batch = j.value("cat1_batch", cfg.train.cat1_batch);
    cfg.train.image_hidden = j.value("image_hidden", cfg.train.image_hidden);
    cfg.train.image_epochs = j.value("image_epochs", cfg.train.image_epochs);
    cfg.train.image_lr = j.value("image_lr", cfg.train.image_lr);
    cfg.train.image_batch = j.value("image_batch", cfg.train.image_batch);
    cfg.train.clip_norm = j.value("clip_norm", cfg.train.clip_norm);
    cfg.train.ablations = j.value("ablations", cfg.train.ablations);
    validate(cfg.solver);
    return cfg;
}

}  // namespace dr
