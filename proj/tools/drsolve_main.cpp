// drsolve: generate, train on, and solve 4x1 diagrammatic reasoning puzzles.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dr/generator.hpp"
#include "dr/harness.hpp"
#include "dr/raster.hpp"
#include "dr/seqnet.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

struct CommonOpts {
    std::uint64_t seed = 42;
    std::string config_path;
    std::string out_path;
    std::string format = "text";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "random seed");
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--out", opts.out_path, "output path (default stdout)");
    cmd->add_option("--format", opts.format, "report format: text | json | csv")
        ->check(CLI::IsMember({"text", "json", "csv"}));
}

dr::ToolConfig resolve_config(const CommonOpts& opts) {
    if (!opts.config_path.empty()) return dr::load_tool_config(opts.config_path);
    return {};
}

void emit(const CommonOpts& opts, const std::string& content) {
    if (opts.out_path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream file(opts.out_path, std::ios::binary);
    if (!file) throw dr::DataError("cannot open for writing: " + opts.out_path);
    file << content;
    if (!file) throw dr::DataError("write failed: " + opts.out_path);
}

std::vector<int> indices_from_ids(const dr::CorpusManifest& corpus,
                                  const std::vector<std::string>& ids) {
    std::vector<int> out;
    for (const std::string& id : ids) {
        bool found = false;
        for (std::size_t i = 0; i < corpus.problems.size(); ++i) {
            if (corpus.problems[i].id == id) {
                out.push_back(static_cast<int>(i));
                found = true;
                break;
            }
        }
        if (!found) throw dr::DataError("split file names unknown problem " + id);
    }
    return out;
}

std::vector<int> all_indices(const dr::CorpusManifest& corpus) {
    std::vector<int> out(corpus.problems.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
    return out;
}

dr::SolverVariant variant_from_string(const std::string& name) {
    if (name == "full") return dr::SolverVariant::Full;
    if (name == "image") return dr::SolverVariant::ImageOnly;
    if (name == "rf") return dr::SolverVariant::RfMonolithic;
    throw dr::ConfigError("unknown solver variant: " + name);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drsolve: 4x1 diagrammatic reasoning engine"};
    app.require_subcommand(1);

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "generate a labeled corpus");
    CommonOpts gen_opts;
    add_common(gen_cmd, gen_opts);
    int gen_rt = 0, gen_ct = 0, gen_ss = 0, gen_ot = 0, gen_panel = 64;
    bool gen_inline = false;
    gen_cmd->add_option("--rt", gen_rt, "rotation problems");
    gen_cmd->add_option("--ct", gen_ct, "counting problems");
    gen_cmd->add_option("--ss", gen_ss, "scaling problems");
    gen_cmd->add_option("--ot", gen_ot, "other-type problems");
    gen_cmd->add_option("--panel-size", gen_panel, "panel size in pixels");
    gen_cmd->add_flag("--inline-panels", gen_inline,
                      "embed panels as base64 instead of sidecar PGM files");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the sequence models");
    CommonOpts train_opts;
    add_common(train_cmd, train_opts);
    std::string train_corpus, train_models_dir;
    double train_fraction = 0.7;
    train_cmd->add_option("--corpus", train_corpus, "corpus manifest")->required();
    train_cmd->add_option("--models", train_models_dir, "output model directory")
        ->required();
    train_cmd->add_option("--train-fraction", train_fraction,
                          "train split fraction (stratified)");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate trained models");
    CommonOpts eval_opts;
    add_common(eval_cmd, eval_opts);
    std::string eval_corpus, eval_models_dir, eval_split_file,
        eval_solver = "full";
    int eval_threads = 1;
    eval_cmd->add_option("--corpus", eval_corpus, "corpus manifest")->required();
    eval_cmd->add_option("--models", eval_models_dir, "model directory")
        ->required();
    eval_cmd->add_option("--split-file", eval_split_file,
                         "evaluate only the test ids from this split file");
    eval_cmd->add_option("--solver", eval_solver, "full | image | rf")
        ->check(CLI::IsMember({"full", "image", "rf"}));
    eval_cmd->add_option("--threads", eval_threads, "solver worker threads");

    // xval
    auto* xval_cmd = app.add_subcommand("xval", "k-fold cross validation");
    CommonOpts xval_opts;
    add_common(xval_cmd, xval_opts);
    std::string xval_corpus;
    int xval_folds = 10, xval_threads = 1;
    xval_cmd->add_option("--corpus", xval_corpus, "corpus manifest")->required();
    xval_cmd->add_option("--folds", xval_folds, "fold count");
    xval_cmd->add_option("--threads", xval_threads, "solver worker threads");

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "solve one problem");
    CommonOpts solve_opts;
    add_common(solve_cmd, solve_opts);
    std::string solve_corpus, solve_models_dir, solve_solver = "full";
    int solve_index = 0;
    std::vector<std::string> solve_panels;
    solve_cmd->add_option("--corpus", solve_corpus, "corpus manifest");
    solve_cmd->add_option("--index", solve_index, "problem index in the corpus");
    solve_cmd->add_option("--panels", solve_panels,
                          "7 PGM files (3 question + 4 options)")
        ->expected(7);
    solve_cmd->add_option("--models", solve_models_dir, "model directory")
        ->required();
    solve_cmd->add_option("--solver", solve_solver, "full | image | rf")
        ->check(CLI::IsMember({"full", "image", "rf"}));

    // gradcheck
    auto* grad_cmd = app.add_subcommand(
        "gradcheck", "verify analytic gradients against finite differences");
    CommonOpts grad_opts;
    add_common(grad_cmd, grad_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) {
            if (gen_opts.out_path.empty())
                throw dr::ConfigError("generate requires --out <manifest path>");
            dr::GeneratorSpec spec;
            spec.seed = gen_opts.seed;
            spec.panel_size = gen_panel;
            spec.counts = {gen_rt, gen_ct, gen_ss, gen_ot};
            dr::CorpusManifest corpus = dr::corpus_from_problems(
                dr::generate_corpus(spec), spec.seed);
            dr::save_corpus(corpus, gen_opts.out_path, gen_inline);
            std::cout << "wrote " << corpus.problems.size() << " problems to "
                      << gen_opts.out_path << "\n";
        } else if (train_cmd->parsed()) {
            dr::ToolConfig cfg = resolve_config(train_opts);
            cfg.train.seed = train_opts.seed;
            dr::CorpusManifest corpus = dr::load_corpus(train_corpus);
            dr::SplitResult sp = dr::split(corpus, train_fraction,
                                           train_opts.seed);
            dr::ModelSet models =
                dr::train_models(corpus, sp.train_indices, cfg.solver, cfg.train);
            dr::save_models(models, train_models_dir);

            ordered_json split_json;
            split_json["train_fraction"] = train_fraction;
            split_json["seed"] = train_opts.seed;
            split_json["stratified"] = sp.stratified;
            ordered_json train_ids = ordered_json::array();
            for (int i : sp.train_indices)
                train_ids.push_back(corpus.problems[static_cast<std::size_t>(i)].id);
            ordered_json test_ids = ordered_json::array();
            for (int i : sp.test_indices)
                test_ids.push_back(corpus.problems[static_cast<std::size_t>(i)].id);
            split_json["train"] = std::move(train_ids);
            split_json["test"] = std::move(test_ids);
            std::ofstream sf(fs::path(train_models_dir) / "split.json");
            if (!sf) throw dr::DataError("cannot write split file");
            sf << split_json.dump(2) << "\n";
            std::cout << "trained on " << sp.train_indices.size()
                      << " problems; models in " << train_models_dir << "\n";
        } else if (eval_cmd->parsed()) {
            dr::ToolConfig cfg = resolve_config(eval_opts);
            cfg.solver.variant = variant_from_string(eval_solver);
            dr::CorpusManifest corpus = dr::load_corpus(eval_corpus);
            bool need_ablations = cfg.solver.variant != dr::SolverVariant::Full;
            dr::ModelSet models =
                dr::load_models(eval_models_dir, need_ablations);
            std::vector<int> test_idx;
            if (!eval_split_file.empty()) {
                std::ifstream sf(eval_split_file);
                if (!sf)
                    throw dr::DataError("cannot open split file: " + eval_split_file);
                ordered_json sj;
                sf >> sj;
                std::vector<std::string> ids;
                for (const auto& id : sj.at("test"))
                    ids.push_back(id.get<std::string>());
                test_idx = indices_from_ids(corpus, ids);
            } else {
                test_idx = all_indices(corpus);
            }
            dr::EvalReport report = dr::evaluate(corpus, test_idx, models,
                                                 cfg.solver, eval_threads);
            emit(eval_opts,
                 dr::render_report(report,
                                   dr::report_format_from_string(eval_opts.format)));
        } else if (xval_cmd->parsed()) {
            dr::ToolConfig cfg = resolve_config(xval_opts);
            cfg.train.seed = xval_opts.seed;
            dr::CorpusManifest corpus = dr::load_corpus(xval_corpus);
            dr::EvalReport report =
                dr::cross_validate(corpus, xval_folds, xval_opts.seed,
                                   cfg.solver, cfg.train, xval_threads);
            emit(xval_opts,
                 dr::render_report(report,
                                   dr::report_format_from_string(xval_opts.format)));
        } else if (solve_cmd->parsed()) {
            dr::ToolConfig cfg = resolve_config(solve_opts);
            cfg.solver.variant = variant_from_string(solve_solver);
            bool need_ablations = cfg.solver.variant != dr::SolverVariant::Full;
            dr::ModelSet models =
                dr::load_models(solve_models_dir, need_ablations);

            dr::DecisionRecord decision;
            std::array<dr::RasterImage, dr::kPanelCount> panels;
            if (!solve_panels.empty()) {
                for (int k = 0; k < dr::kPanelCount; ++k)
                    panels[k] = dr::read_pgm(solve_panels[static_cast<std::size_t>(k)]);
                decision.problem_id = "stdin";
            } else if (!solve_corpus.empty()) {
                dr::CorpusManifest corpus = dr::load_corpus(solve_corpus);
                if (solve_index < 0 ||
                    solve_index >= static_cast<int>(corpus.problems.size()))
                    throw dr::DataError("problem index out of range");
                const dr::ProblemRecord& rec =
                    corpus.problems[static_cast<std::size_t>(solve_index)];
                panels = rec.problem.panels;
                decision.problem_id = rec.id;
                decision.answer_index = rec.problem.answer_index;
                if (rec.problem.true_category)
                    decision.true_category = *rec.problem.true_category;
            } else {
                throw dr::ConfigError("solve needs --panels or --corpus/--index");
            }

            dr::SolveRecord rec = dr::solve(panels, models, cfg.solver);
            decision.detected_category = rec.detected_category;
            decision.chosen_option = rec.prediction.chosen_option;
            decision.correct = decision.chosen_option == decision.answer_index;
            {
                std::ostringstream os;
                dr::Prediction& p = rec.prediction;
                if (p.predicted_rf) {
                    if (p.predicted_rf->rho)
                        os << "rho=" << std::lround(*p.predicted_rf->rho);
                    else if (!p.predicted_rf->chi.empty())
                        os << "chi=" << p.predicted_rf->chi_total();
                    else if (!p.predicted_rf->sigma.empty())
                        os << "sigma=" << to_string(p.predicted_rf->sigma.front());
                } else if (p.predicted_vector) {
                    os << "vector[" << p.predicted_vector->size() << "]";
                }
                decision.predicted_knowledge = os.str();
            }
            emit(solve_opts,
                 dr::render_decision(
                     decision, dr::report_format_from_string(solve_opts.format)));
        } else if (grad_cmd->parsed()) {
            double max_rel = 0.0;
            std::uint64_t seed = grad_opts.seed;
            int runs = 0;
            for (int input_dim : {1, 2, 4})
                for (int hidden_dim : {2, 4, 8})
                    max_rel = std::max(
                        max_rel, dr::gradient_check(input_dim, hidden_dim, 2, 3,
                                                    seed + static_cast<std::uint64_t>(
                                                               ++runs)));
            max_rel = std::max(max_rel,
                               dr::gradient_check(4, 8, 4, 5, seed + 100));
            char buf[64];
            std::snprintf(buf, sizeof buf, "max relative gradient error: %.3e\n",
                          max_rel);
            emit(grad_opts, buf);
            return max_rel < 1e-4 ? kExitOk : 1;
        }
    } catch (const dr::ConfigError& e) {
        std::cerr << "drsolve: error: config: " << e.what() << "\n";
        return kExitUsage;
    } catch (const dr::TrainingError& e) {
        std::cerr << "drsolve: error: training: " << e.what() << "\n";
        return kExitTraining;
    } catch (const dr::Error& e) {
        std::cerr << "drsolve: error: data: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "drsolve: error: internal: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
