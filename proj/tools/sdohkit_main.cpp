// Command-line front end for the narrative-to-risk pipeline. Stages write
// their artifacts into the output directory and are tracked by a manifest,
// so costly LLM stages and cheap numeric stages re-run independently.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "sdohkit/pipeline.hpp"

namespace {

using sdohkit::Error;
using sdohkit::ErrorKind;
using sdohkit::pipeline::PipelineConfig;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Config:
        case ErrorKind::Template:
            return 2;
        default:
            return 1;
    }
}

std::vector<std::string> feature_sets_for(const std::string& flag) {
    if (flag == "all") return {"sdoh", "labs", "combined"};
    return {flag};
}

std::vector<sdohkit::models::ModelKind> model_kinds_for(const std::string& flag) {
    using sdohkit::models::ModelKind;
    if (flag == "all")
        return {ModelKind::Lasso, ModelKind::Ridge, ModelKind::RandomForest,
                ModelKind::GradientBoosting};
    return {sdohkit::models::model_kind_from_string(flag)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sdohkit: structured SDOH ratings and diabetes-control evaluation from "
                 "patient interview narratives"};
    app.require_subcommand(1);

    std::string config_file;
    std::string backend_mode;
    std::string corpus_dir;
    std::string output_dir;
    std::uint64_t seed = 0;
    int parallel = 0;
    app.add_option("--config", config_file, "pipeline config file (JSON)");
    app.add_option("--seed", seed, "global seed (overrides config)");
    app.add_option("--backend", backend_mode, "backend mode")
        ->check(CLI::IsMember({"live", "mock"}));
    app.add_option("--parallel", parallel, "max worker threads / in-flight requests");
    app.add_option("--corpus-dir", corpus_dir, "corpus directory (overrides config)");
    app.add_option("--output-dir", output_dir, "output directory (overrides config)");

    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic interview corpus");
    auto* cmd_themes =
        app.add_subcommand("themes", "extract theme codes, cluster them, consolidate factors");
    auto* cmd_rate = app.add_subcommand("rate", "retrieval-augmented factor summaries and "
                                                "subtopic ratings");
    auto* cmd_features =
        app.add_subcommand("features", "assemble, impute, scale, and split feature matrices");
    auto* cmd_train = app.add_subcommand("train", "grid-search CV over the regressors");
    auto* cmd_control =
        app.add_subcommand("control", "redact A1C, predict control level, log predictions");
    auto* cmd_report = app.add_subcommand("report", "render coverage, R2, importance, and "
                                                    "accuracy reports");

    std::string feature_set = "all";
    std::string model = "all";
    cmd_train->add_option("--feature-set", feature_set, "feature set to train on")
        ->check(CLI::IsMember({"sdoh", "labs", "combined", "all"}));
    cmd_train->add_option("--model", model, "model kind")
        ->check(CLI::IsMember({"ridge", "lasso", "rf", "gbt", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        PipelineConfig config =
            config_file.empty() ? PipelineConfig{} : PipelineConfig::load(config_file);
        if (app.count("--seed") > 0) config.seed = seed;
        if (!backend_mode.empty()) config.backend.mode = backend_mode;
        if (parallel > 0) config.parallel = parallel;
        if (!corpus_dir.empty()) config.corpus_dir = corpus_dir;
        if (!output_dir.empty()) config.output_dir = output_dir;
        config.propagate_seed();
        config.validate();

        if (cmd_synth->parsed()) {
            sdohkit::pipeline::run_synth(config);
            std::printf("synth: %zu patients at %s\n", config.synth.n_patients,
                        config.corpus_dir.string().c_str());
        } else if (cmd_themes->parsed()) {
            const auto artifacts = sdohkit::pipeline::run_themes(config);
            std::printf("themes: %zu codes in %zu clusters -> %s\n", artifacts.codes.size(),
                        artifacts.clusters.size(), config.output_dir.string().c_str());
        } else if (cmd_rate->parsed()) {
            const auto result = sdohkit::pipeline::run_rate(config);
            std::printf("rate: %zu ratings, %zu summaries -> %s\n", result.ratings.size(),
                        result.summaries.size(), config.output_dir.string().c_str());
        } else if (cmd_features->parsed()) {
            sdohkit::pipeline::run_features(config);
            std::printf("features: matrices and split -> %s\n",
                        config.output_dir.string().c_str());
        } else if (cmd_train->parsed()) {
            const auto rows = sdohkit::pipeline::run_train(config, feature_sets_for(feature_set),
                                                           model_kinds_for(model));
            for (const auto& r : rows)
                std::printf("train: %-8s %-6s train=%6.3f cv=%6.3f test=%6.3f  %s\n",
                            r.feature_set.c_str(), r.model.c_str(), r.train_r2, r.cv_r2,
                            r.test_r2, r.best_params.c_str());
        } else if (cmd_control->parsed()) {
            const auto predictions = sdohkit::pipeline::run_control_stage(config);
            std::size_t responded = 0;
            for (const auto& p : predictions)
                if (p.responded()) ++responded;
            std::printf("control: %zu predictions (%zu responded) -> %s\n", predictions.size(),
                        responded, config.output_dir.string().c_str());
        } else if (cmd_report->parsed()) {
            sdohkit::pipeline::run_report(config);
            std::printf("report: %s\n",
                        (config.output_dir / "report" / "summary.md").string().c_str());
        }
        return 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "sdohkit: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "sdohkit: %s\n", e.what());
        return 1;
    }
}
