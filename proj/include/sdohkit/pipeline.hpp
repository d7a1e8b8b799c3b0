#pragma once

#include <cstdlib>
#include <ctime>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdohkit/backend.hpp"
#include "sdohkit/control.hpp"
#include "sdohkit/corpus.hpp"
#include "sdohkit/digest.hpp"
#include "sdohkit/features.hpp"
#include "sdohkit/io.hpp"
#include "sdohkit/mock_backend.hpp"
#include "sdohkit/models.hpp"
#include "sdohkit/rag.hpp"
#include "sdohkit/synth.hpp"
#include "sdohkit/thematic.hpp"

#ifndef SDOHKIT_VERSION
#define SDOHKIT_VERSION "0.0.0-dev"
#endif

namespace sdohkit::pipeline {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct BackendSettings {
    std::string mode = "mock";  // "mock" | "live"
    llm::LiveConfig live;
    llm::MockNoise mock_noise;
};

struct PipelineConfig {
    fs::path corpus_dir = "corpus";
    fs::path output_dir = "out";
    std::uint64_t seed = 1;
    int parallel = 1;
    BackendSettings backend;
    synth::SyntheticConfig synth;
    thematic::ClusteringConfig clustering;
    rag::ExtractionConfig extraction;
    std::size_t imputer_k = 5;
    std::string scaler_fit = "train";  // "train" | "all"
    std::string impute_scope = "all";  // "all" | "train_only"
    double test_fraction = 0.2;
    int cv_folds = 5;
    fs::path overrides_file;  // optional cluster -> factor name CSV
    std::string control_model_label;

    // The global seed drives every stochastic stage through named substreams.
    void propagate_seed() {
        synth.seed = seed;
        backend.mock_noise.seed = seed;
    }

    void validate() const {
        if (backend.mode != "mock" && backend.mode != "live")
            throw Error(ErrorKind::Config, "backend.mode must be mock or live");
        if (scaler_fit != "train" && scaler_fit != "all")
            throw Error(ErrorKind::Config, "features.scaler_fit must be train or all");
        if (impute_scope != "all" && impute_scope != "train_only")
            throw Error(ErrorKind::Config, "features.impute_scope must be all or train_only");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw Error(ErrorKind::Config, "features.test_fraction must lie in (0, 1)");
        if (cv_folds < 2) throw Error(ErrorKind::Config, "cv_folds must be >= 2");
        if (parallel < 1) throw Error(ErrorKind::Config, "parallel must be >= 1");
        clustering.validate();
        synth.validate();
        if (!overrides_file.empty() && !fs::exists(overrides_file))
            throw Error(ErrorKind::Config,
                        "overrides_file does not exist: " + overrides_file.string());
    }

    nlohmann::json to_json() const {
        nlohmann::json effects = nlohmann::json::object();
        for (const auto& [name, e] : synth.planted_effect_sizes) effects[name] = e;
        return {
            {"corpus_dir", corpus_dir.string()},
            {"output_dir", output_dir.string()},
            {"seed", seed},
            {"parallel", parallel},
            {"backend",
             {{"mode", backend.mode},
              {"base_url", backend.live.base_url},
              {"api_key_env", backend.live.api_key_env},
              {"chat_model_id", backend.live.chat_model_id},
              {"embedding_model_id", backend.live.embedding_model_id},
              {"temperature", backend.live.temperature},
              {"max_parallel", backend.live.max_parallel},
              {"retry_cap", backend.live.retry_cap},
              {"timeout_ms", backend.live.timeout_ms},
              {"rate_per_second", backend.live.rate_per_second},
              {"mock",
               {{"quote_fabrication_rate", backend.mock_noise.quote_fabrication_rate},
                {"rating_noise_rate", backend.mock_noise.rating_noise_rate},
                {"a1c_noise_sd", backend.mock_noise.a1c_noise_sd}}}}},
            {"synth",
             {{"n_patients", synth.n_patients},
              {"a1c_mean", synth.a1c_mean},
              {"a1c_sd", synth.a1c_sd},
              {"a1c_range", {synth.a1c_min, synth.a1c_max}},
              {"subtopic_absence_rate", synth.subtopic_absence_rate},
              {"lab_missing_rate", synth.lab_missing_rate},
              {"a1c_mention_rate", synth.a1c_mention_rate},
              {"min_words", synth.min_words},
              {"extra_words_cap", synth.extra_words_cap},
              {"planted_effect_sizes", effects}}},
            {"clustering",
             {{"linkage", clustering.linkage == thematic::Linkage::Single     ? "single"
                          : clustering.linkage == thematic::Linkage::Complete ? "complete"
                                                                              : "average"},
              {"merge_threshold", clustering.merge_threshold}}},
            {"retrieval",
             {{"chunk_words", extraction.chunk_words},
              {"overlap_words", extraction.overlap_words},
              {"top_k", extraction.top_k}}},
            {"features",
             {{"imputer_k", imputer_k},
              {"scaler_fit", scaler_fit},
              {"impute_scope", impute_scope},
              {"test_fraction", test_fraction}}},
            {"cv_folds", cv_folds},
            {"overrides_file", overrides_file.string()},
            {"control_model_label", control_model_label},
        };
    }

    static PipelineConfig from_json(const nlohmann::json& j) {
        PipelineConfig c;
        auto get = [&j](const char* key, auto fallback) {
            using T = decltype(fallback);
            return j.contains(key) ? j.at(key).get<T>() : fallback;
        };
        c.corpus_dir = get("corpus_dir", c.corpus_dir.string());
        c.output_dir = get("output_dir", c.output_dir.string());
        c.seed = get("seed", c.seed);
        c.parallel = get("parallel", c.parallel);
        if (j.contains("backend")) {
            const auto& b = j.at("backend");
            auto bget = [&b](const char* key, auto fallback) {
                using T = decltype(fallback);
                return b.contains(key) ? b.at(key).get<T>() : fallback;
            };
            c.backend.mode = bget("mode", c.backend.mode);
            c.backend.live.base_url = bget("base_url", c.backend.live.base_url);
            c.backend.live.api_key_env = bget("api_key_env", c.backend.live.api_key_env);
            c.backend.live.chat_model_id = bget("chat_model_id", c.backend.live.chat_model_id);
            c.backend.live.embedding_model_id =
                bget("embedding_model_id", c.backend.live.embedding_model_id);
            c.backend.live.temperature = bget("temperature", c.backend.live.temperature);
            c.backend.live.max_parallel = bget("max_parallel", c.backend.live.max_parallel);
            c.backend.live.retry_cap = bget("retry_cap", c.backend.live.retry_cap);
            c.backend.live.timeout_ms = bget("timeout_ms", c.backend.live.timeout_ms);
            c.backend.live.rate_per_second =
                bget("rate_per_second", c.backend.live.rate_per_second);
            if (b.contains("mock")) {
                const auto& m = b.at("mock");
                auto mget = [&m](const char* key, auto fallback) {
                    using T = decltype(fallback);
                    return m.contains(key) ? m.at(key).get<T>() : fallback;
                };
                c.backend.mock_noise.quote_fabrication_rate =
                    mget("quote_fabrication_rate", c.backend.mock_noise.quote_fabrication_rate);
                c.backend.mock_noise.rating_noise_rate =
                    mget("rating_noise_rate", c.backend.mock_noise.rating_noise_rate);
                c.backend.mock_noise.a1c_noise_sd =
                    mget("a1c_noise_sd", c.backend.mock_noise.a1c_noise_sd);
            }
        }
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            auto sget = [&s](const char* key, auto fallback) {
                using T = decltype(fallback);
                return s.contains(key) ? s.at(key).get<T>() : fallback;
            };
            c.synth.n_patients = sget("n_patients", c.synth.n_patients);
            c.synth.a1c_mean = sget("a1c_mean", c.synth.a1c_mean);
            c.synth.a1c_sd = sget("a1c_sd", c.synth.a1c_sd);
            if (s.contains("a1c_range")) {
                c.synth.a1c_min = s.at("a1c_range").at(0).get<double>();
                c.synth.a1c_max = s.at("a1c_range").at(1).get<double>();
            }
            c.synth.subtopic_absence_rate =
                sget("subtopic_absence_rate", c.synth.subtopic_absence_rate);
            c.synth.lab_missing_rate = sget("lab_missing_rate", c.synth.lab_missing_rate);
            c.synth.a1c_mention_rate = sget("a1c_mention_rate", c.synth.a1c_mention_rate);
            c.synth.min_words = sget("min_words", c.synth.min_words);
            c.synth.extra_words_cap = sget("extra_words_cap", c.synth.extra_words_cap);
            if (s.contains("planted_effect_sizes"))
                for (const auto& [name, e] : s.at("planted_effect_sizes").items())
                    c.synth.planted_effect_sizes[name] = e.get<double>();
        }
        if (j.contains("clustering")) {
            const auto& cl = j.at("clustering");
            if (cl.contains("linkage"))
                c.clustering.linkage =
                    thematic::linkage_from_string(cl.at("linkage").get<std::string>());
            if (cl.contains("merge_threshold"))
                c.clustering.merge_threshold = cl.at("merge_threshold").get<double>();
        }
        if (j.contains("retrieval")) {
            const auto& r = j.at("retrieval");
            auto rget = [&r](const char* key, auto fallback) {
                using T = decltype(fallback);
                return r.contains(key) ? r.at(key).get<T>() : fallback;
            };
            c.extraction.chunk_words = rget("chunk_words", c.extraction.chunk_words);
            c.extraction.overlap_words = rget("overlap_words", c.extraction.overlap_words);
            c.extraction.top_k = rget("top_k", c.extraction.top_k);
        }
        if (j.contains("features")) {
            const auto& f = j.at("features");
            auto fget = [&f](const char* key, auto fallback) {
                using T = decltype(fallback);
                return f.contains(key) ? f.at(key).get<T>() : fallback;
            };
            c.imputer_k = fget("imputer_k", c.imputer_k);
            c.scaler_fit = fget("scaler_fit", c.scaler_fit);
            c.impute_scope = fget("impute_scope", c.impute_scope);
            c.test_fraction = fget("test_fraction", c.test_fraction);
        }
        c.cv_folds = get("cv_folds", c.cv_folds);
        c.overrides_file = get("overrides_file", c.overrides_file.string());
        c.control_model_label = get("control_model_label", c.control_model_label);
        c.propagate_seed();
        return c;
    }

    static PipelineConfig load(const fs::path& path) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Config,
                        "config file " + path.string() + " is not valid JSON: " + e.what());
        }
        auto config = from_json(j);
        config.validate();
        return config;
    }
};

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

// Honors SOURCE_DATE_EPOCH so full runs can be byte-identical.
inline std::int64_t manifest_timestamp() {
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        try {
            return std::stoll(epoch);
        } catch (...) {
        }
    }
    return static_cast<std::int64_t>(std::time(nullptr));
}

class Manifest {
public:
    explicit Manifest(fs::path output_dir) : path_(std::move(output_dir)) {
        path_ /= "manifest.json";
        if (fs::exists(path_)) data_ = nlohmann::json::parse(read_file(path_));
        if (!data_.contains("stages")) data_["stages"] = nlohmann::json::object();
        data_["tool_version"] = SDOHKIT_VERSION;
    }

    void record(const std::string& stage, const std::string& config_digest,
                const std::map<std::string, std::string>& inputs,
                const std::map<std::string, std::string>& outputs) {
        nlohmann::json in = nlohmann::json::object(), out = nlohmann::json::object();
        for (const auto& [k, v] : inputs) in[k] = v;
        for (const auto& [k, v] : outputs) out[k] = v;
        data_["stages"][stage] = {{"config_digest", config_digest},
                                  {"inputs", in},
                                  {"outputs", out},
                                  {"timestamp", manifest_timestamp()}};
        write_file(path_, data_.dump(2) + "\n");
    }

    bool stage_current(const std::string& stage, const std::string& config_digest,
                       const std::map<std::string, std::string>& inputs,
                       const fs::path& root) const {
        if (!data_["stages"].contains(stage)) return false;
        const auto& entry = data_["stages"][stage];
        if (entry.at("config_digest").get<std::string>() != config_digest) return false;
        nlohmann::json in = nlohmann::json::object();
        for (const auto& [k, v] : inputs) in[k] = v;
        if (entry.at("inputs") != in) return false;
        for (const auto& [rel, digest] : entry.at("outputs").items()) {
            const fs::path p = root / rel;
            if (!fs::exists(p) || sha256_hex(read_file(p)) != digest) return false;
        }
        return true;
    }

    // For stages whose outputs are verified by a recomputed digest map rather
    // than by re-reading individual files.
    bool matches(const std::string& stage, const std::string& config_digest,
                 const std::map<std::string, std::string>& outputs) const {
        if (!data_["stages"].contains(stage)) return false;
        const auto& entry = data_["stages"][stage];
        if (entry.at("config_digest").get<std::string>() != config_digest) return false;
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : outputs) out[k] = v;
        return entry.at("outputs") == out;
    }

    void require(const std::string& stage, const std::string& needed_for) const {
        if (!data_["stages"].contains(stage))
            throw Error(ErrorKind::Dependency,
                        "`" + needed_for + "` needs artifacts from `" + stage +
                            "`; run `sdohkit " + stage + "` first");
    }

    bool has(const std::string& stage) const { return data_["stages"].contains(stage); }

private:
    fs::path path_;
    nlohmann::json data_;
};

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

struct StageContext {
    PipelineConfig config;
    std::unique_ptr<llm::Backend> backend;
    std::unique_ptr<llm::ExchangeLog> exchange_log;
    llm::MockBackend* mock = nullptr;  // non-null when mode == mock

    explicit StageContext(PipelineConfig cfg) : config(std::move(cfg)) {}

    llm::Backend& make_backend(const std::string& stage) {
        if (config.backend.mode == "mock") {
            auto noise = config.backend.mock_noise;
            std::unique_ptr<llm::MockBackend> mock_ptr;
            if (fs::exists(config.corpus_dir / "ground_truth.csv"))
                mock_ptr = llm::MockBackend::from_dir(config.corpus_dir, noise);
            else
                mock_ptr = std::make_unique<llm::MockBackend>();
            mock = mock_ptr.get();
            backend = std::move(mock_ptr);
        } else {
            backend = std::make_unique<llm::LiveBackend>(config.backend.live);
        }
        exchange_log = std::make_unique<llm::ExchangeLog>(config.output_dir /
                                                          ("exchanges_" + stage + ".jsonl"));
        backend->set_exchange_log(exchange_log.get());
        return *backend;
    }
};

// Identity of a configuration, independent of where the run lives on disk.
// Referenced file contents enter stage inputs instead.
inline std::string config_digest(const PipelineConfig& config) {
    auto j = config.to_json();
    j.erase("corpus_dir");
    j.erase("output_dir");
    j.erase("overrides_file");
    return sha256_hex(j.dump());
}

namespace stage_detail {

inline std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

inline std::map<std::string, std::string> corpus_digests(const fs::path& corpus_dir) {
    std::map<std::string, std::string> out;
    out["patients.csv"] = file_digest(corpus_dir / "patients.csv");
    if (fs::exists(corpus_dir / "ground_truth.csv"))
        out["ground_truth.csv"] = file_digest(corpus_dir / "ground_truth.csv");
    std::vector<fs::path> transcripts;
    for (const auto& entry : fs::directory_iterator(corpus_dir / "transcripts"))
        transcripts.push_back(entry.path());
    std::sort(transcripts.begin(), transcripts.end());
    std::string combined;
    for (const auto& p : transcripts) combined += p.filename().string() + ":" + file_digest(p);
    out["transcripts"] = sha256_hex(combined);
    return out;
}

inline void require_corpus(const PipelineConfig& config, const std::string& needed_for) {
    if (!fs::exists(config.corpus_dir / "patients.csv"))
        throw Error(ErrorKind::Dependency, "`" + needed_for + "` needs a corpus at " +
                                               config.corpus_dir.string() +
                                               "; run `sdohkit synth` or point corpus_dir at "
                                               "an existing corpus");
}

// Writes a file and returns its digest entry.
inline void emit(std::map<std::string, std::string>& outputs, const fs::path& root,
                 const std::string& rel, const std::string& content) {
    write_file(root / rel, content);
    outputs[rel] = sha256_hex(content);
}

}  // namespace stage_detail

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline void run_synth(const PipelineConfig& config) {
    config.validate();
    const std::string stage_config_digest = pipeline::config_digest(config);
    Manifest manifest(config.output_dir);
    try {
        if (fs::exists(config.corpus_dir / "patients.csv") &&
            manifest.matches("synth", stage_config_digest,
                             stage_detail::corpus_digests(config.corpus_dir)))
            return;
    } catch (...) {
        // partially written corpus: fall through and regenerate
    }

    const auto sc = synth::generate_synthetic_corpus(config.synth);
    synth::save_synthetic(config.corpus_dir, sc);
    manifest.record("synth", stage_config_digest, {}, stage_detail::corpus_digests(config.corpus_dir));
}

struct ThemesArtifacts {
    std::vector<std::string> codes;
    std::vector<thematic::CodeCluster> clusters;
    std::vector<thematic::Factor> factors;
};

inline ThemesArtifacts run_themes(const PipelineConfig& config) {
    config.validate();
    stage_detail::require_corpus(config, "themes");
    Manifest manifest(config.output_dir);
    const std::string stage_config_digest = pipeline::config_digest(config);
    auto inputs = stage_detail::corpus_digests(config.corpus_dir);
    if (!config.overrides_file.empty())
        inputs["overrides"] = stage_detail::file_digest(config.overrides_file);

    const auto records = corpus::load_corpus(config.corpus_dir);
    StageContext ctx(config);
    auto& backend = ctx.make_backend("themes");

    // Prompt 1 per patient; parse failures are recorded and skipped.
    std::string codes_jsonl;
    std::vector<std::string> codes;
    std::map<std::string, std::size_t> code_count;
    std::vector<llm::ThemeParse> parses(records.size());
    std::vector<std::string> parse_errors(records.size());
    parallel_for(records.size(), config.parallel, [&](std::size_t i) {
        const auto prompt = llm::render_prompt(llm::prompt_template(llm::PromptName::ThemeExtraction),
                                               {{"interview_text", records[i].transcript.text}});
        try {
            parses[i] = llm::parse_theme_json(backend.chat(prompt).response_text);
        } catch (const Error& e) {
            parse_errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < records.size(); ++i) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& code : parses[i].codes) {
            arr.push_back({{"code", code.code}, {"quotes", code.quotes}});
            if (code_count.find(code.code) == code_count.end()) codes.push_back(code.code);
            ++code_count[code.code];
        }
        nlohmann::json j = {{"patient_id", records[i].patient_id}, {"codes", arr}};
        if (!parse_errors[i].empty()) j["error"] = parse_errors[i];
        codes_jsonl += j.dump() + "\n";
    }

    ThemesArtifacts artifacts;
    artifacts.codes = codes;
    std::map<std::string, std::string> outputs;
    if (!codes.empty()) {
        const auto vectors_raw = backend.embed(codes);
        std::vector<std::vector<double>> vectors;
        for (const auto& v : vectors_raw) vectors.push_back(v.values);
        artifacts.clusters = thematic::agglomerative_cluster(vectors, config.clustering);

        std::map<std::size_t, std::string> overrides;
        if (!config.overrides_file.empty())
            overrides = thematic::parse_overrides_csv(read_file(config.overrides_file));
        artifacts.factors = thematic::consolidate(artifacts.clusters, codes, overrides);
    }

    std::string factors_csv = "factor_name,cluster_id,size\n";
    for (const auto& f : artifacts.factors)
        factors_csv += csv_row({f.name, std::to_string(f.cluster_index),
                                std::to_string(f.cluster_size)});

    stage_detail::emit(outputs, config.output_dir, "theme_codes.jsonl", codes_jsonl);
    stage_detail::emit(outputs, config.output_dir, "clusters.csv",
                       thematic::cluster_report_csv(artifacts.clusters, codes));
    stage_detail::emit(outputs, config.output_dir, "factors.csv", factors_csv);
    outputs["exchanges_themes.jsonl"] =
        stage_detail::file_digest(config.output_dir / "exchanges_themes.jsonl");
    manifest.record("themes", stage_config_digest, inputs, outputs);
    return artifacts;
}

inline rag::ExtractionResult run_rate(const PipelineConfig& config) {
    config.validate();
    stage_detail::require_corpus(config, "rate");
    Manifest manifest(config.output_dir);
    const std::string stage_config_digest = pipeline::config_digest(config);
    const auto inputs = stage_detail::corpus_digests(config.corpus_dir);

    const auto records = corpus::load_corpus(config.corpus_dir);
    StageContext ctx(config);
    auto& backend = ctx.make_backend("rate");

    auto extraction = config.extraction;
    extraction.parallel = config.parallel;
    const auto result = rag::run_extraction(records, rag::default_rubrics(), backend, extraction);

    std::string summaries_jsonl;
    for (const auto& s : result.summaries) {
        nlohmann::json bullets = nlohmann::json::array();
        for (const auto& b : s.bullets)
            bullets.push_back(
                {{"keyword", b.keyword}, {"timeframe", b.timeframe}, {"detail", b.detail}});
        summaries_jsonl += nlohmann::json{{"patient_id", s.patient_id},
                                          {"factor", s.factor},
                                          {"none", s.none},
                                          {"failed", s.failed},
                                          {"error_note", s.error_note},
                                          {"bullets", bullets}}
                               .dump() +
                           "\n";
    }

    std::map<std::string, std::string> outputs;
    stage_detail::emit(outputs, config.output_dir, "ratings.csv",
                       rag::ratings_grid_csv(result.ratings));
    stage_detail::emit(outputs, config.output_dir, "ratings.jsonl",
                       rag::ratings_jsonl(result.ratings));
    stage_detail::emit(outputs, config.output_dir, "summaries.jsonl", summaries_jsonl);
    stage_detail::emit(outputs, config.output_dir, "coverage.csv",
                       rag::coverage_csv(rag::coverage_stats(result.ratings)));
    outputs["exchanges_rate.jsonl"] =
        stage_detail::file_digest(config.output_dir / "exchanges_rate.jsonl");
    manifest.record("rate", stage_config_digest, inputs, outputs);
    return result;
}

// Assembled, imputed, scaled, split features for one set.
struct PreparedFeatures {
    features::FeatureMatrix matrix;  // complete, scaled, all rows
    std::vector<double> y;
    features::SplitIndices split;
};

inline void run_features(const PipelineConfig& config) {
    config.validate();
    stage_detail::require_corpus(config, "features");
    Manifest manifest(config.output_dir);
    manifest.require("rate", "features");
    if (!fs::exists(config.output_dir / "ratings.csv"))
        throw Error(ErrorKind::Dependency, "`features` needs ratings.csv; run `sdohkit rate`");

    const std::string stage_config_digest = pipeline::config_digest(config);
    auto inputs = stage_detail::corpus_digests(config.corpus_dir);
    inputs["ratings.csv"] = stage_detail::file_digest(config.output_dir / "ratings.csv");

    const auto records = corpus::load_corpus(config.corpus_dir);
    const auto grid =
        rag::parse_ratings_grid_csv(read_file(config.output_dir / "ratings.csv"));

    const auto split = features::train_test_split(records.size(),
                                                  {config.test_fraction, config.seed});
    nlohmann::json split_json = {{"seed", config.seed},
                                 {"test_fraction", config.test_fraction},
                                 {"train", split.train},
                                 {"test", split.test}};

    std::map<std::string, std::string> outputs;
    nlohmann::json provenance = {{"imputer_k", config.imputer_k},
                                 {"scaler_fit", config.scaler_fit},
                                 {"impute_scope", config.impute_scope},
                                 {"sets", nlohmann::json::object()}};

    for (const auto kind : {features::FeatureSetKind::Sdoh, features::FeatureSetKind::Labs,
                            features::FeatureSetKind::Combined}) {
        const std::string name = features::feature_set_name(kind);
        auto assembled = features::assemble(grid, records, kind);
        const std::size_t missing_before = assembled.X.missing_count();
        const std::size_t k_eff = std::max<std::size_t>(
            1, std::min(config.imputer_k, assembled.X.n_rows() - 1));

        features::FeatureMatrix imputed;
        if (config.impute_scope == "train_only") {
            // impute train cells from train donors, then test cells from the
            // same train-donor pool
            auto train_matrix = features::take_rows(assembled.X, split.train);
            const std::size_t k_train =
                std::max<std::size_t>(1, std::min(k_eff, train_matrix.n_rows() - 1));
            const auto train_imputed = features::knn_impute(train_matrix, {k_train});
            imputed = assembled.X;
            for (std::size_t t = 0; t < split.train.size(); ++t)
                imputed.rows[split.train[t]] = train_imputed.rows[t];
            for (const std::size_t i : split.test) {
                features::FeatureMatrix probe = train_imputed;
                probe.rows.push_back(imputed.rows[i]);
                probe.patient_ids.push_back(imputed.patient_ids[i]);
                const auto filled = features::knn_impute(probe, {k_train});
                imputed.rows[i] = filled.rows.back();
            }
        } else {
            imputed = features::knn_impute(assembled.X, {k_eff});
        }

        std::vector<std::size_t> fit_rows;
        if (config.scaler_fit == "train") {
            fit_rows = split.train;
        } else {
            for (std::size_t i = 0; i < imputed.n_rows(); ++i) fit_rows.push_back(i);
        }
        const auto scaler = features::fit_minmax(imputed, fit_rows);
        const auto scaled = features::apply_minmax(scaler, imputed);

        stage_detail::emit(outputs, config.output_dir, "features_" + name + ".csv",
                           features::feature_matrix_csv(scaled, &assembled.y));
        provenance["sets"][name] = {{"missing_cells", missing_before},
                                    {"total_cells", assembled.X.n_rows() * assembled.X.n_cols()},
                                    {"scaler_min", scaler.min},
                                    {"scaler_max", scaler.max}};
    }

    stage_detail::emit(outputs, config.output_dir, "split.json", split_json.dump(2) + "\n");
    stage_detail::emit(outputs, config.output_dir, "features_provenance.json",
                       provenance.dump(2) + "\n");
    manifest.record("features", stage_config_digest, inputs, outputs);
}

struct TrainRow {
    std::string feature_set;
    std::string model;
    double train_r2 = 0;
    double cv_r2 = 0;
    double test_r2 = 0;
    std::string best_params;
};

inline std::vector<TrainRow> run_train(const PipelineConfig& config,
                                       const std::vector<std::string>& feature_sets,
                                       const std::vector<models::ModelKind>& kinds) {
    config.validate();
    Manifest manifest(config.output_dir);
    manifest.require("features", "train");

    const std::string stage_config_digest = pipeline::config_digest(config);
    std::map<std::string, std::string> inputs, outputs;

    const auto split_json = nlohmann::json::parse(read_file(config.output_dir / "split.json"));
    const auto train_idx = split_json.at("train").get<std::vector<std::size_t>>();
    const auto test_idx = split_json.at("test").get<std::vector<std::size_t>>();
    inputs["split.json"] = stage_detail::file_digest(config.output_dir / "split.json");

    std::vector<TrainRow> rows;
    std::string cv_csv = "feature_set,model,train_r2,cv_r2,test_r2,best_params\n";
    for (const auto& set_name : feature_sets) {
        const fs::path feature_file = config.output_dir / ("features_" + set_name + ".csv");
        if (!fs::exists(feature_file))
            throw Error(ErrorKind::Dependency,
                        "`train` needs " + feature_file.filename().string() +
                            "; run `sdohkit features`");
        inputs[feature_file.filename().string()] = stage_detail::file_digest(feature_file);

        const auto [matrix, y] = features::parse_feature_matrix_csv(read_file(feature_file));
        const auto data = models::from_feature_matrix(matrix);
        const auto train_X = models::take_rows(data, train_idx);
        const auto train_y = features::take_values(y, train_idx);
        const auto test_X = models::take_rows(data, test_idx);
        const auto test_y = features::take_values(y, test_idx);

        for (const auto kind : kinds) {
            const auto grid = models::default_grid(kind, data.n_cols(), config.seed);
            const auto cv = models::grid_search_cv(train_X, train_y, grid, config.cv_folds,
                                                   config.seed, config.parallel);
            const double test_r2 =
                models::r2_score(test_y, models::predict(cv.model, test_X));

            TrainRow row;
            row.feature_set = set_name;
            row.model = models::model_kind_name(kind);
            row.train_r2 = cv.train_r2;
            row.cv_r2 = cv.mean_cv_r2;
            row.test_r2 = test_r2;
            row.best_params = cv.best_spec.describe();
            rows.push_back(row);
            cv_csv += csv_row({set_name, row.model, format_fixed(row.train_r2, 3),
                               format_fixed(row.cv_r2, 3), format_fixed(row.test_r2, 3),
                               row.best_params});

            const std::string model_file = "model_" + set_name + "_" + row.model + ".json";
            stage_detail::emit(outputs, config.output_dir, model_file,
                               models::model_to_json(cv.model).dump() + "\n");

            if (kind == models::ModelKind::RandomForest ||
                kind == models::ModelKind::GradientBoosting) {
                const auto importance = models::feature_importance(cv.model);
                std::vector<std::size_t> order(importance.columns.size());
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    if (importance.importance[a] != importance.importance[b])
                        return importance.importance[a] > importance.importance[b];
                    return importance.columns[a] < importance.columns[b];
                });
                std::string imp_csv = "rank,feature,importance\n";
                for (std::size_t r = 0; r < order.size(); ++r)
                    imp_csv += csv_row({std::to_string(r + 1), importance.columns[order[r]],
                                        format_fixed(importance.importance[order[r]], 4)});
                stage_detail::emit(outputs, config.output_dir,
                                   "importance_" + set_name + "_" + row.model + ".csv", imp_csv);
            }
        }
    }
    stage_detail::emit(outputs, config.output_dir, "cv_results.csv", cv_csv);
    manifest.record("train", stage_config_digest, inputs, outputs);
    return rows;
}

inline std::vector<control::ControlPrediction> run_control_stage(const PipelineConfig& config) {
    config.validate();
    stage_detail::require_corpus(config, "control");
    Manifest manifest(config.output_dir);
    const std::string stage_config_digest = pipeline::config_digest(config);
    const auto inputs = stage_detail::corpus_digests(config.corpus_dir);

    const auto records = corpus::load_corpus(config.corpus_dir);
    StageContext ctx(config);
    auto& backend = ctx.make_backend("control");
    const std::string label = config.control_model_label.empty() ? backend.model_id()
                                                                 : config.control_model_label;

    const auto predictions = control::run_control(records, backend, label, config.parallel);

    std::map<std::string, std::string> outputs;
    stage_detail::emit(outputs, config.output_dir, "predictions_" + label + ".jsonl",
                       control::prediction_log_jsonl(predictions));
    outputs["exchanges_control.jsonl"] =
        stage_detail::file_digest(config.output_dir / "exchanges_control.jsonl");
    manifest.record("control", stage_config_digest, inputs, outputs);
    return predictions;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

// Figure-style cell: percentage over the *predicted*-class size, fraction
// over the true-class size (the published table's convention; the two
// denominators differ).
inline std::string accuracy_cell(const control::ConfusionMatrix& m,
                                 const control::AccuracyTable& t, std::size_t level) {
    std::size_t predicted_total = 0;
    for (std::size_t row = 0; row < 3; ++row) predicted_total += m.counts[row][level];
    const std::size_t correct = m.counts[level][level];
    const double pct = predicted_total == 0 ? 0.0
                                            : 100.0 * static_cast<double>(correct) /
                                                  static_cast<double>(predicted_total);
    return format_fixed(pct, 1) + "% (" + std::to_string(correct) + "/" +
           std::to_string(t.per_class[level].total) + ")";
}

inline std::string accuracy_overall_cell(const control::AccuracyTable& t) {
    return format_fixed(t.overall_pct(), 1) + "% (" + std::to_string(t.overall_correct) + "/" +
           std::to_string(t.overall_total) + ")";
}

inline void run_report(const PipelineConfig& config) {
    config.validate();
    Manifest manifest(config.output_dir);
    const std::string stage_config_digest = pipeline::config_digest(config);
    std::map<std::string, std::string> inputs, outputs;

    std::string summary = "# Pipeline report\n\n";
    bool have_anything = false;

    // Coverage (subtopic presence) section.
    if (fs::exists(config.output_dir / "coverage.csv")) {
        have_anything = true;
        const std::string coverage = read_file(config.output_dir / "coverage.csv");
        inputs["coverage.csv"] = sha256_hex(coverage);
        stage_detail::emit(outputs, config.output_dir, "report/coverage.csv", coverage);
        summary += "## Subtopic coverage\n\n";
        summary += "Share of interviews where each subtopic was discussed (rating != -1):\n\n";
        const auto rows = parse_csv(coverage);
        for (std::size_t i = 1; i < rows.size(); ++i)
            summary += "- " + rows[i][0] + " - " + rows[i][1] + ": " + rows[i][4] + "% (" +
                       rows[i][2] + "/" + rows[i][3] + ")\n";
        summary += "\n";
    }

    // Train/CV R^2 table.
    if (fs::exists(config.output_dir / "cv_results.csv")) {
        have_anything = true;
        const std::string cv = read_file(config.output_dir / "cv_results.csv");
        inputs["cv_results.csv"] = sha256_hex(cv);
        const auto rows = parse_csv(cv);
        std::map<std::string, std::map<std::string, std::pair<std::string, std::string>>> table;
        std::vector<std::string> sets;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            table[rows[i][1]][rows[i][0]] = {rows[i][2], rows[i][3]};
            if (std::find(sets.begin(), sets.end(), rows[i][0]) == sets.end())
                sets.push_back(rows[i][0]);
        }
        std::string r2_csv = "model";
        for (const auto& s : sets) r2_csv += "," + s + "_train," + s + "_cv";
        r2_csv += "\n";
        for (const auto& model : {"lasso", "ridge", "rf", "gbt"}) {
            if (table.find(model) == table.end()) continue;
            r2_csv += model;
            for (const auto& s : sets) {
                const auto it = table[model].find(s);
                r2_csv += it == table[model].end() ? ",,"
                                                   : "," + it->second.first + "," +
                                                         it->second.second;
            }
            r2_csv += "\n";
        }
        stage_detail::emit(outputs, config.output_dir, "report/r2_table.csv", r2_csv);
        summary += "## Training and cross-validated R^2 by model and feature set\n\n```\n" + cv +
                   "```\n\n";
    }

    // Feature importance rankings.
    for (const auto& entry : fs::directory_iterator(config.output_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("importance_", 0) == 0 && entry.path().extension() == ".csv") {
            have_anything = true;
            const std::string content = read_file(entry.path());
            inputs[name] = sha256_hex(content);
            stage_detail::emit(outputs, config.output_dir, "report/" + name, content);
        }
    }

    // Accuracy tables from every prediction log present.
    std::vector<fs::path> logs;
    for (const auto& entry : fs::directory_iterator(config.output_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("predictions_", 0) == 0 && entry.path().extension() == ".jsonl")
            logs.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    if (!logs.empty()) {
        have_anything = true;
        std::string acc_csv = std::string(control::kAccuracyCsvHeader) + "\n";
        std::string acc_txt;
        char line[256];
        std::snprintf(line, sizeof(line), "%-12s %-16s %-16s %-16s %-16s\n", "model", "low",
                      "medium", "high", "overall");
        acc_txt += line;
        for (const auto& log : logs) {
            const std::string content = read_file(log);
            inputs[log.filename().string()] = sha256_hex(content);
            const auto predictions = control::parse_prediction_log_jsonl(content);
            const auto table = control::evaluate_accuracy(predictions);
            const auto confusion = control::confusion_matrix(predictions);
            acc_csv += control::accuracy_csv_row(table);
            std::snprintf(line, sizeof(line), "%-12s %-16s %-16s %-16s %-16s\n",
                          table.model_label.c_str(),
                          accuracy_cell(confusion, table, 0).c_str(),
                          accuracy_cell(confusion, table, 1).c_str(),
                          accuracy_cell(confusion, table, 2).c_str(),
                          accuracy_overall_cell(table).c_str());
            acc_txt += line;
            if (table.non_response > 0)
                acc_txt += "  (" + table.model_label + " gave no response for " +
                           std::to_string(table.non_response) + " patients)\n";
        }
        stage_detail::emit(outputs, config.output_dir, "report/accuracy.csv", acc_csv);
        stage_detail::emit(outputs, config.output_dir, "report/accuracy_table.txt", acc_txt);
        summary += "## Control-level accuracy per model\n\n```\n" + acc_txt + "```\n\n";
    }

    if (!have_anything)
        throw Error(ErrorKind::Dependency,
                    "`report` found no stage artifacts in " + config.output_dir.string() +
                        "; run `sdohkit rate`, `train`, or `control` first");

    stage_detail::emit(outputs, config.output_dir, "report/summary.md", summary);
    manifest.record("report", stage_config_digest, inputs, outputs);
}

}  // namespace sdohkit::pipeline
