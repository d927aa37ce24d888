#pragma once

#include "malhunt/analytics.hpp"
#include "malhunt/corpus.hpp"
#include "malhunt/evaluation.hpp"
#include "malhunt/featurize.hpp"
#include "malhunt/harvester.hpp"
#include "malhunt/naive_bayes.hpp"
#include "malhunt/srcdetect.hpp"
#include "malhunt/taxonomy.hpp"
#include "malhunt/textprep.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Stage orchestration behind the `malhunt` subcommands. Every stage reads
// and writes files inside one workspace directory.
namespace malhunt::pipeline {

/// Everything a run depends on. Optional paths are relative to the
/// workspace; empty means the built-in default.
struct RunConfig {
    QueryTier tier = QueryTier::q137;
    std::vector<features::FieldBudget> budgets = features::default_budgets();
    features::WeightingMode mode = features::WeightingMode::count;
    double alpha = 1.0;
    std::size_t folds = 10;
    std::optional<std::uint64_t> seed;
    double threshold = 0.75;
    std::vector<std::string> extensions;  // empty = default whitelist
    std::filesystem::path workspace = ".";
    std::filesystem::path stopwords_file;
    std::filesystem::path blacklist_file;
    std::filesystem::path taxonomy_file;
    std::filesystem::path keywords_dir;
    std::size_t top_k = 10;

    /// Throws ValidationError naming the offending key.
    void validate() const;
    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// "title=30,topics=10,..." in any order; all five fields required.
std::vector<features::FieldBudget> parse_budgets(std::string_view text);
std::string format_budgets(std::span<const features::FieldBudget> budgets);

enum class Stage { harvest, dedup, label_serve, train, evaluate, classify, detect_source, tag, report };

std::string_view to_string(Stage stage);

/// Hash over the configuration subset that determines `stage`'s output,
/// including upstream stages. Artifacts embed it; consumers recompute it and
/// refuse inputs produced under a different configuration.
std::string config_hash(const RunConfig& config, Stage stage);

/// Per-run loaded resources.
textprep::Preprocessor make_preprocessor(const RunConfig& config);
taxonomy::TagLexicon make_lexicon(const RunConfig& config, const textprep::Preprocessor& prep);
srcdetect::SourceDetectConfig make_source_config(const RunConfig& config);
harvest::KeywordTiers make_keyword_tiers(const RunConfig& config);

/// Artifact file names inside the workspace.
namespace files {
inline constexpr const char* kCorpus = "corpus.jsonl";
inline constexpr const char* kLabels = "labels.jsonl";
inline constexpr const char* kBallots = "ballots.jsonl";
inline constexpr const char* kNearDuplicates = "near_duplicates.json";
inline constexpr const char* kVocabulary = "vocabulary.json";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kClassified = "classified.json";
inline constexpr const char* kSource = "source.json";
inline constexpr const char* kTags = "tags.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kFigures = "figures";
}  // namespace files

/// Labeled repositories of the configured tier, preprocessed, sorted by name.
/// Throws ValidationError naming labels.jsonl when there are none.
std::vector<features::LabeledTokens> labeled_tokens(const corpus::CorpusSnapshot& snapshot, const RunConfig& config,
                                                    const textprep::Preprocessor& prep);

/// k-fold CV with vocabulary selection redone inside every training fold.
eval::EvalReport cross_validate_tokens(std::span<const features::LabeledTokens> data,
                                       std::span<const features::FieldBudget> budgets, features::WeightingMode mode,
                                       double alpha, std::size_t folds, std::uint64_t seed);

struct TrainedModel {
    features::Vocabulary vocabulary;
    nb::NaiveBayesModel model;
};

TrainedModel train_tokens(std::span<const features::LabeledTokens> data, std::span<const features::FieldBudget> budgets,
                          features::WeightingMode mode, double alpha);

// Stages. Each returns a short summary and writes only its declared outputs.

struct HarvestSummary {
    harvest::HarvestStats stats;
    std::size_t corpus_size = 0;
};
HarvestSummary run_harvest(const RunConfig& config, harvest::ArchiveApi& api, harvest::Clock& clock,
                           const harvest::RateLimitPolicy& policy, const harvest::HarvestOptions& options);

struct DedupSummary {
    std::vector<std::string> removed;
    std::vector<corpus::NearDuplicate> near;
};
/// Drops exact duplicates from corpus.jsonl; writes near_duplicates.json.
DedupSummary run_dedup(const RunConfig& config, double near_threshold = 0.9);

/// Writes vocabulary.json and model.json.
TrainedModel run_train(const RunConfig& config);

/// Writes eval_report.json. Requires a seed.
eval::EvalReport run_evaluate(const RunConfig& config);

struct ClassifySummary {
    std::size_t total = 0;
    std::vector<std::string> malware;  // sorted
};
/// Applies model.json to every record of the tier; writes classified.json.
ClassifySummary run_classify(const RunConfig& config);

struct SourceSummary {
    std::size_t malware = 0;
    std::vector<std::string> source;  // sorted; subset of the malware list
};
/// Reads classified.json; writes source.json.
SourceSummary run_detect_source(const RunConfig& config);

/// Reads classified.json; writes tags.json.
std::vector<taxonomy::TagAssignment> run_tag(const RunConfig& config);

/// Reads classified.json and tags.json; writes report.json and figures/*.csv.
analytics::Report run_report(const RunConfig& config);

/// Writes corpus.jsonl and labels.jsonl for the synthetic labeled fixture.
std::size_t run_make_fixture(const RunConfig& config, std::size_t per_class);

}  // namespace malhunt::pipeline
