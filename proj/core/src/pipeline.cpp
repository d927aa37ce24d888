#include "malhunt/pipeline.hpp"

#include "malhunt/errors.hpp"
#include "malhunt/fixtures.hpp"
#include "malhunt/resources.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace malhunt::pipeline {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string stage_error(Stage stage, const std::string& msg) { return std::string(to_string(stage)) + ": " + msg; }

Json parse_artifact(Stage stage, const fs::path& path) {
    if (!fs::exists(path)) {
        throw ValidationError(stage_error(stage, path.filename().string() + " not found in workspace; run the producing stage first"));
    }
    try {
        return Json::parse(corpus::read_file(path));
    } catch (const Json::exception& e) {
        throw ValidationError(stage_error(stage, path.filename().string() + " is malformed: " + e.what()));
    }
}

void require_hash(Stage stage, const fs::path& path, const std::string& found, const std::string& expected) {
    if (found != expected) {
        throw ValidationError(stage_error(stage, path.filename().string() + " was produced under config hash " + found +
                                                     " but the current configuration hashes to " + expected +
                                                     "; rerun the producing stage"));
    }
}

void write_json(const fs::path& path, const Json& doc) { corpus::write_file_atomic(path, doc.dump(2) + "\n"); }

std::string hash_set(const textprep::WordSet& words) {
    std::string all;
    for (const auto& w : words) all += w + "\n";
    return hex64(fnv1a64(all));
}

std::string hash_text_file_or_builtin(const RunConfig& c, const fs::path& file, std::string_view builtin) {
    return file.empty() ? hex64(fnv1a64(builtin)) : hex64(fnv1a64(corpus::read_file(c.resolve(file))));
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

corpus::CorpusSnapshot load_corpus(Stage stage, const RunConfig& config) {
    corpus::CorpusStore store(config.workspace);
    auto snapshot = store.load();
    if (snapshot.records().empty()) {
        throw ValidationError(stage_error(stage, "no records in " + store.records_path().string()));
    }
    return snapshot;
}

// Supervised stages need consensus labels before anything else.
void require_labels(Stage stage, const RunConfig& config) {
    const auto path = config.workspace / files::kLabels;
    if (!std::filesystem::exists(path)) {
        throw ValidationError(stage_error(stage, "missing " + path.string() + " (run the labeling service export first)"));
    }
}

// classified.json -> malware names, after checking the producing config.
std::vector<std::string> load_classified(Stage stage, const RunConfig& config) {
    const auto path = config.workspace / files::kClassified;
    auto doc = parse_artifact(stage, path);
    require_hash(stage, path, doc.value("config_hash", ""), config_hash(config, Stage::classify));
    return doc.at("malware").get<std::vector<std::string>>();
}

std::vector<RepositoryRecord> malware_records(Stage stage, const RunConfig& config,
                                              const corpus::CorpusSnapshot& snapshot) {
    std::vector<RepositoryRecord> out;
    for (const auto& name : load_classified(stage, config)) {
        const auto* r = snapshot.find(name);
        if (!r) throw ValidationError(stage_error(stage, "classified repository " + name + " missing from corpus.jsonl"));
        out.push_back(*r);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    if (budgets.size() != kAllFields.size()) throw ValidationError("config: budgets must list all five fields");
    std::set<FieldKind> seen;
    for (const auto& b : budgets) {
        if (!seen.insert(b.kind).second) throw ValidationError("config: budgets list a field twice");
        if (b.k == 0) throw ValidationError("config: budget for " + std::string(malhunt::to_string(b.kind)) + " must be > 0");
    }
    if (!(alpha > 0.0)) throw InvalidAlpha(alpha);
    if (folds < 2) throw ValidationError("config: folds must be >= 2");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("config: threshold must be in (0, 1]");
    if (top_k == 0) throw ValidationError("config: top_k must be > 0");
    if (workspace.empty()) throw ValidationError("config: workspace must be set");
    for (const auto* p : {&stopwords_file, &blacklist_file, &taxonomy_file}) {
        if (!p->empty() && !fs::exists(resolve(*p))) throw ValidationError("config: file not found: " + resolve(*p).string());
    }
    if (!keywords_dir.empty() && !fs::is_directory(resolve(keywords_dir))) {
        throw ValidationError("config: keywords directory not found: " + resolve(keywords_dir).string());
    }
    for (const auto& e : extensions) {
        if (e.empty()) throw ValidationError("config: empty extension in extensions list");
    }
}

fs::path RunConfig::resolve(const fs::path& p) const { return p.is_absolute() ? p : workspace / p; }

std::vector<features::FieldBudget> parse_budgets(std::string_view text) {
    std::vector<features::FieldBudget> out;
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ValidationError("config: budget entry '" + item + "' is not field=k");
        auto kind = parse_field_kind(item.substr(0, eq));
        if (!kind) throw ValidationError("config: unknown field '" + item.substr(0, eq) + "' in budgets");
        std::size_t k = 0;
        try {
            std::size_t used = 0;
            const auto value = item.substr(eq + 1);
            k = std::stoul(value, &used);
            if (used != value.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ValidationError("config: budget for '" + item.substr(0, eq) + "' is not a count");
        }
        out.push_back({*kind, k});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.kind < b.kind; });
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i > 0 && out[i].kind == out[i - 1].kind) {
            throw ValidationError("config: budget for '" + std::string(malhunt::to_string(out[i].kind)) + "' given twice");
        }
    }
    if (out.size() != kAllFields.size()) throw ValidationError("config: budgets must name all five fields");
    return out;
}

std::string format_budgets(std::span<const features::FieldBudget> budgets) {
    std::string out;
    for (const auto& b : budgets) {
        if (!out.empty()) out += ",";
        out += std::string(malhunt::to_string(b.kind)) + "=" + std::to_string(b.k);
    }
    return out;
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::harvest: return "harvest";
        case Stage::dedup: return "dedup";
        case Stage::label_serve: return "label-serve";
        case Stage::train: return "train";
        case Stage::evaluate: return "evaluate";
        case Stage::classify: return "classify";
        case Stage::detect_source: return "detect-source";
        case Stage::tag: return "tag";
        case Stage::report: return "report";
    }
    return "unknown";
}

std::string config_hash(const RunConfig& c, Stage stage) {
    auto prep_key = [&] {
        auto prep = make_preprocessor(c);
        return "stopwords=" + hash_set(prep.stopwords()) + ";blacklist=" + hash_set(prep.filename_blacklist()) + ";";
    };
    auto sorted_budgets = c.budgets;
    std::sort(sorted_budgets.begin(), sorted_budgets.end(), [](const auto& a, const auto& b) { return a.kind < b.kind; });
    auto model_key = [&] {
        return prep_key() + "tier=" + std::string(malhunt::to_string(c.tier)) + ";budgets=" + format_budgets(sorted_budgets) +
               ";mode=" + std::string(features::to_string(c.mode)) + ";alpha=" + format_double(c.alpha) + ";";
    };
    auto source_key = [&] {
        auto sc = make_source_config(c);
        std::string exts;
        for (const auto& e : sc.extension_whitelist) exts += e + ",";
        return "threshold=" + format_double(sc.threshold) + ";extensions=" + exts + ";";
    };
    auto tag_key = [&] {
        return model_key() + "taxonomy=" + hash_text_file_or_builtin(c, c.taxonomy_file, resources::taxonomy_json()) + ";";
    };

    std::string key = std::string(to_string(stage)) + "|";
    switch (stage) {
        case Stage::harvest: {
            auto tiers = make_keyword_tiers(c);
            std::string kws;
            for (const auto& k : tiers.keywords(c.tier)) kws += k + "\n";
            key += "tier=" + std::string(malhunt::to_string(c.tier)) + ";keywords=" + hex64(fnv1a64(kws)) + ";";
            break;
        }
        case Stage::dedup: key += prep_key(); break;
        case Stage::label_serve: key += "seed=" + (c.seed ? std::to_string(*c.seed) : std::string("none")) + ";"; break;
        case Stage::train:
        case Stage::classify: key += model_key(); break;
        case Stage::evaluate:
            key += model_key() + "folds=" + std::to_string(c.folds) +
                   ";seed=" + (c.seed ? std::to_string(*c.seed) : std::string("none")) + ";";
            break;
        case Stage::detect_source: key += model_key() + source_key(); break;
        case Stage::tag: key += tag_key(); break;
        case Stage::report: key += tag_key() + "top_k=" + std::to_string(c.top_k) + ";"; break;
    }
    // train and classify share one hash: classify consumes train's output.
    if (stage == Stage::classify) key.replace(0, key.find('|'), "train");
    return hex64(fnv1a64(key));
}

textprep::Preprocessor make_preprocessor(const RunConfig& c) {
    if (c.stopwords_file.empty() && c.blacklist_file.empty()) return textprep::Preprocessor();
    auto stop = c.stopwords_file.empty() ? textprep::parse_word_list(resources::stopwords())
                                         : textprep::load_word_list(c.resolve(c.stopwords_file));
    auto black = c.blacklist_file.empty() ? textprep::parse_word_list(resources::filename_blacklist())
                                          : textprep::load_word_list(c.resolve(c.blacklist_file));
    return textprep::Preprocessor(std::move(stop), std::move(black));
}

taxonomy::TagLexicon make_lexicon(const RunConfig& c, const textprep::Preprocessor& prep) {
    return c.taxonomy_file.empty() ? taxonomy::TagLexicon::defaults(prep)
                                   : taxonomy::TagLexicon::load(c.resolve(c.taxonomy_file), prep);
}

srcdetect::SourceDetectConfig make_source_config(const RunConfig& c) {
    auto sc = srcdetect::SourceDetectConfig::defaults();
    sc.threshold = c.threshold;
    if (!c.extensions.empty()) {
        sc.extension_whitelist.clear();
        for (auto e : c.extensions) {
            if (!e.empty() && e.front() == '.') e.erase(0, 1);
            std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
            sc.extension_whitelist.insert(e);
        }
    }
    sc.validate();
    return sc;
}

harvest::KeywordTiers make_keyword_tiers(const RunConfig& c) {
    return c.keywords_dir.empty() ? harvest::KeywordTiers::builtin() : harvest::KeywordTiers::load(c.resolve(c.keywords_dir));
}

// ---------------------------------------------------------------------------

std::vector<features::LabeledTokens> labeled_tokens(const corpus::CorpusSnapshot& snapshot, const RunConfig& config,
                                                    const textprep::Preprocessor& prep) {
    std::vector<features::LabeledTokens> out;
    for (const auto& [name, ex] : snapshot.labels()) {
        if (!snapshot.tiers_of(name).contains(config.tier)) continue;
        out.push_back({name, prep.preprocess(*snapshot.find(name)), ex.label});
    }
    if (out.empty()) {
        throw ValidationError("no labeled repositories for tier " + std::string(malhunt::to_string(config.tier)) + " in " +
                              (config.workspace / files::kLabels).string());
    }
    return out;
}

TrainedModel train_tokens(std::span<const features::LabeledTokens> data, std::span<const features::FieldBudget> budgets,
                          features::WeightingMode mode, double alpha) {
    auto vocab = features::select_vocabulary(data, budgets, mode);
    std::vector<nb::LabeledVector> vectors;
    vectors.reserve(data.size());
    for (const auto& d : data) vectors.push_back({features::vectorize(d.tokens, vocab, d.name), d.label});
    auto model = nb::NaiveBayesModel::train(vectors, alpha, vocab.hash());
    return {std::move(vocab), std::move(model)};
}

eval::EvalReport cross_validate_tokens(std::span<const features::LabeledTokens> data,
                                       std::span<const features::FieldBudget> budgets, features::WeightingMode mode,
                                       double alpha, std::size_t folds, std::uint64_t seed) {
    if (!(alpha > 0.0)) throw InvalidAlpha(alpha);
    std::vector<ClassLabel> labels;
    labels.reserve(data.size());
    for (const auto& d : data) labels.push_back(d.label);
    auto report = eval::cross_validate_with(labels, folds, seed, [&](auto train_idx, auto test_idx) {
        std::vector<features::LabeledTokens> train;
        train.reserve(train_idx.size());
        for (auto i : train_idx) train.push_back(data[i]);
        auto trained = train_tokens(train, budgets, mode, alpha);
        std::vector<ClassLabel> out;
        out.reserve(test_idx.size());
        for (auto i : test_idx) {
            out.push_back(trained.model.predict(features::vectorize(data[i].tokens, trained.vocabulary).values).label);
        }
        return out;
    });
    report.alpha = alpha;
    return report;
}

// ---------------------------------------------------------------------------

HarvestSummary run_harvest(const RunConfig& config, harvest::ArchiveApi& api, harvest::Clock& clock,
                           const harvest::RateLimitPolicy& policy, const harvest::HarvestOptions& options) {
    config.validate();
    const auto tiers = make_keyword_tiers(config);
    corpus::CorpusStore store(config.workspace);
    fs::create_directories(config.workspace);
    auto snapshot = store.load();
    harvest::Harvester harvester(api, clock, policy, options);
    HarvestSummary out;
    out.stats = harvester.harvest(tiers, config.tier, snapshot);
    store.save(snapshot);
    out.corpus_size = snapshot.records().size();
    return out;
}

DedupSummary run_dedup(const RunConfig& config, double near_threshold) {
    config.validate();
    if (!(near_threshold > 0.0 && near_threshold <= 1.0)) throw ValidationError("dedup: near threshold must be in (0, 1]");
    const auto prep = make_preprocessor(config);
    corpus::CorpusStore store(config.workspace);
    auto snapshot = load_corpus(Stage::dedup, config);
    DedupSummary out;
    out.removed = corpus::drop_exact_duplicates(snapshot, prep);
    out.near = corpus::find_near_duplicates(snapshot, prep, near_threshold);
    store.save(snapshot);
    Json pairs = Json::array();
    for (const auto& n : out.near) pairs.push_back({{"first", n.first}, {"second", n.second}, {"similarity", n.similarity}});
    write_json(config.workspace / files::kNearDuplicates,
               {{"config_hash", config_hash(config, Stage::dedup)},
                {"threshold", near_threshold},
                {"removed", out.removed},
                {"pairs", pairs}});
    return out;
}

TrainedModel run_train(const RunConfig& config) {
    config.validate();
    require_labels(Stage::train, config);
    const auto prep = make_preprocessor(config);
    auto snapshot = load_corpus(Stage::train, config);
    std::vector<features::LabeledTokens> data;
    try {
        data = labeled_tokens(snapshot, config, prep);
    } catch (const ValidationError& e) {
        throw ValidationError(stage_error(Stage::train, e.what()));
    }
    auto trained = train_tokens(data, config.budgets, config.mode, config.alpha);
    const auto hash = config_hash(config, Stage::train);
    trained.model.set_config_hash(hash);
    Json vocab_doc{{"config_hash", hash}, {"vocabulary", Json::parse(trained.vocabulary.to_json_text())}};
    write_json(config.workspace / files::kVocabulary, vocab_doc);
    corpus::write_file_atomic(config.workspace / files::kModel, trained.model.to_json_text());
    return trained;
}

eval::EvalReport run_evaluate(const RunConfig& config) {
    config.validate();
    if (!config.seed) throw ValidationError("evaluate: --seed is required (fold assignment is random)");
    require_labels(Stage::evaluate, config);
    const auto prep = make_preprocessor(config);
    auto snapshot = load_corpus(Stage::evaluate, config);
    std::vector<features::LabeledTokens> data;
    try {
        data = labeled_tokens(snapshot, config, prep);
    } catch (const ValidationError& e) {
        throw ValidationError(stage_error(Stage::evaluate, e.what()));
    }
    auto report = cross_validate_tokens(data, config.budgets, config.mode, config.alpha, config.folds, *config.seed);
    report.config_hash = config_hash(config, Stage::evaluate);
    corpus::write_file_atomic(config.workspace / files::kEvalReport, report.to_json_text());
    return report;
}

ClassifySummary run_classify(const RunConfig& config) {
    config.validate();
    const auto expected = config_hash(config, Stage::classify);
    const auto vocab_path = config.workspace / files::kVocabulary;
    const auto model_path = config.workspace / files::kModel;
    auto vocab_doc = parse_artifact(Stage::classify, vocab_path);
    require_hash(Stage::classify, vocab_path, vocab_doc.value("config_hash", ""), expected);
    auto vocab = features::Vocabulary::from_json_text(vocab_doc.at("vocabulary").dump());
    nb::NaiveBayesModel model;
    try {
        model = nb::NaiveBayesModel::from_json_text(corpus::read_file(model_path), vocab.hash());
    } catch (const ValidationError& e) {
        throw ValidationError(stage_error(Stage::classify, std::string(files::kModel) + ": " + e.what()));
    }
    require_hash(Stage::classify, model_path, model.config_hash(), expected);

    const auto prep = make_preprocessor(config);
    auto snapshot = load_corpus(Stage::classify, config);
    ClassifySummary out;
    Json predictions = Json::array();
    for (const auto& r : snapshot.export_tier(config.tier)) {
        ++out.total;
        auto p = model.predict(features::vectorize(prep.preprocess(r), vocab).values);
        if (p.label == ClassLabel::malware) out.malware.push_back(r.full_name);
    }
    write_json(config.workspace / files::kClassified, {{"config_hash", expected},
                                                       {"tier", std::string(malhunt::to_string(config.tier))},
                                                       {"total", out.total},
                                                       {"malware_count", out.malware.size()},
                                                       {"malware", out.malware}});
    return out;
}

SourceSummary run_detect_source(const RunConfig& config) {
    config.validate();
    const auto sc = make_source_config(config);
    auto snapshot = load_corpus(Stage::detect_source, config);
    auto malware = malware_records(Stage::detect_source, config, snapshot);
    SourceSummary out;
    out.malware = malware.size();
    Json details = Json::array();
    for (const auto& r : malware) {
        auto v = srcdetect::detect(r.file_paths, sc);
        if (v.is_source) out.source.push_back(r.full_name);
        details.push_back({{"repo", r.full_name},
                           {"is_source", v.is_source},
                           {"source_ratio", v.source_ratio},
                           {"source_files", v.source_file_count},
                           {"total_files", v.total_file_count}});
    }
    write_json(config.workspace / files::kSource, {{"config_hash", config_hash(config, Stage::detect_source)},
                                                   {"threshold", sc.threshold},
                                                   {"malware_count", out.malware},
                                                   {"source_count", out.source.size()},
                                                   {"source", out.source},
                                                   {"repositories", details}});
    return out;
}

std::vector<taxonomy::TagAssignment> run_tag(const RunConfig& config) {
    config.validate();
    const auto prep = make_preprocessor(config);
    const auto lexicon = make_lexicon(config, prep);
    auto snapshot = load_corpus(Stage::tag, config);
    auto malware = malware_records(Stage::tag, config, snapshot);
    std::vector<taxonomy::TagAssignment> tags;
    Json assignments = Json::array();
    for (const auto& r : malware) {
        auto t = taxonomy::tag_repository(prep.preprocess(r), lexicon, r.full_name);
        Json types = Json::array(), platforms = Json::array();
        for (auto i : t.types) types.push_back(lexicon.types()[i]);
        for (auto i : t.platforms) platforms.push_back(lexicon.platforms()[i]);
        assignments.push_back({{"repo", t.repo_name}, {"types", types}, {"platforms", platforms}});
        tags.push_back(std::move(t));
    }
    write_json(config.workspace / files::kTags, {{"config_hash", config_hash(config, Stage::tag)},
                                                 {"types", lexicon.types()},
                                                 {"platforms", lexicon.platforms()},
                                                 {"assignments", assignments}});
    return tags;
}

analytics::Report run_report(const RunConfig& config) {
    config.validate();
    const auto prep = make_preprocessor(config);
    const auto lexicon = make_lexicon(config, prep);
    auto snapshot = load_corpus(Stage::report, config);
    auto malware = malware_records(Stage::report, config, snapshot);

    const auto tags_path = config.workspace / files::kTags;
    auto doc = parse_artifact(Stage::report, tags_path);
    require_hash(Stage::report, tags_path, doc.value("config_hash", ""), config_hash(config, Stage::tag));
    std::map<std::string, std::size_t> type_index, platform_index;
    for (std::size_t i = 0; i < lexicon.types().size(); ++i) type_index[lexicon.types()[i]] = i;
    for (std::size_t i = 0; i < lexicon.platforms().size(); ++i) platform_index[lexicon.platforms()[i]] = i;
    std::vector<taxonomy::TagAssignment> tags;
    for (const auto& a : doc.at("assignments")) {
        taxonomy::TagAssignment t;
        t.repo_name = a.at("repo").get<std::string>();
        for (const auto& n : a.at("types")) t.types.insert(type_index.at(n.get<std::string>()));
        for (const auto& n : a.at("platforms")) t.platforms.insert(platform_index.at(n.get<std::string>()));
        tags.push_back(std::move(t));
    }

    analytics::ReportOptions options;
    options.top_k = config.top_k;
    options.config_hash = config_hash(config, Stage::report);
    auto report = analytics::build_report(malware, tags, lexicon, options);
    corpus::write_file_atomic(config.workspace / files::kReport, report.json_text);
    fs::create_directories(config.workspace / files::kFigures);
    for (const auto& [name, csv] : report.figure_csv) corpus::write_file_atomic(config.workspace / files::kFigures / name, csv);
    return report;
}

std::size_t run_make_fixture(const RunConfig& config, std::size_t per_class) {
    if (!config.seed) throw ValidationError("make-fixture: --seed is required");
    fs::create_directories(config.workspace);
    auto fixture = fixtures::make_labeled_corpus(per_class, *config.seed);
    corpus::CorpusStore(config.workspace).save(fixture.snapshot());
    return fixture.repositories.size();
}

}  // namespace malhunt::pipeline
