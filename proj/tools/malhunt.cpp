// malhunt: command-line front end for the repository mining pipeline.

#include "malhunt/errors.hpp"
#include "malhunt/fixtures.hpp"
#include "malhunt/labelsvc.hpp"
#include "malhunt/mock_archive.hpp"
#include "malhunt/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <random>

namespace {

using namespace malhunt;
namespace pl = malhunt::pipeline;

struct Flags {
    std::string workspace = ".";
    std::string tier = "Q137";
    std::string budgets = pl::format_budgets(features::default_budgets());
    std::string mode = "count";
    double alpha = 1.0;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    double threshold = 0.75;
    std::vector<std::string> extensions;
    std::string stopwords, blacklist, taxonomy, keywords_dir;
    std::size_t top_k = 10;
    bool verbose = false;
    bool quiet = false;
};

pl::RunConfig to_config(const Flags& f, const CLI::Option* seed_opt) {
    pl::RunConfig c;
    auto tier = parse_query_tier(f.tier);
    if (!tier) throw ValidationError("config: tier must be Q1, Q50 or Q137, got '" + f.tier + "'");
    c.tier = *tier;
    c.budgets = pl::parse_budgets(f.budgets);
    auto mode = features::parse_weighting_mode(f.mode);
    if (!mode) throw ValidationError("config: mode must be presence, count or tfidf, got '" + f.mode + "'");
    c.mode = *mode;
    c.alpha = f.alpha;
    c.folds = f.folds;
    if (seed_opt->count() > 0) c.seed = f.seed;
    c.threshold = f.threshold;
    c.extensions = f.extensions;
    c.workspace = f.workspace;
    c.stopwords_file = f.stopwords;
    c.blacklist_file = f.blacklist;
    c.taxonomy_file = f.taxonomy;
    c.keywords_dir = f.keywords_dir;
    c.top_k = f.top_k;
    c.validate();
    return c;
}

int run_harvest(const pl::RunConfig& config, bool live, const std::string& url, std::size_t mock, std::size_t workers,
                int max_pages) {
    const int sources = (live ? 1 : 0) + (url.empty() ? 0 : 1) + (mock > 0 ? 1 : 0);
    if (sources != 1) {
        throw ValidationError("harvest: pass exactly one of --live, --archive-url or --mock");
    }
    harvest::HarvestOptions options;
    options.workers = workers;
    options.max_pages = max_pages;
    harvest::RateLimitPolicy policy;
    pl::HarvestSummary summary;

    if (mock > 0) {
        harvest::MockArchive archive;
        fixtures::populate_mock_archive(archive, pl::make_keyword_tiers(config), mock, config.seed.value_or(fixtures::kDefaultSeed));
        harvest::ManualClock clock;
        options.initial_backoff = std::chrono::milliseconds{0};
        summary = pl::run_harvest(config, archive, clock, policy, options);
    } else {
        const auto token = harvest::token_from_environment();
        policy = token.empty() ? harvest::RateLimitPolicy::unauthenticated_default()
                               : harvest::RateLimitPolicy::authenticated_default();
        if (token.empty()) spdlog::warn("ARCHIVE_API_TOKEN not set; using the unauthenticated rate limit");
        harvest::HttpArchiveApi api(live ? "https://api.github.com" : url, token);
        harvest::SystemClock clock;
        summary = pl::run_harvest(config, api, clock, policy, options);
    }
    const auto& s = summary.stats;
    std::printf("harvest: %zu tasks, %zu requests, %zu stubs (%zu distinct), %zu fetched, %zu stored, "
                "%zu gone, %zu empty, %zu failed; corpus now %zu records\n",
                s.tasks, s.requests, s.stubs, s.distinct, s.fetched, s.stored, s.gone, s.pathological, s.failed,
                summary.corpus_size);
    return 0;
}

int run_label_serve(const pl::RunConfig& config, const std::vector<std::string>& judges, std::size_t quorum,
                    const std::string& host, int port, const std::string& ui_dir, std::size_t sample) {
    if (!config.seed) throw ValidationError("label-serve: --seed is required (judge queues are shuffled)");
    corpus::CorpusStore store(config.workspace);
    auto snapshot = store.load();
    auto candidates = snapshot.export_tier(config.tier);
    if (candidates.empty()) throw ValidationError("label-serve: no records in " + store.records_path().string());
    if (sample > 0 && sample < candidates.size()) {
        // Uniform sample without replacement, then back to name order.
        std::mt19937_64 rng(*config.seed);
        for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng() % i]);
        candidates.resize(sample);
        std::sort(candidates.begin(), candidates.end(),
                  [](const auto& a, const auto& b) { return a.full_name < b.full_name; });
    }

    labelsvc::ServiceConfig sc;
    sc.judges = judges;
    sc.quorum = quorum;
    sc.session_seed = *config.seed;
    sc.ballots_path = config.workspace / pl::files::kBallots;
    sc.labels_path = config.workspace / pl::files::kLabels;
    labelsvc::LabelService service(std::move(candidates), sc);

    const auto prep = pl::make_preprocessor(config);
    std::map<std::string, std::vector<std::string>, std::less<>> near;
    for (const auto& n : corpus::find_near_duplicates(snapshot, prep)) {
        near[n.first].push_back(n.second);
        near[n.second].push_back(n.first);
    }
    service.set_near_duplicates(std::move(near));

    labelsvc::LabelServer server(service, {host, port, ui_dir});
    std::printf("label-serve: %zu candidates, %zu judges, quorum %zu, listening on %s\n",
                service.progress().total, judges.size(), quorum, server.base_url().c_str());
    std::fflush(stdout);
    server.run();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mine source-code archives for malware repositories"};
    app.require_subcommand(1);
    // Subcommands inherit this, so global options may follow the subcommand name.
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with option values (command-line flags take precedence)");

    Flags f;
    app.add_option("-w,--workspace", f.workspace, "Workspace directory holding all artifacts")->capture_default_str();
    app.add_option("--tier", f.tier, "Keyword tier: Q1, Q50 or Q137")->capture_default_str();
    app.add_option("--budgets", f.budgets, "Per-field vocabulary sizes, field=k,...")->capture_default_str();
    app.add_option("--mode", f.mode, "Feature weighting: presence, count or tfidf")->capture_default_str();
    app.add_option("--alpha", f.alpha, "Additive smoothing")->capture_default_str();
    app.add_option("--folds", f.folds, "Cross-validation folds")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", f.seed, "Seed for stochastic stages");
    app.add_option("--threshold", f.threshold, "Source-file ratio a repository must exceed")->capture_default_str();
    app.add_option("--extensions", f.extensions, "Source extensions (replaces the default list)")->delimiter(',');
    app.add_option("--stopwords", f.stopwords, "Stopword list file");
    app.add_option("--blacklist", f.blacklist, "File-name blacklist file");
    app.add_option("--taxonomy", f.taxonomy, "Type/platform keyword file (JSON)");
    app.add_option("--keywords-dir", f.keywords_dir, "Directory with q1.txt, q50.txt, q137.txt");
    app.add_option("--top-k", f.top_k, "Entries in ranked report lists")->capture_default_str();
    app.add_flag("-v,--verbose", f.verbose, "Debug logging");
    app.add_flag("-q,--quiet", f.quiet, "Warnings and errors only");

    auto* harvest_cmd = app.add_subcommand("harvest", "Search the archive and fetch repositories into corpus.jsonl");
    bool live = false;
    std::string archive_url;
    std::size_t mock = 0, workers = 1;
    int max_pages = 10;
    harvest_cmd->add_flag("--live", live, "Query the public archive API");
    harvest_cmd->add_option("--archive-url", archive_url, "Base URL of a compatible archive API");
    harvest_cmd->add_option("--mock", mock, "Harvest from an in-process mock archive with N repositories");
    harvest_cmd->add_option("--workers", workers, "Concurrent fetch workers")->capture_default_str();
    harvest_cmd->add_option("--max-pages", max_pages, "Result pages per search task (100 per page)")->capture_default_str();

    auto* dedup_cmd = app.add_subcommand("dedup", "Drop exact duplicates and flag near-duplicates");
    double near_threshold = 0.9;
    dedup_cmd->add_option("--near-threshold", near_threshold, "Jaccard similarity for near-duplicate flags")->capture_default_str();

    auto* serve_cmd = app.add_subcommand("label-serve", "Serve the judge labeling API");
    std::vector<std::string> judges;
    std::size_t quorum = 3, sample = 0;
    std::string host = "127.0.0.1", ui_dir;
    int port = 8080;
    serve_cmd->add_option("--judges", judges, "Judge ids")->delimiter(',')->required();
    serve_cmd->add_option("--quorum", quorum, "Ballots needed for consensus")->capture_default_str();
    serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", port, "Port (0 = any free port)")->capture_default_str();
    serve_cmd->add_option("--ui-dir", ui_dir, "Static files for the labeling UI");
    serve_cmd->add_option("--sample", sample, "Label a uniform sample of N repositories");

    auto* train_cmd = app.add_subcommand("train", "Select the vocabulary and train the classifier");
    auto* eval_cmd = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
    auto* classify_cmd = app.add_subcommand("classify", "Classify every repository of the tier");
    auto* source_cmd = app.add_subcommand("detect-source", "Keep malware repositories that hold source code");
    auto* tag_cmd = app.add_subcommand("tag", "Assign malware types and target platforms");
    auto* report_cmd = app.add_subcommand("report", "Ecosystem statistics and figure data");
    auto* fixture_cmd = app.add_subcommand("make-fixture", "Write the synthetic labeled corpus into the workspace");
    std::size_t per_class = 60;
    fixture_cmd->add_option("--per-class", per_class, "Repositories per class")->capture_default_str();


    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    spdlog::set_default_logger(spdlog::stderr_color_mt("malhunt"));
    spdlog::set_level(f.verbose ? spdlog::level::debug : f.quiet ? spdlog::level::warn : spdlog::level::info);

    std::string stage = app.get_subcommands().front()->get_name();
    try {
        auto config = to_config(f, seed_opt);
        if (harvest_cmd->parsed()) return run_harvest(config, live, archive_url, mock, workers, max_pages);
        if (dedup_cmd->parsed()) {
            auto s = pl::run_dedup(config, near_threshold);
            std::printf("dedup: removed %zu exact duplicates, flagged %zu near-duplicate pairs\n", s.removed.size(),
                        s.near.size());
        } else if (serve_cmd->parsed()) {
            return run_label_serve(config, judges, quorum, host, port, ui_dir, sample);
        } else if (train_cmd->parsed()) {
            auto t = pl::run_train(config);
            std::printf("train: %zu selected words (width %zu), vocabulary hash %s\n", t.vocabulary.selected_count(),
                        t.vocabulary.width(), t.vocabulary.hash().c_str());
        } else if (eval_cmd->parsed()) {
            auto r = pl::run_evaluate(config);
            const auto& m = r.of(ClassLabel::malware);
            std::printf("evaluate: %zu-fold, %zu examples, accuracy %.4f, malware precision %.4f recall %.4f F1 %.4f\n",
                        r.folds, r.evaluated, r.accuracy, m.precision, m.recall, m.f1);
        } else if (classify_cmd->parsed()) {
            auto s = pl::run_classify(config);
            std::printf("classify: %zu of %zu repositories classified as malware\n", s.malware.size(), s.total);
        } else if (source_cmd->parsed()) {
            auto s = pl::run_detect_source(config);
            std::printf("detect-source: %zu of %zu malware repositories contain source code\n", s.source.size(), s.malware);
        } else if (tag_cmd->parsed()) {
            auto tags = pl::run_tag(config);
            std::size_t typed = std::count_if(tags.begin(), tags.end(), [](const auto& t) { return !t.types.empty(); });
            std::printf("tag: %zu repositories, %zu with at least one type\n", tags.size(), typed);
        } else if (report_cmd->parsed()) {
            auto r = pl::run_report(config);
            std::printf("report: wrote %s and %zu figure files\n", pl::files::kReport, r.figure_csv.size());
        } else if (fixture_cmd->parsed()) {
            auto n = pl::run_make_fixture(config, per_class);
            std::printf("make-fixture: wrote %zu labeled repositories\n", n);
        }
        return 0;
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        if (msg.rfind(stage + ":", 0) != 0) msg = stage + ": " + msg;
        std::fprintf(stderr, "error: %s\n", msg.c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s: %s\n", stage.c_str(), e.what());
        return 2;
    }
}
