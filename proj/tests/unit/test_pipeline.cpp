#include "malhunt/errors.hpp"
#include "malhunt/fixtures.hpp"
#include "malhunt/mock_archive.hpp"
#include "malhunt/pipeline.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>

using namespace malhunt;
using namespace malhunt::pipeline;

namespace {

RunConfig workspace_config(const std::filesystem::path& dir) {
    RunConfig c;
    c.workspace = dir;
    c.seed = 3;
    return c;
}

std::string slurp(const std::filesystem::path& p) { return corpus::read_file(p); }

}  // namespace

TEST(Budgets, ParseAndFormat) {
    auto b = parse_budgets("readme=10,title=30,topics=10,description=400,file_names=100");
    EXPECT_EQ(b, features::default_budgets());
    EXPECT_EQ(format_budgets(b), "title=30,topics=10,description=400,file_names=100,readme=10");
    EXPECT_THROW(parse_budgets("title=30"), ValidationError);
    EXPECT_THROW(parse_budgets("title=30,title=2,topics=1,description=1,file_names=1,readme=1"), ValidationError);
    EXPECT_THROW(parse_budgets("title=x,topics=10,description=400,file_names=100,readme=10"), ValidationError);
    EXPECT_THROW(parse_budgets("colour=1,topics=10,description=400,file_names=100,readme=10"), ValidationError);
}

TEST(RunConfig, Validation) {
    RunConfig c;
    EXPECT_NO_THROW(c.validate());
    c.alpha = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.folds = 1;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.threshold = 1.5;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(ConfigHash, StableAndScoped) {
    RunConfig a, b;
    EXPECT_EQ(config_hash(a, Stage::train), config_hash(b, Stage::train));
    EXPECT_EQ(config_hash(a, Stage::train), config_hash(a, Stage::classify));
    b.alpha = 0.5;
    EXPECT_NE(config_hash(a, Stage::train), config_hash(b, Stage::train));
    b = a;
    b.threshold = 0.9;
    EXPECT_EQ(config_hash(a, Stage::train), config_hash(b, Stage::train));
    EXPECT_NE(config_hash(a, Stage::detect_source), config_hash(b, Stage::detect_source));
    b = a;
    b.seed = 99;
    EXPECT_EQ(config_hash(a, Stage::train), config_hash(b, Stage::train));
    EXPECT_NE(config_hash(a, Stage::evaluate), config_hash(b, Stage::evaluate));
    b = a;
    b.top_k = 3;
    EXPECT_EQ(config_hash(a, Stage::tag), config_hash(b, Stage::tag));
    EXPECT_NE(config_hash(a, Stage::report), config_hash(b, Stage::report));
}

TEST(Stages, TrainWithoutLabelsNamesTheFile) {
    oracle::TempDir dir;
    auto cfg = workspace_config(dir.path());
    try {
        run_train(cfg);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("labels.jsonl"), std::string::npos) << e.what();
    }
}

TEST(Stages, EndToEndOnFixture) {
    oracle::TempDir dir;
    auto cfg = workspace_config(dir.path());
    EXPECT_EQ(run_make_fixture(cfg, 30), 60u);

    auto r1 = run_evaluate(cfg);
    const auto eval1 = slurp(dir.path() / files::kEvalReport);
    run_evaluate(cfg);
    EXPECT_EQ(slurp(dir.path() / files::kEvalReport), eval1);
    EXPECT_EQ(r1.evaluated, 60u);
    EXPECT_EQ(r1.folds, 10u);

    auto trained = run_train(cfg);
    EXPECT_EQ(trained.vocabulary.width(), 550u);
    auto classified = run_classify(cfg);
    EXPECT_EQ(classified.total, 60u);
    EXPECT_TRUE(std::is_sorted(classified.malware.begin(), classified.malware.end()));

    auto source = run_detect_source(cfg);
    EXPECT_EQ(source.malware, classified.malware.size());
    for (const auto& s : source.source)
        EXPECT_TRUE(std::binary_search(classified.malware.begin(), classified.malware.end(), s)) << s;

    auto tags = run_tag(cfg);
    EXPECT_EQ(tags.size(), classified.malware.size());
    auto report = run_report(cfg);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / files::kFigures / "type_platform_matrix.csv"));
    auto j = nlohmann::json::parse(slurp(dir.path() / files::kReport));
    EXPECT_EQ(j["repositories"], classified.malware.size());
}

TEST(Stages, ConfigMismatchIsRefused) {
    oracle::TempDir dir;
    auto cfg = workspace_config(dir.path());
    run_make_fixture(cfg, 10);
    run_train(cfg);
    auto changed = cfg;
    changed.alpha = 2.0;
    EXPECT_THROW(run_classify(changed), ValidationError);
    EXPECT_NO_THROW(run_classify(cfg));
    EXPECT_THROW(run_report(cfg), ValidationError);  // tags.json missing
}

TEST(Stages, EvaluateRequiresSeed) {
    oracle::TempDir dir;
    auto cfg = workspace_config(dir.path());
    run_make_fixture(cfg, 10);
    cfg.seed.reset();
    EXPECT_THROW(run_evaluate(cfg), ValidationError);
}

TEST(Stages, HarvestThenDedup) {
    oracle::TempDir dir;
    auto cfg = workspace_config(dir.path());
    harvest::MockArchive archive;
    harvest::KeywordTiers tiers({"malware"}, {"malware", "keylogger"}, {"malware", "keylogger", "botnet"});
    fixtures::populate_mock_archive(archive, tiers, 12);
    // Mirror one repository under another owner.
    auto names = archive.names();
    auto src = std::find_if(names.begin(), names.end(), [](const auto& n) { return n.rfind("owner", 0) == 0; });
    ASSERT_NE(src, names.end());
    harvest::MockRepository mirror;
    mirror.meta = archive.repository(*src);
    mirror.meta.owner = "mirror";
    mirror.meta.full_name = "mirror/" + mirror.meta.name;
    mirror.readme = archive.readme(*src);
    for (const auto& f : archive.file_tree(*src, mirror.meta.default_branch))
        if (f.back() != '/') mirror.files.push_back(f);
    archive.add(mirror);
    archive.set_user("mirror", {0, 0});

    cfg.keywords_dir = std::filesystem::path(MALHUNT_SOURCE_DIR) / "keywords";
    harvest::ManualClock clock;
    harvest::HarvestOptions opts;
    opts.initial_backoff = std::chrono::milliseconds{1};
    auto kw = dir.path() / "kw";
    std::filesystem::create_directories(kw);
    corpus::write_file_atomic(kw / "q1.txt", "malware\n");
    corpus::write_file_atomic(kw / "q50.txt", "malware\nkeylogger\n");
    corpus::write_file_atomic(kw / "q137.txt", "malware\nkeylogger\nbotnet\n");
    cfg.keywords_dir = kw;
    auto h = run_harvest(cfg, archive, clock, harvest::RateLimitPolicy::authenticated_default(), opts);
    EXPECT_EQ(h.corpus_size, 13u);
    auto d = run_dedup(cfg);
    ASSERT_EQ(d.removed.size(), 1u);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / files::kNearDuplicates));
    EXPECT_EQ(corpus::CorpusStore(dir.path()).load().records().size(), 12u);
}
