#include "malhunt/analytics.hpp"
#include "malhunt/errors.hpp"
#include "malhunt/fixtures.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <random>

using namespace malhunt;
using namespace malhunt::analytics;
using namespace std::chrono;

namespace {

RepositoryRecord rec(std::string name, int year, std::uint64_t stars = 0, std::uint64_t forks = 0,
                     std::uint64_t followers = 0) {
    RepositoryRecord r;
    r.full_name = std::move(name);
    r.title = r.full_name.substr(r.full_name.find('/') + 1);
    r.created_at = std::chrono::year{year} / 1 / 1;
    r.modified_at = r.created_at;
    r.star_count = stars;
    r.fork_count = forks;
    r.author_followers = followers;
    return r;
}

}  // namespace

TEST(Ccdf, Examples) {
    const std::vector<std::uint64_t> v{1, 1, 2, 4};
    EXPECT_EQ(ccdf(v), (CcdfSeries{{1, 1.0}, {2, 0.5}, {4, 0.25}}));
    const std::vector<std::uint64_t> same{7, 7, 7};
    EXPECT_EQ(ccdf(same), (CcdfSeries{{7, 1.0}}));
    EXPECT_THROW(ccdf(std::vector<std::uint64_t>{}), EmptyInput);
}

TEST(Ccdf, Properties) {
    std::mt19937_64 rng(1);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<std::uint64_t> v(1 + rng() % 50);
        for (auto& x : v) x = rng() % 20;
        auto s = ccdf(v);
        EXPECT_EQ(s.front().fraction, 1.0);
        for (std::size_t i = 0; i < s.size(); ++i) {
            EXPECT_GT(s[i].fraction, 0.0);
            EXPECT_LE(s[i].fraction, 1.0);
            if (i) {
                EXPECT_GT(s[i].value, s[i - 1].value);
                EXPECT_LT(s[i].fraction, s[i - 1].fraction);
            }
            std::size_t ge = 0;
            for (auto x : v) ge += x >= s[i].value;
            EXPECT_EQ(s[i].fraction, static_cast<double>(ge) / static_cast<double>(v.size()));
        }
    }
}

TEST(Pearson, Examples) {
    std::vector<double> x, y, neg;
    for (int i = 1; i <= 10; ++i) {
        x.push_back(i);
        y.push_back(2.0 * i + 3.0);
        neg.push_back(-i);
    }
    auto r = pearson(x, y);
    EXPECT_NEAR(r.r, 1.0, 1e-12);
    EXPECT_EQ(r.n, 10u);
    EXPECT_NEAR(pearson(x, neg).r, -1.0, 1e-12);
    EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}).r, 0.5, 1e-12);
}

TEST(Pearson, Degenerate) {
    EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DegenerateInput);
    EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), DegenerateInput);
    EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), DegenerateInput);
}

TEST(Pearson, SymmetryAndSelf) {
    std::mt19937_64 rng(2);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<double> x(2 + rng() % 30), y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = static_cast<double>(rng() % 1000);
            y[i] = static_cast<double>(rng() % 1000);
        }
        x[0] = 0;
        x[1] = 1000;
        y[0] = 1;
        y[1] = 2;
        EXPECT_NEAR(pearson(x, x).r, 1.0, 1e-12);
        EXPECT_EQ(pearson(x, y).r, pearson(y, x).r);
        EXPECT_LE(std::abs(pearson(x, y).r), 1.0 + 1e-12);
    }
}

TEST(Trend, ContiguousYears) {
    std::vector<RepositoryRecord> rs{rec("a/1", 2014), rec("a/2", 2014), rec("b/3", 2014), rec("c/4", 2016)};
    EXPECT_EQ(yearly_trend(rs), (TrendSeries{{2014, 3}, {2015, 0}, {2016, 1}}));
    EXPECT_TRUE(yearly_trend(std::vector<RepositoryRecord>{}).empty());
}

TEST(Trend, GroupedSplitsTotals) {
    textprep::Preprocessor prep;
    auto lex = taxonomy::TagLexicon::defaults(prep);
    std::vector<RepositoryRecord> rs{rec("a/1", 2014), rec("a/2", 2015), rec("b/3", 2017)};
    std::vector<taxonomy::TagAssignment> tags{{"a/1", {0}, {0}}, {"a/2", {1}, {0, 1}}, {"b/3", {}, {}}};
    auto by_type = yearly_trend_by(rs, tags, lex, TrendGroup::type);
    auto by_platform = yearly_trend_by(rs, tags, lex, TrendGroup::platform);
    EXPECT_EQ(by_type.size(), 13u);
    EXPECT_EQ(by_platform.size(), 6u);
    EXPECT_EQ(by_type.at(lex.types()[0]), (TrendSeries{{2014, 1}, {2015, 0}, {2016, 0}, {2017, 0}}));
    std::uint64_t platform_sum = 0;
    for (const auto& [name, series] : by_platform)
        for (const auto& [y, c] : series) platform_sum += c;
    EXPECT_EQ(platform_sum, 3u);  // a/2 is counted twice, b/3 not at all
}

TEST(TopK, RankingsAndTies) {
    std::vector<RepositoryRecord> rs{rec("zed/a", 2015, 5, 1, 10), rec("amy/b", 2015, 5, 3, 50),
                                     rec("amy/c", 2016, 9, 0, 50), rec("bob/d", 2016, 1, 3, 10)};
    EXPECT_EQ(top_repositories(rs, Metric::stars, 10),
              (std::vector<RankedEntry>{{"amy/c", 9}, {"amy/b", 5}, {"zed/a", 5}, {"bob/d", 1}}));
    EXPECT_EQ(top_repositories(rs, Metric::forks, 2), (std::vector<RankedEntry>{{"amy/b", 3}, {"bob/d", 3}}));
    EXPECT_EQ(top_authors(rs, Metric::repo_count, 10),
              (std::vector<RankedEntry>{{"amy", 2}, {"bob", 1}, {"zed", 1}}));
    EXPECT_EQ(top_authors(rs, Metric::followers, 1), (std::vector<RankedEntry>{{"amy", 50}}));
    EXPECT_EQ(parse_metric("watchers"), Metric::watchers);
    EXPECT_FALSE(parse_metric("likes"));
}

TEST(TopK, ProlificAuthorRanksFirst) {
    std::vector<RepositoryRecord> rs;
    for (int i = 0; i < 336; ++i) rs.push_back(rec("prolific/r" + std::to_string(i), 2018));
    for (int i = 0; i < 40; ++i) rs.push_back(rec("other" + std::to_string(i) + "/x", 2018));
    auto top = top_authors(rs, Metric::repo_count, 3);
    ASSERT_EQ(top.size(), 3u);
    EXPECT_EQ(top[0], (RankedEntry{"prolific", 336}));
}

TEST(Report, ContainsEveryFigure) {
    textprep::Preprocessor prep;
    auto lex = taxonomy::TagLexicon::defaults(prep);
    auto corpus = fixtures::make_labeled_corpus(20, 3);
    auto records = corpus.records();
    std::vector<taxonomy::TagAssignment> tags;
    for (const auto& r : records) tags.push_back(taxonomy::tag_repository(prep.preprocess(r), lex, r.full_name));
    auto report = build_report(records, tags, lex, {5, "abc"});
    for (const char* f : {"ccdf_forks.csv", "ccdf_stars.csv", "ccdf_watchers.csv", "ccdf_repos_per_author.csv",
                          "ccdf_author_followers.csv", "type_platform_matrix.csv", "trend_overall.csv",
                          "trend_by_type.csv", "trend_by_platform.csv"})
        EXPECT_TRUE(report.figure_csv.count(f)) << f;
    auto j = nlohmann::json::parse(report.json_text);
    EXPECT_EQ(j["config_hash"], "abc");
    EXPECT_EQ(j["repositories"], records.size());
    EXPECT_LE(j["authors"]["top_by_repo_count"].size(), 5u);
    EXPECT_EQ(build_report(records, tags, lex, {5, "abc"}).json_text, report.json_text);

    std::uint64_t total = 0;
    for (const auto& [y, c] : yearly_trend(records)) total += c;
    EXPECT_EQ(total, records.size());
}

TEST(Report, EmptyCorpus) {
    textprep::Preprocessor prep;
    auto lex = taxonomy::TagLexicon::defaults(prep);
    auto report = build_report({}, {}, lex, {});
    EXPECT_TRUE(report.figure_csv.count("type_platform_matrix.csv"));
    EXPECT_NO_THROW((void)nlohmann::json::parse(report.json_text));
}
