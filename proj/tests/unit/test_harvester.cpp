#include "malhunt/errors.hpp"
#include "malhunt/fixtures.hpp"
#include "malhunt/harvester.hpp"
#include "malhunt/mock_archive.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace malhunt;
using namespace malhunt::harvest;
using namespace std::chrono;

namespace {

MockRepository mock(std::string owner, std::string name, std::string description, std::uint64_t stars = 0) {
    MockRepository r;
    r.meta.owner = std::move(owner);
    r.meta.name = std::move(name);
    r.meta.full_name = r.meta.owner + "/" + r.meta.name;
    r.meta.description = std::move(description);
    r.meta.created_at = year{2015} / 6 / 1;
    r.meta.modified_at = year{2017} / 6 / 1;
    r.meta.stars = stars;
    r.meta.forks = stars % 7;
    r.readme = "# " + r.meta.name;
    r.files = {"src/main.c", "README.md"};
    return r;
}

HarvestOptions fast() {
    HarvestOptions o;
    o.initial_backoff = milliseconds{10};
    return o;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

TEST(QueryPlan, Sizes) {
    const std::vector<std::string> one{"malware"};
    auto plan = build_query_plan(one, kAllRankOrders);
    ASSERT_EQ(plan.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_EQ(plan[i].keyword, "malware");
        EXPECT_EQ(plan[i].rank_order, kAllRankOrders[i]);
        EXPECT_TRUE(plan[i].page_cursor.empty());
    }
    auto tiers = KeywordTiers::builtin();
    EXPECT_EQ(tiers.keywords(QueryTier::q137).size(), 137u);
    EXPECT_EQ(build_query_plan(tiers.keywords(QueryTier::q137), kAllRankOrders).size(), 959u);
    EXPECT_THROW(build_query_plan(std::vector<std::string>{}, kAllRankOrders), EmptyKeywordSet);
    EXPECT_THROW(build_query_plan(std::vector<std::string>{"  "}, kAllRankOrders), ValidationError);
}

TEST(QueryPlan, KeywordMajorOrder) {
    const std::vector<std::string> kws{"a", "b"};
    auto plan = build_query_plan(kws, kAllRankOrders);
    EXPECT_EQ(plan[6].keyword, "a");
    EXPECT_EQ(plan[7].keyword, "b");
    EXPECT_EQ(plan[7].rank_order, RankOrder::best_match);
}

TEST(Keywords, ParseAndTiers) {
    EXPECT_EQ(parse_keywords("# c\nmalware\n\n  rat  \nmalware\n"), (std::vector<std::string>{"malware", "rat"}));
    auto tiers = KeywordTiers::builtin();
    EXPECT_EQ(tiers.keywords(QueryTier::q1), (std::vector<std::string>{"malware"}));
    EXPECT_EQ(tiers.keywords(QueryTier::q50).size(), 50u);
    EXPECT_EQ(tiers.smallest_tier("malware"), QueryTier::q1);
    EXPECT_FALSE(tiers.smallest_tier("calculator"));
    EXPECT_THROW(KeywordTiers({"a"}, {"b"}, {"a", "b"}), ValidationError);
    EXPECT_THROW(KeywordTiers({}, {"a"}, {"a"}), ValidationError);
    for (auto o : kAllRankOrders) EXPECT_EQ(parse_rank_order(to_string(o)), o);
    EXPECT_EQ(sort_params(RankOrder::fewest_stars), (std::pair<std::string, std::string>{"stars", "asc"}));
    EXPECT_TRUE(sort_params(RankOrder::best_match).first.empty());
}

TEST(RateLimiter, ThirtyFirstWaitsForWindow) {
    SlidingWindowLimiter lim(RateLimitPolicy::authenticated_default());
    const TimePoint t0{};
    EXPECT_EQ(lim.acquire_permit(t0), t0);
    for (int i = 1; i < 30; ++i) EXPECT_EQ(lim.acquire_permit(t0 + seconds{i}), t0 + seconds{i});
    EXPECT_GE(lim.acquire_permit(t0 + seconds{30}), t0 + seconds{60});
}

TEST(RateLimiter, UnauthenticatedEleventhIsDelayed) {
    SlidingWindowLimiter lim(RateLimitPolicy::unauthenticated_default());
    const TimePoint t0{};
    for (int i = 0; i < 10; ++i) EXPECT_EQ(lim.acquire_permit(t0 + seconds{i}), t0 + seconds{i});
    EXPECT_GE(lim.acquire_permit(t0 + seconds{10}), t0 + seconds{60});
}

TEST(RateLimiter, NoWindowExceedsLimitOnRandomTraces) {
    std::mt19937_64 rng(6);
    for (int trace = 0; trace < 20; ++trace) {
        RateLimitPolicy p{1 + rng() % 30, seconds{1 + static_cast<long>(rng() % 60)}, true};
        SlidingWindowLimiter lim(p);
        TimePoint now{};
        std::vector<TimePoint> grants;
        for (int i = 0; i < 400; ++i) {
            now += milliseconds{rng() % 3000};
            auto g = lim.acquire_permit(now);
            ASSERT_GE(g, now);
            if (!grants.empty()) ASSERT_GE(g, grants.back());
            grants.push_back(g);
            if (rng() % 2) now = g;
        }
        for (std::size_t i = 0; i < grants.size(); ++i) {
            auto end = std::lower_bound(grants.begin(), grants.end(), grants[i] + p.window);
            ASSERT_LE(static_cast<std::size_t>(end - (grants.begin() + static_cast<std::ptrdiff_t>(i))), p.max_requests);
        }
    }
}

TEST(RateLimiter, PolicyValidation) {
    EXPECT_THROW((RateLimitPolicy{0, seconds{60}, true}.validate()), ValidationError);
    EXPECT_THROW((RateLimitPolicy{5, seconds{0}, true}.validate()), ValidationError);
    EXPECT_NO_THROW(RateLimitPolicy::authenticated_default().validate());
}

TEST(Search, CapsAtOneThousand) {
    MockArchive archive;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 2500; ++i) archive.add(mock("o" + std::to_string(i % 40), "m" + std::to_string(i), "malware sample", rng() % 5000));
    archive.add(mock("x", "unrelated", "weather app"));
    ManualClock clock;
    Harvester h(archive, clock, RateLimitPolicy::authenticated_default(), fast());
    auto stubs = h.execute_search({"malware", RankOrder::best_match, ""});
    EXPECT_EQ(stubs.size(), 1000u);
    EXPECT_EQ(std::set<std::string>(stubs.begin(), stubs.end()).size(), 1000u);
    EXPECT_EQ(h.requests_sent(), 10u);
    EXPECT_TRUE(h.execute_search({"nothingmatches", RankOrder::most_stars, ""}).empty());

    // Plan completeness: the union over all orders covers every single order
    // and reaches past the per-query cap.
    std::set<std::string> all;
    std::vector<std::vector<std::string>> per_order;
    for (auto o : kAllRankOrders) {
        per_order.push_back(h.execute_search({"malware", o, ""}));
        all.insert(per_order.back().begin(), per_order.back().end());
    }
    for (const auto& one : per_order)
        for (const auto& n : one) EXPECT_TRUE(all.count(n));
    EXPECT_GT(all.size(), 1000u);
}

TEST(Search, RevokedTokenIsAuthError) {
    MockArchive archive;
    archive.add(mock("o", "r", "malware"));
    archive.revoke_credentials(true);
    ManualClock clock;
    Harvester h(archive, clock, RateLimitPolicy::authenticated_default(), fast());
    EXPECT_THROW(h.execute_search({"malware", RankOrder::best_match, ""}), AuthError);
    EXPECT_EQ(h.requests_sent(), 1u);  // never retried
}

TEST(Search, RetriesTransientFailures) {
    MockArchive archive;
    archive.add(mock("o", "r", "malware"));
    ManualClock clock;
    Harvester h(archive, clock, RateLimitPolicy::authenticated_default(), fast());
    archive.fail_next(2, 503);
    EXPECT_EQ(h.execute_search({"malware", RankOrder::best_match, ""}), (std::vector<std::string>{"o/r"}));
    EXPECT_EQ(h.requests_sent(), 3u);
    archive.fail_next(10, 500);
    EXPECT_THROW(h.execute_search({"malware", RankOrder::best_match, ""}), ApiError);
    archive.fail_next(0, 500);
    archive.fail_next(1, 422);
    EXPECT_THROW(h.execute_search({"malware", RankOrder::best_match, ""}), ApiError);
}

TEST(Search, RequestsRespectLimiterOnSimulatedClock) {
    MockArchive archive;
    for (int i = 0; i < 50; ++i) archive.add(mock("o", "r" + std::to_string(i), "malware"));
    ManualClock clock;
    HarvestOptions o = fast();
    o.page_size = 1;
    o.max_pages = 45;
    Harvester h(archive, clock, RateLimitPolicy::authenticated_default(), o);
    const auto start = clock.now();
    EXPECT_EQ(h.execute_search({"malware", RankOrder::best_match, ""}).size(), 45u);
    // 45 requests at 30 per minute: the 31st cannot go before 60 s.
    EXPECT_GE(clock.now() - start, seconds{60});
}

TEST(Fetch, FieldsReadmeTopicsAndGone) {
    MockArchive archive;
    auto r = mock("alice", "keylog", "A keylogger");
    r.meta.topics = {"keylogger", "windows", "c"};
    r.meta.watchers = 4;
    r.readme.reset();
    r.meta.default_branch = "master";
    r.files = {"src/a.c", "src/b/c.h", "Makefile"};
    archive.add(r);
    archive.set_user("alice", {120, 3});
    archive.add(mock("bob", "gone", "deleted"));
    archive.set_user("bob", {1, 1});
    archive.mark_deleted("bob/gone");

    ManualClock clock;
    Harvester h(archive, clock, RateLimitPolicy::authenticated_default(), fast());
    auto rec = h.fetch_repository("alice/keylog", QueryTier::q50);
    EXPECT_EQ(rec.full_name, "alice/keylog");
    EXPECT_EQ(rec.title, "keylog");
    EXPECT_EQ(rec.readme, "");
    EXPECT_EQ(rec.topics.size(), 3u);
    EXPECT_EQ(rec.author_followers, 120u);
    EXPECT_EQ(rec.author_following, 3u);
    EXPECT_EQ(rec.watcher_count, 4u);
    EXPECT_EQ(rec.query_tier, QueryTier::q50);
    EXPECT_EQ(rec.file_paths, (std::vector<std::string>{"Makefile", "src/", "src/a.c", "src/b/", "src/b/c.h"}));
    EXPECT_EQ(h.requests_sent(), 4u);
    EXPECT_THROW(h.fetch_repository("bob/gone"), GoneError);

    // Re-fetching an unchanged repository differs only in fetched_at.
    clock.advance(hours{5});
    auto again = h.fetch_repository("alice/keylog", QueryTier::q50);
    EXPECT_NE(again.fetched_at, rec.fetched_at);
    again.fetched_at = rec.fetched_at;
    EXPECT_EQ(again, rec);
}

TEST(Pathological, Definition) {
    RepositoryRecord r;
    r.full_name = "a/b";
    EXPECT_TRUE(is_pathological(r));
    r.file_paths = {"dir/"};
    EXPECT_TRUE(is_pathological(r));
    r.description = "x";
    EXPECT_FALSE(is_pathological(r));
    r.description.clear();
    r.file_paths.push_back("dir/a.c");
    EXPECT_FALSE(is_pathological(r));
}

TEST(Harvest, TierSubsetAndSkips) {
    MockArchive archive;
    auto tiers = KeywordTiers::builtin();
    fixtures::populate_mock_archive(archive, tiers, 45);
    ManualClock clock;
    Harvester h(archive, clock, RateLimitPolicy::authenticated_default(), fast());
    corpus::CorpusSnapshot snap;
    auto stats = h.harvest(tiers, QueryTier::q137, snap);
    EXPECT_EQ(stats.tasks, 959u);
    EXPECT_EQ(stats.gone, 1u);
    EXPECT_EQ(stats.pathological, 1u);
    EXPECT_EQ(stats.failed, 0u);
    EXPECT_EQ(snap.records().size(), 45u);
    EXPECT_FALSE(snap.find("ghost/deleted-malware"));
    EXPECT_FALSE(snap.find("ghost/malware"));

    auto names = [&](QueryTier t) {
        std::set<std::string> s;
        for (const auto& r : snap.export_tier(t)) s.insert(r.full_name);
        return s;
    };
    auto q1 = names(QueryTier::q1), q50 = names(QueryTier::q50), q137 = names(QueryTier::q137);
    EXPECT_TRUE(std::includes(q50.begin(), q50.end(), q1.begin(), q1.end()));
    EXPECT_TRUE(std::includes(q137.begin(), q137.end(), q50.begin(), q50.end()));
    // Each tier export is exactly what that tier's keywords can reach. Longer
    // phrases may contain shorter keywords, so tier sizes are not i%3 counts.
    auto reachable = [&](QueryTier t) {
        std::set<std::string> s;
        for (const auto& kw : tiers.keywords(t))
            for (const auto& n : archive.all_matches(kw, RankOrder::best_match))
                if (n.rfind("ghost/", 0) != 0) s.insert(n);
        return s;
    };
    EXPECT_EQ(q1, reachable(QueryTier::q1));
    EXPECT_EQ(q50, reachable(QueryTier::q50));
    EXPECT_GE(q1.size(), 15u);
    EXPECT_GE(q50.size(), 30u);

    // Harvesting only Q50 keywords finds exactly the Q50 export.
    corpus::CorpusSnapshot narrow;
    Harvester h2(archive, clock, RateLimitPolicy::authenticated_default(), fast());
    h2.harvest(tiers, QueryTier::q50, narrow);
    std::set<std::string> narrow_names;
    for (const auto& [n, r] : narrow.records()) narrow_names.insert(n);
    EXPECT_EQ(narrow_names, q50);
}

TEST(Harvest, ParallelWorkersMatchSequential) {
    MockArchive archive;
    KeywordTiers tiers({"malware"}, {"malware", "keylogger"}, {"malware", "keylogger", "botnet"});
    fixtures::populate_mock_archive(archive, tiers, 30, 77);
    ManualClock c1, c2;
    HarvestOptions par = fast();
    par.workers = 4;
    Harvester seq(archive, c1, RateLimitPolicy::authenticated_default(), fast());
    Harvester p(archive, c2, RateLimitPolicy::authenticated_default(), par);
    corpus::CorpusSnapshot a, b;
    seq.harvest(tiers, QueryTier::q137, a);
    p.harvest(tiers, QueryTier::q137, b);
    EXPECT_EQ(a.serialize_records(), b.serialize_records());
}

TEST(Harvest, AuthFailureIsFatal) {
    MockArchive archive;
    KeywordTiers tiers({"malware"}, {"malware"}, {"malware"});
    fixtures::populate_mock_archive(archive, tiers, 6);
    archive.revoke_credentials(true);
    ManualClock clock;
    Harvester h(archive, clock, RateLimitPolicy::authenticated_default(), fast());
    corpus::CorpusSnapshot snap;
    EXPECT_THROW(h.harvest(tiers, QueryTier::q137, snap), AuthError);
}

TEST(HttpApi, AgainstMockServer) {
    MockArchive archive;
    auto r = mock("alice", "keylog", "windows keylogger malware");
    r.meta.topics = {"keylogger", "windows", "c"};
    r.meta.default_branch = "dev";
    archive.add(r);
    auto nr = mock("bob", "rat", "android rat malware", 50);
    nr.readme.reset();
    archive.add(nr);
    archive.set_user("alice", {7, 8});
    archive.set_user("bob", {1, 2});
    archive.add(mock("carol", "gone", "malware"));
    archive.mark_deleted("carol/gone");

    MockArchiveServer server(archive, "s3cret");
    HttpArchiveApi api(server.base_url(), "s3cret");

    auto page = api.search("malware", RankOrder::most_stars, 1, 10);
    EXPECT_EQ(page.total_count, 3u);
    EXPECT_EQ(page.full_names.front(), "bob/rat");
    EXPECT_EQ(page.full_names, archive.search("malware", RankOrder::most_stars, 1, 10).full_names);

    auto meta = api.repository("alice/keylog");
    EXPECT_EQ(meta.name, "keylog");
    EXPECT_EQ(meta.owner, "alice");
    EXPECT_EQ(meta.topics, r.meta.topics);
    EXPECT_EQ(meta.created_at, r.meta.created_at);
    EXPECT_EQ(meta.default_branch, "dev");
    EXPECT_EQ(api.readme("alice/keylog"), r.readme);
    EXPECT_FALSE(api.readme("bob/rat"));
    EXPECT_EQ(api.file_tree("alice/keylog", "dev"), (std::vector<std::string>{"README.md", "src/", "src/main.c"}));
    EXPECT_TRUE(api.file_tree("alice/keylog", "nope").empty());
    EXPECT_EQ(api.user("alice").followers, 7u);
    EXPECT_THROW(api.repository("carol/gone"), GoneError);

    HttpArchiveApi wrong(server.base_url(), "guess");
    EXPECT_THROW(wrong.search("malware", RankOrder::best_match, 1, 10), AuthError);
    HttpArchiveApi anonymous(server.base_url());
    EXPECT_THROW(anonymous.repository("alice/keylog"), AuthError);

    archive.fail_next(1, 429);
    try {
        api.search("malware", RankOrder::best_match, 1, 10);
        FAIL() << "expected a rate-limit error";
    } catch (const AuthError&) {
        FAIL() << "rate limiting is not an auth failure";
    } catch (const ApiError& e) {
        EXPECT_EQ(e.status(), 429);
        EXPECT_TRUE(e.transient());
    }

    // End to end through HTTP.
    ManualClock clock;
    Harvester h(api, clock, RateLimitPolicy::authenticated_default(), fast());
    KeywordTiers tiers({"malware"}, {"malware"}, {"malware"});
    corpus::CorpusSnapshot snap;
    auto stats = h.harvest(tiers, QueryTier::q1, snap);
    EXPECT_EQ(stats.gone, 1u);
    EXPECT_EQ(snap.records().size(), 2u);
    EXPECT_EQ(snap.find("alice/keylog")->file_paths, (std::vector<std::string>{"README.md", "src/", "src/main.c"}));
}
