#pragma once

#include "malhunt/corpus.hpp"
#include "malhunt/types.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt::harvest {

/// The archive's seven result orderings. Repeating a query under each one
/// recovers more than the per-query result cap.
enum class RankOrder : std::uint8_t {
    best_match,
    most_stars,
    fewest_stars,
    most_forks,
    fewest_forks,
    most_recent,
    least_recent
};

inline constexpr std::array<RankOrder, 7> kAllRankOrders{RankOrder::best_match,  RankOrder::most_stars,
                                                         RankOrder::fewest_stars, RankOrder::most_forks,
                                                         RankOrder::fewest_forks, RankOrder::most_recent,
                                                         RankOrder::least_recent};

std::string_view to_string(RankOrder order);
std::optional<RankOrder> parse_rank_order(std::string_view text);

struct SearchTask {
    std::string keyword;
    RankOrder rank_order = RankOrder::best_match;
    std::string page_cursor;  // opaque; empty = first page

    bool operator==(const SearchTask&) const = default;
};

/// keywords x orders, keyword-major. Throws EmptyKeywordSet / ValidationError.
std::vector<SearchTask> build_query_plan(std::span<const std::string> keywords, std::span<const RankOrder> orders);

/// One keyword per line; blank lines and '#' comments skipped; order kept,
/// duplicates removed.
std::vector<std::string> parse_keywords(std::string_view text);
std::vector<std::string> load_keywords(const std::filesystem::path& path);

/// The three nested keyword tiers. Throws ValidationError unless
/// Q1 is a subset of Q50 and Q50 a subset of Q137.
class KeywordTiers {
public:
    KeywordTiers(std::vector<std::string> q1, std::vector<std::string> q50, std::vector<std::string> q137);
    static KeywordTiers builtin();
    /// Reads q1.txt, q50.txt and q137.txt from `dir`.
    static KeywordTiers load(const std::filesystem::path& dir);

    const std::vector<std::string>& keywords(QueryTier tier) const { return lists_[static_cast<std::size_t>(tier)]; }
    /// Smallest tier containing `keyword`, if any.
    std::optional<QueryTier> smallest_tier(std::string_view keyword) const;

private:
    std::array<std::vector<std::string>, 3> lists_;
};

// ---------------------------------------------------------------------------
// Rate limiting

using TimePoint = std::chrono::steady_clock::time_point;

struct RateLimitPolicy {
    std::size_t max_requests = 30;
    std::chrono::seconds window{60};
    bool authenticated = true;

    static RateLimitPolicy authenticated_default() { return {30, std::chrono::seconds{60}, true}; }
    static RateLimitPolicy unauthenticated_default() { return {10, std::chrono::seconds{60}, false}; }
    void validate() const;
};

/// Sliding-window limiter: no window of length `policy.window` contains more
/// than `policy.max_requests` grants. Grants are totally ordered and
/// non-decreasing; safe to share between threads.
class SlidingWindowLimiter {
public:
    explicit SlidingWindowLimiter(RateLimitPolicy policy);

    /// Earliest time >= now at which the next request may be sent. The grant
    /// is recorded; the caller waits until the returned time.
    TimePoint acquire_permit(TimePoint now);

    const RateLimitPolicy& policy() const { return policy_; }

private:
    RateLimitPolicy policy_;
    std::mutex mutex_;
    std::deque<TimePoint> recent_;  // the last max_requests grants
};

/// Time source for the harvester; tests substitute ManualClock.
class Clock {
public:
    virtual ~Clock() = default;
    virtual TimePoint now() = 0;
    virtual void sleep_until(TimePoint t) = 0;
    virtual Timestamp wall_now() = 0;
};

class SystemClock final : public Clock {
public:
    TimePoint now() override;
    void sleep_until(TimePoint t) override;
    Timestamp wall_now() override;
};

/// Simulated clock: sleeping advances time instantly.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Timestamp wall_origin = Timestamp{std::chrono::sys_days{Date{std::chrono::year{2020}, std::chrono::month{1}, std::chrono::day{1}}}});
    TimePoint now() override;
    void sleep_until(TimePoint t) override;
    Timestamp wall_now() override;
    void advance(std::chrono::nanoseconds d);

private:
    std::mutex mutex_;
    TimePoint now_{};
    Timestamp wall_origin_;
};

// ---------------------------------------------------------------------------
// Archive access

struct SearchPage {
    std::uint64_t total_count = 0;
    std::vector<std::string> full_names;
};

struct RepoMetadata {
    std::string full_name;
    std::string name;
    std::string owner;
    std::string description;
    std::vector<std::string> topics;
    Date created_at{};
    Date modified_at{};
    std::uint64_t forks = 0;
    std::uint64_t watchers = 0;
    std::uint64_t stars = 0;
    std::string default_branch = "main";
};

struct UserInfo {
    std::uint64_t followers = 0;
    std::uint64_t following = 0;
};

/// Archive REST operations. Implementations throw AuthError, GoneError or
/// ApiError on non-success responses.
class ArchiveApi {
public:
    virtual ~ArchiveApi() = default;
    /// `page` is 1-based.
    virtual SearchPage search(std::string_view keyword, RankOrder order, int page, int per_page) = 0;
    virtual RepoMetadata repository(std::string_view full_name) = 0;
    /// nullopt when the repository has no README.
    virtual std::optional<std::string> readme(std::string_view full_name) = 0;
    /// Paths of the default-branch tree; directories carry a trailing '/'.
    virtual std::vector<std::string> file_tree(std::string_view full_name, std::string_view branch) = 0;
    virtual UserInfo user(std::string_view login) = 0;
};

/// GitHub-compatible REST client over HTTP(S).
class HttpArchiveApi final : public ArchiveApi {
public:
    /// `base_url` like "https://api.github.com" or "http://127.0.0.1:8080".
    /// An empty token means unauthenticated access.
    HttpArchiveApi(std::string base_url, std::string token = {});
    ~HttpArchiveApi() override;

    SearchPage search(std::string_view keyword, RankOrder order, int page, int per_page) override;
    RepoMetadata repository(std::string_view full_name) override;
    std::optional<std::string> readme(std::string_view full_name) override;
    std::vector<std::string> file_tree(std::string_view full_name, std::string_view branch) override;
    UserInfo user(std::string_view login) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Token from ARCHIVE_API_TOKEN, empty if unset.
std::string token_from_environment();

/// Sort/order query parameters for a rank order; empty sort = best match.
std::pair<std::string, std::string> sort_params(RankOrder order);

// ---------------------------------------------------------------------------
// Harvesting

struct HarvestOptions {
    int page_size = 100;
    int max_pages = 10;  // page_size * max_pages = per-task cap of 1000
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::size_t workers = 1;
};

struct HarvestStats {
    std::size_t tasks = 0;
    std::size_t requests = 0;
    std::size_t stubs = 0;      // including duplicates across tasks
    std::size_t distinct = 0;
    std::size_t fetched = 0;
    std::size_t gone = 0;
    std::size_t pathological = 0;
    std::size_t failed = 0;
    std::size_t stored = 0;
};

/// No files and no description or README text.
bool is_pathological(const RepositoryRecord& record);

class Harvester {
public:
    Harvester(ArchiveApi& api, Clock& clock, RateLimitPolicy policy, HarvestOptions options = {});

    /// Up to page_size * max_pages repository names for the task.
    std::vector<std::string> execute_search(const SearchTask& task);

    /// All ten fields populated (empty text where absent). Throws GoneError
    /// for deleted repositories.
    RepositoryRecord fetch_repository(const std::string& full_name, QueryTier tier = QueryTier::q137);

    /// Searches every keyword of `tier` under all seven orders, fetches each
    /// distinct repository and upserts it into `snapshot`. Each record's tier
    /// is the smallest tier whose keywords found it. Deleted and pathological
    /// repositories are skipped.
    HarvestStats harvest(const KeywordTiers& tiers, QueryTier tier, corpus::CorpusSnapshot& snapshot);

    std::size_t requests_sent() const { return requests_; }

private:
    template <typename Fn>
    auto call(Fn&& fn);

    ArchiveApi& api_;
    Clock& clock_;
    SlidingWindowLimiter limiter_;
    HarvestOptions options_;
    std::atomic<std::size_t> requests_{0};
};

}  // namespace malhunt::harvest
