#include "malhunt/harvester.hpp"

#include "malhunt/errors.hpp"
#include "malhunt/resources.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace malhunt::harvest {

using Json = nlohmann::json;

std::string_view to_string(RankOrder order) {
    switch (order) {
        case RankOrder::best_match: return "best_match";
        case RankOrder::most_stars: return "most_stars";
        case RankOrder::fewest_stars: return "fewest_stars";
        case RankOrder::most_forks: return "most_forks";
        case RankOrder::fewest_forks: return "fewest_forks";
        case RankOrder::most_recent: return "most_recent";
        case RankOrder::least_recent: return "least_recent";
    }
    return "unknown";
}

std::optional<RankOrder> parse_rank_order(std::string_view text) {
    for (auto o : kAllRankOrders) {
        if (to_string(o) == text) return o;
    }
    return std::nullopt;
}

std::pair<std::string, std::string> sort_params(RankOrder order) {
    switch (order) {
        case RankOrder::best_match: return {"", ""};
        case RankOrder::most_stars: return {"stars", "desc"};
        case RankOrder::fewest_stars: return {"stars", "asc"};
        case RankOrder::most_forks: return {"forks", "desc"};
        case RankOrder::fewest_forks: return {"forks", "asc"};
        case RankOrder::most_recent: return {"updated", "desc"};
        case RankOrder::least_recent: return {"updated", "asc"};
    }
    return {"", ""};
}

std::vector<SearchTask> build_query_plan(std::span<const std::string> keywords, std::span<const RankOrder> orders) {
    if (keywords.empty()) throw EmptyKeywordSet();
    if (orders.empty()) throw ValidationError("query plan needs at least one rank order");
    std::vector<SearchTask> plan;
    plan.reserve(keywords.size() * orders.size());
    for (const auto& kw : keywords) {
        if (kw.find_first_not_of(" \t\r\n") == std::string::npos) throw ValidationError("blank keyword in keyword set");
        for (auto order : orders) plan.push_back({kw, order, {}});
    }
    return plan;
}

std::vector<std::string> parse_keywords(std::string_view text) {
    std::vector<std::string> out;
    std::set<std::string, std::less<>> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        auto last = line.find_last_not_of(" \t\r");
        auto kw = line.substr(first, last - first + 1);
        if (seen.insert(kw).second) out.push_back(std::move(kw));
    }
    return out;
}

std::vector<std::string> load_keywords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot read keyword file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_keywords(buf.str());
}

KeywordTiers::KeywordTiers(std::vector<std::string> q1, std::vector<std::string> q50, std::vector<std::string> q137)
    : lists_{std::move(q1), std::move(q50), std::move(q137)} {
    for (std::size_t t = 0; t + 1 < lists_.size(); ++t) {
        std::set<std::string> larger(lists_[t + 1].begin(), lists_[t + 1].end());
        for (const auto& kw : lists_[t]) {
            if (!larger.contains(kw)) {
                throw ValidationError("keyword '" + kw + "' of tier " + std::string(to_string(kAllTiers[t])) +
                                      " is missing from tier " + std::string(to_string(kAllTiers[t + 1])));
            }
        }
    }
    for (auto tier : kAllTiers) {
        if (keywords(tier).empty()) throw EmptyKeywordSet();
    }
}

KeywordTiers KeywordTiers::builtin() {
    return KeywordTiers(parse_keywords(resources::keywords(QueryTier::q1)),
                        parse_keywords(resources::keywords(QueryTier::q50)),
                        parse_keywords(resources::keywords(QueryTier::q137)));
}

KeywordTiers KeywordTiers::load(const std::filesystem::path& dir) {
    return KeywordTiers(load_keywords(dir / "q1.txt"), load_keywords(dir / "q50.txt"), load_keywords(dir / "q137.txt"));
}

std::optional<QueryTier> KeywordTiers::smallest_tier(std::string_view keyword) const {
    for (auto tier : kAllTiers) {
        const auto& list = keywords(tier);
        if (std::find(list.begin(), list.end(), keyword) != list.end()) return tier;
    }
    return std::nullopt;
}

void RateLimitPolicy::validate() const {
    if (max_requests == 0) throw ValidationError("rate limit max_requests must be > 0");
    if (window.count() <= 0) throw ValidationError("rate limit window must be positive");
}

SlidingWindowLimiter::SlidingWindowLimiter(RateLimitPolicy policy) : policy_(policy) { policy_.validate(); }

TimePoint SlidingWindowLimiter::acquire_permit(TimePoint now) {
    std::lock_guard lock(mutex_);
    TimePoint grant = now;
    if (!recent_.empty()) grant = std::max(grant, recent_.back());
    if (recent_.size() == policy_.max_requests) {
        // The oldest of the last max_requests grants must have left the window.
        grant = std::max(grant, recent_.front() + policy_.window);
        recent_.pop_front();
    }
    recent_.push_back(grant);
    return grant;
}

TimePoint SystemClock::now() { return std::chrono::steady_clock::now(); }
void SystemClock::sleep_until(TimePoint t) { std::this_thread::sleep_until(t); }
Timestamp SystemClock::wall_now() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

ManualClock::ManualClock(Timestamp wall_origin) : wall_origin_(wall_origin) {}

TimePoint ManualClock::now() {
    std::lock_guard lock(mutex_);
    return now_;
}

void ManualClock::sleep_until(TimePoint t) {
    std::lock_guard lock(mutex_);
    now_ = std::max(now_, t);
}

Timestamp ManualClock::wall_now() {
    std::lock_guard lock(mutex_);
    return wall_origin_ + std::chrono::floor<std::chrono::seconds>(now_.time_since_epoch());
}

void ManualClock::advance(std::chrono::nanoseconds d) {
    std::lock_guard lock(mutex_);
    now_ += d;
}

// ---------------------------------------------------------------------------

std::string token_from_environment() {
    const char* token = std::getenv("ARCHIVE_API_TOKEN");
    return token ? std::string(token) : std::string{};
}

namespace {

std::string string_or_empty(const Json& j, const char* key) {
    auto it = j.find(key);
    return (it == j.end() || it->is_null()) ? std::string{} : it->get<std::string>();
}

std::uint64_t count_or_zero(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) return 0;
    auto v = it->get<std::int64_t>();
    return v < 0 ? 0 : static_cast<std::uint64_t>(v);
}

Date date_of(const Json& j, const char* key) {
    auto text = string_or_empty(j, key);
    auto d = parse_date(text);
    if (!d) throw ApiError(200, std::string("archive returned invalid ") + key + ": '" + text + "'");
    return *d;
}

}  // namespace

struct HttpArchiveApi::Impl {
    std::string host;    // scheme://host[:port]
    std::string prefix;  // path prefix without trailing '/'
    std::string token;

    httplib::Headers headers(const char* accept = "application/vnd.github+json") const {
        httplib::Headers h{{"Accept", accept}, {"User-Agent", "malhunt"}, {"X-GitHub-Api-Version", "2022-11-28"}};
        if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
        return h;
    }

    httplib::Result get(const std::string& path, const httplib::Params& params, const httplib::Headers& hdrs) const {
        httplib::Client cli(host);
        cli.set_connection_timeout(std::chrono::seconds{10});
        cli.set_read_timeout(std::chrono::seconds{30});
        cli.set_follow_location(true);
        return cli.Get(prefix + path, params, hdrs);
    }

    // Maps a failed response to the error hierarchy. `repo_scoped` turns
    // 404/410/451 into GoneError.
    [[noreturn]] void fail(const httplib::Result& res, const std::string& what, bool repo_scoped) const {
        if (!res) throw ApiError(0, what + ": " + httplib::to_string(res.error()));
        const int status = res->status;
        const std::string msg = what + ": HTTP " + std::to_string(status);
        if (status == 401) throw AuthError(status, msg + " (credentials rejected)");
        if (status == 403 || status == 429) {
            if (res->get_header_value("X-RateLimit-Remaining") == "0" || status == 429) {
                throw ApiError(429, msg + " (rate limited)");
            }
            throw AuthError(status, msg + " (forbidden)");
        }
        if (repo_scoped && (status == 404 || status == 410 || status == 451)) throw GoneError(status, msg + " (gone)");
        throw ApiError(status, msg);
    }

    Json get_json(const std::string& path, const httplib::Params& params, bool repo_scoped) const {
        auto res = get(path, params, headers());
        if (!res || res->status != 200) fail(res, "GET " + path, repo_scoped);
        try {
            return Json::parse(res->body);
        } catch (const Json::exception& e) {
            throw ApiError(res->status, "GET " + path + ": malformed JSON: " + e.what());
        }
    }
};

HttpArchiveApi::HttpArchiveApi(std::string base_url, std::string token) : impl_(std::make_unique<Impl>()) {
    while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
    auto scheme_end = base_url.find("://");
    auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    impl_->host = path_start == std::string::npos ? base_url : base_url.substr(0, path_start);
    impl_->prefix = path_start == std::string::npos ? std::string{} : base_url.substr(path_start);
    impl_->token = std::move(token);
}

HttpArchiveApi::~HttpArchiveApi() = default;

SearchPage HttpArchiveApi::search(std::string_view keyword, RankOrder order, int page, int per_page) {
    httplib::Params params{{"q", std::string(keyword)}, {"per_page", std::to_string(per_page)}, {"page", std::to_string(page)}};
    auto [sort, dir] = sort_params(order);
    if (!sort.empty()) {
        params.emplace("sort", sort);
        params.emplace("order", dir);
    }
    auto doc = impl_->get_json("/search/repositories", params, false);
    SearchPage out;
    out.total_count = count_or_zero(doc, "total_count");
    for (const auto& item : doc.at("items")) out.full_names.push_back(item.at("full_name").get<std::string>());
    return out;
}

RepoMetadata HttpArchiveApi::repository(std::string_view full_name) {
    auto doc = impl_->get_json("/repos/" + std::string(full_name), {}, true);
    RepoMetadata m;
    m.full_name = string_or_empty(doc, "full_name");
    m.name = string_or_empty(doc, "name");
    if (doc.contains("owner") && doc["owner"].is_object()) m.owner = string_or_empty(doc["owner"], "login");
    m.description = string_or_empty(doc, "description");
    if (doc.contains("topics") && doc["topics"].is_array()) m.topics = doc["topics"].get<std::vector<std::string>>();
    m.created_at = date_of(doc, "created_at");
    m.modified_at = date_of(doc, "updated_at");
    m.forks = count_or_zero(doc, "forks_count");
    m.watchers = count_or_zero(doc, "subscribers_count");
    m.stars = count_or_zero(doc, "stargazers_count");
    auto branch = string_or_empty(doc, "default_branch");
    if (!branch.empty()) m.default_branch = branch;
    return m;
}

std::optional<std::string> HttpArchiveApi::readme(std::string_view full_name) {
    const std::string path = "/repos/" + std::string(full_name) + "/readme";
    auto res = impl_->get(path, {}, impl_->headers("application/vnd.github.raw+json"));
    if (res && res->status == 404) return std::nullopt;
    if (!res || res->status != 200) impl_->fail(res, "GET " + path, true);
    return res->body;
}

std::vector<std::string> HttpArchiveApi::file_tree(std::string_view full_name, std::string_view branch) {
    const std::string path = "/repos/" + std::string(full_name) + "/git/trees/" + std::string(branch);
    auto res = impl_->get(path, {{"recursive", "1"}}, impl_->headers());
    // 409: empty git repository; 404: branch without a tree.
    if (res && (res->status == 409 || res->status == 404)) return {};
    if (!res || res->status != 200) impl_->fail(res, "GET " + path, true);
    std::vector<std::string> out;
    try {
        auto doc = Json::parse(res->body);
        for (const auto& item : doc.at("tree")) {
            auto p = item.at("path").get<std::string>();
            if (string_or_empty(item, "type") == "tree") p.push_back('/');
            out.push_back(std::move(p));
        }
    } catch (const Json::exception& e) {
        throw ApiError(res->status, "GET " + path + ": malformed JSON: " + e.what());
    }
    return out;
}

UserInfo HttpArchiveApi::user(std::string_view login) {
    auto doc = impl_->get_json("/users/" + std::string(login), {}, false);
    return {count_or_zero(doc, "followers"), count_or_zero(doc, "following")};
}

// ---------------------------------------------------------------------------

bool is_pathological(const RepositoryRecord& record) {
    bool has_file = std::any_of(record.file_paths.begin(), record.file_paths.end(),
                                [](const std::string& p) { return !p.empty() && p.back() != '/'; });
    auto blank = [](const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; };
    return !has_file && blank(record.description) && blank(record.readme);
}

Harvester::Harvester(ArchiveApi& api, Clock& clock, RateLimitPolicy policy, HarvestOptions options)
    : api_(api), clock_(clock), limiter_(policy), options_(options) {
    if (options_.page_size <= 0 || options_.max_pages <= 0) throw ValidationError("page size and page cap must be > 0");
    if (options_.max_retries < 0) throw ValidationError("max_retries must be >= 0");
    if (options_.workers == 0) options_.workers = 1;
}

template <typename Fn>
auto Harvester::call(Fn&& fn) {
    auto backoff = options_.initial_backoff;
    for (int attempt = 0;; ++attempt) {
        clock_.sleep_until(limiter_.acquire_permit(clock_.now()));
        ++requests_;
        try {
            return fn();
        } catch (const GoneError&) {
            throw;
        } catch (const AuthError&) {
            throw;
        } catch (const ApiError& e) {
            if (!e.transient() || attempt >= options_.max_retries) throw;
            spdlog::debug("transient archive error ({}), retrying in {} ms", e.what(), backoff.count());
            clock_.sleep_until(clock_.now() + backoff);
            backoff *= 2;
        }
    }
}

std::vector<std::string> Harvester::execute_search(const SearchTask& task) {
    if (task.keyword.find_first_not_of(" \t\r\n") == std::string::npos) throw ValidationError("blank search keyword");
    const std::size_t cap = static_cast<std::size_t>(options_.page_size) * static_cast<std::size_t>(options_.max_pages);
    int first_page = 1;
    if (!task.page_cursor.empty()) {
        first_page = std::atoi(task.page_cursor.c_str());
        if (first_page < 1) throw ValidationError("invalid page cursor '" + task.page_cursor + "'");
    }
    std::vector<std::string> names;
    for (int page = first_page; page <= options_.max_pages && names.size() < cap; ++page) {
        auto result = call([&] { return api_.search(task.keyword, task.rank_order, page, options_.page_size); });
        for (auto& n : result.full_names) {
            if (names.size() == cap) break;
            names.push_back(std::move(n));
        }
        const auto seen = static_cast<std::uint64_t>(page) * static_cast<std::uint64_t>(options_.page_size);
        if (result.full_names.size() < static_cast<std::size_t>(options_.page_size) || seen >= result.total_count) break;
    }
    return names;
}

RepositoryRecord Harvester::fetch_repository(const std::string& full_name, QueryTier tier) {
    auto meta = call([&] { return api_.repository(full_name); });
    auto readme = call([&] { return api_.readme(full_name); });
    auto tree = call([&] { return api_.file_tree(full_name, meta.default_branch); });
    const std::string owner = meta.owner.empty() ? full_name.substr(0, full_name.find('/')) : meta.owner;
    auto user = call([&] { return api_.user(owner); });

    RepositoryRecord r;
    r.full_name = meta.full_name.empty() ? full_name : meta.full_name;
    r.title = meta.name.empty() ? full_name.substr(full_name.find('/') + 1) : meta.name;
    r.description = std::move(meta.description);
    r.topics = std::move(meta.topics);
    r.readme = readme.value_or(std::string{});
    r.file_paths = std::move(tree);
    r.created_at = meta.created_at;
    r.modified_at = meta.modified_at;
    r.fork_count = meta.forks;
    r.watcher_count = meta.watchers;
    r.star_count = meta.stars;
    r.author_followers = user.followers;
    r.author_following = user.following;
    r.fetched_at = clock_.wall_now();
    r.query_tier = tier;
    validate(r);
    return r;
}

HarvestStats Harvester::harvest(const KeywordTiers& tiers, QueryTier tier, corpus::CorpusSnapshot& snapshot) {
    HarvestStats stats;
    const auto requests_before = requests_.load();
    const auto& keywords = tiers.keywords(tier);
    auto plan = build_query_plan(keywords, kAllRankOrders);
    stats.tasks = plan.size();

    std::map<std::string, QueryTier> found;  // name -> smallest tier that found it
    for (const auto& task : plan) {
        const auto kw_tier = tiers.smallest_tier(task.keyword).value_or(tier);
        for (auto& name : execute_search(task)) {
            ++stats.stubs;
            auto [it, inserted] = found.emplace(std::move(name), kw_tier);
            if (!inserted) it->second = std::min(it->second, kw_tier);
        }
    }
    stats.distinct = found.size();

    std::vector<std::pair<std::string, QueryTier>> queue(found.begin(), found.end());
    std::vector<std::optional<RepositoryRecord>> results(queue.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> gone{0}, failed{0};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;

    auto worker = [&] {
        while (true) {
            const auto i = next.fetch_add(1);
            if (i >= queue.size()) return;
            {
                std::lock_guard lock(fatal_mutex);
                if (fatal) return;
            }
            try {
                results[i] = fetch_repository(queue[i].first, queue[i].second);
            } catch (const GoneError& e) {
                ++gone;
                spdlog::info("skipping {}: {}", queue[i].first, e.what());
            } catch (const AuthError&) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
                return;
            } catch (const Error& e) {
                ++failed;
                spdlog::warn("failed to fetch {}: {}", queue[i].first, e.what());
            }
        }
    };
    if (options_.workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < options_.workers; ++w) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    for (auto& r : results) {
        if (!r) continue;
        ++stats.fetched;
        if (is_pathological(*r)) {
            ++stats.pathological;
            spdlog::info("dropping {}: no content", r->full_name);
            continue;
        }
        if (snapshot.upsert(std::move(*r))) ++stats.stored;
    }
    stats.gone = gone;
    stats.failed = failed;
    stats.requests = requests_.load() - requests_before;
    return stats;
}

}  // namespace malhunt::harvest
