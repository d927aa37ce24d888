#include "malhunt/mock_archive.hpp"

#include "malhunt/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>

namespace malhunt::harvest {

using Json = nlohmann::ordered_json;

namespace {

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> with_directories(const std::vector<std::string>& files) {
    std::set<std::string> entries;
    for (const auto& f : files) {
        entries.insert(f);
        for (auto pos = f.find('/'); pos != std::string::npos; pos = f.find('/', pos + 1)) {
            entries.insert(f.substr(0, pos + 1));
        }
    }
    return {entries.begin(), entries.end()};
}

}  // namespace

void MockArchive::add(MockRepository repo) {
    std::lock_guard lock(mutex_);
    auto& meta = repo.meta;
    if (meta.owner.empty()) meta.owner = meta.full_name.substr(0, meta.full_name.find('/'));
    if (meta.name.empty()) meta.name = meta.full_name.substr(meta.full_name.find('/') + 1);
    std::multiset<std::string> w;
    for (const auto& s : words_of(meta.name)) w.insert(s);
    for (const auto& s : words_of(meta.description)) w.insert(s);
    for (const auto& t : meta.topics) {
        for (const auto& s : words_of(t)) w.insert(s);
    }
    if (repo.readme) {
        for (const auto& s : words_of(*repo.readme)) w.insert(s);
    }
    words_[meta.full_name] = std::move(w);
    users_.try_emplace(meta.owner, UserInfo{});
    auto name = meta.full_name;
    repos_[name] = std::move(repo);
}

void MockArchive::set_user(const std::string& login, UserInfo info) {
    std::lock_guard lock(mutex_);
    users_[login] = info;
}

void MockArchive::mark_deleted(const std::string& full_name) {
    std::lock_guard lock(mutex_);
    auto it = repos_.find(full_name);
    if (it != repos_.end()) it->second.deleted = true;
}

void MockArchive::fail_next(std::size_t count, int status) {
    std::lock_guard lock(mutex_);
    pending_failures_ = count;
    failure_status_ = status;
}

void MockArchive::revoke_credentials(bool revoked) {
    std::lock_guard lock(mutex_);
    revoked_ = revoked;
}

std::size_t MockArchive::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::vector<std::string> MockArchive::names() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, _] : repos_) out.push_back(name);
    return out;
}

// Caller holds mutex_.
void MockArchive::on_call() {
    ++calls_;
    if (revoked_) throw AuthError(401, "mock archive: bad credentials");
    if (pending_failures_ > 0) {
        --pending_failures_;
        if (failure_status_ == 401) throw AuthError(401, "mock archive: injected 401");
        throw ApiError(failure_status_, "mock archive: injected " + std::to_string(failure_status_));
    }
}

const MockRepository& MockArchive::live(std::string_view full_name) const {
    auto it = repos_.find(full_name);
    if (it == repos_.end() || it->second.deleted) throw GoneError(404, "mock archive: " + std::string(full_name) + " not found");
    return it->second;
}

std::vector<std::string> MockArchive::all_matches(std::string_view keyword, RankOrder order) const {
    auto terms = words_of(keyword);
    struct Hit {
        const MockRepository* repo;
        std::size_t score;
    };
    std::vector<Hit> hits;
    if (!terms.empty()) {
        for (const auto& [name, words] : words_) {
            std::size_t score = 0;
            bool all = true;
            for (const auto& t : terms) {
                auto n = words.count(t);
                if (n == 0) {
                    all = false;
                    break;
                }
                score += n;
            }
            if (all) hits.push_back({&repos_.find(name)->second, score});
        }
    }
    auto key = [order](const Hit& h) -> std::int64_t {
        const auto& m = h.repo->meta;
        auto days = [](Date d) { return static_cast<std::int64_t>(std::chrono::sys_days{d}.time_since_epoch().count()); };
        switch (order) {
            case RankOrder::best_match: return -static_cast<std::int64_t>(h.score);
            case RankOrder::most_stars: return -static_cast<std::int64_t>(m.stars);
            case RankOrder::fewest_stars: return static_cast<std::int64_t>(m.stars);
            case RankOrder::most_forks: return -static_cast<std::int64_t>(m.forks);
            case RankOrder::fewest_forks: return static_cast<std::int64_t>(m.forks);
            case RankOrder::most_recent: return -days(m.modified_at);
            case RankOrder::least_recent: return days(m.modified_at);
        }
        return 0;
    };
    std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
        auto ka = key(a), kb = key(b);
        return ka != kb ? ka < kb : a.repo->meta.full_name < b.repo->meta.full_name;
    });
    std::vector<std::string> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.repo->meta.full_name);
    return out;
}

SearchPage MockArchive::search(std::string_view keyword, RankOrder order, int page, int per_page) {
    std::lock_guard lock(mutex_);
    on_call();
    if (page < 1 || per_page < 1 || per_page > 100) throw ApiError(422, "mock archive: invalid paging");
    const auto first = static_cast<std::size_t>(page - 1) * static_cast<std::size_t>(per_page);
    if (first >= kResultWindow) throw ApiError(422, "mock archive: only the first 1000 search results are available");
    auto all = all_matches(keyword, order);
    SearchPage out;
    out.total_count = all.size();
    const auto end = std::min({all.size(), first + static_cast<std::size_t>(per_page), kResultWindow});
    for (auto i = first; i < end; ++i) out.full_names.push_back(all[i]);
    return out;
}

RepoMetadata MockArchive::repository(std::string_view full_name) {
    std::lock_guard lock(mutex_);
    on_call();
    return live(full_name).meta;
}

std::optional<std::string> MockArchive::readme(std::string_view full_name) {
    std::lock_guard lock(mutex_);
    on_call();
    return live(full_name).readme;
}

std::vector<std::string> MockArchive::file_tree(std::string_view full_name, std::string_view branch) {
    std::lock_guard lock(mutex_);
    on_call();
    const auto& repo = live(full_name);
    if (branch != repo.meta.default_branch) return {};
    return with_directories(repo.files);
}

UserInfo MockArchive::user(std::string_view login) {
    std::lock_guard lock(mutex_);
    on_call();
    auto it = users_.find(login);
    if (it == users_.end()) throw ApiError(404, "mock archive: no user " + std::string(login));
    return it->second;
}

// ---------------------------------------------------------------------------

struct MockArchiveServer::Impl {
    MockArchive& archive;
    std::string token;
    httplib::Server server;
    std::thread thread;

    Impl(MockArchive& a, std::string t) : archive(a), token(std::move(t)) {}

    template <typename Fn>
    void guarded(httplib::Response& res, Fn&& fn) {
        auto fail = [&](int status, const std::string& msg) {
            res.status = status;
            res.set_content(Json{{"message", msg}}.dump(), "application/json");
        };
        try {
            fn();
        } catch (const AuthError& e) {
            fail(401, e.what());
        } catch (const GoneError& e) {
            fail(404, e.what());
        } catch (const ApiError& e) {
            if (e.status() == 429) {
                res.set_header("X-RateLimit-Remaining", "0");
                fail(403, e.what());
            } else {
                fail(e.status() == 0 ? 500 : e.status(), e.what());
            }
        } catch (const std::exception& e) {
            fail(500, e.what());
        }
    }

    static std::string iso(Date d) { return format_date(d) + "T00:00:00Z"; }

    void routes() {
        server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
                res.status = 401;
                res.set_content(R"({"message":"Bad credentials"})", "application/json");
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });

        server.Get("/search/repositories", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                RankOrder order = RankOrder::best_match;
                auto sort = req.get_param_value("sort");
                auto dir = req.get_param_value("order");
                for (auto o : kAllRankOrders) {
                    auto [s, d] = sort_params(o);
                    if (!sort.empty() && s == sort && d == (dir.empty() ? "desc" : dir)) order = o;
                }
                int page = req.has_param("page") ? std::stoi(req.get_param_value("page")) : 1;
                int per_page = req.has_param("per_page") ? std::stoi(req.get_param_value("per_page")) : 30;
                auto result = archive.search(req.get_param_value("q"), order, page, per_page);
                Json items = Json::array();
                for (const auto& n : result.full_names) items.push_back({{"full_name", n}});
                Json body{{"total_count", result.total_count}, {"incomplete_results", false}, {"items", items}};
                res.set_content(body.dump(), "application/json");
            });
        });

        server.Get(R"(/repos/([^/]+)/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto m = archive.repository(req.matches[1].str() + "/" + req.matches[2].str());
                Json body{{"full_name", m.full_name},
                          {"name", m.name},
                          {"owner", {{"login", m.owner}}},
                          {"description", m.description.empty() ? Json(nullptr) : Json(m.description)},
                          {"topics", m.topics},
                          {"created_at", iso(m.created_at)},
                          {"updated_at", iso(m.modified_at)},
                          {"forks_count", m.forks},
                          {"stargazers_count", m.stars},
                          {"watchers_count", m.stars},
                          {"subscribers_count", m.watchers},
                          {"default_branch", m.default_branch}};
                res.set_content(body.dump(), "application/json");
            });
        });

        server.Get(R"(/repos/([^/]+)/([^/]+)/readme)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto text = archive.readme(req.matches[1].str() + "/" + req.matches[2].str());
                if (!text) {
                    res.status = 404;
                    res.set_content(R"({"message":"Not Found"})", "application/json");
                    return;
                }
                res.set_content(*text, "text/plain; charset=utf-8");
            });
        });

        server.Get(R"(/repos/([^/]+)/([^/]+)/git/trees/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto name = req.matches[1].str() + "/" + req.matches[2].str();
                auto entries = archive.file_tree(name, req.matches[3].str());
                Json tree = Json::array();
                for (auto p : entries) {
                    bool dir = !p.empty() && p.back() == '/';
                    if (dir) p.pop_back();
                    tree.push_back({{"path", p}, {"type", dir ? "tree" : "blob"}});
                }
                res.set_content(Json{{"tree", tree}, {"truncated", false}}.dump(), "application/json");
            });
        });

        server.Get(R"(/users/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto u = archive.user(req.matches[1].str());
                Json body{{"login", req.matches[1].str()}, {"followers", u.followers}, {"following", u.following}};
                res.set_content(body.dump(), "application/json");
            });
        });
    }
};

MockArchiveServer::MockArchiveServer(MockArchive& archive, std::string required_token)
    : impl_(std::make_unique<Impl>(archive, std::move(required_token))) {
    impl_->routes();
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw StorageError("mock archive server: cannot bind a loopback port");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockArchiveServer::~MockArchiveServer() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace malhunt::harvest
