#pragma once

#include "malhunt/harvester.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace malhunt::harvest {

struct MockRepository {
    RepoMetadata meta;
    std::optional<std::string> readme;  // nullopt = no README
    std::vector<std::string> files;     // blob paths; directories are derived
    bool deleted = false;
};

/// Deterministic in-memory archive. Search matches every word of the
/// keyword (case-insensitive, whole words) against name, description, topics
/// and README, and serves at most the first 1000 results of any query.
class MockArchive final : public ArchiveApi {
public:
    static constexpr std::size_t kResultWindow = 1000;

    void add(MockRepository repo);
    void set_user(const std::string& login, UserInfo info);
    /// Searches still list the repository; fetching it raises GoneError.
    void mark_deleted(const std::string& full_name);
    /// The next `count` calls fail with `status` (401 -> AuthError).
    void fail_next(std::size_t count, int status);
    /// Every call raises AuthError until cleared.
    void revoke_credentials(bool revoked);

    std::size_t calls() const;
    std::vector<std::string> names() const;

    SearchPage search(std::string_view keyword, RankOrder order, int page, int per_page) override;
    RepoMetadata repository(std::string_view full_name) override;
    std::optional<std::string> readme(std::string_view full_name) override;
    std::vector<std::string> file_tree(std::string_view full_name, std::string_view branch) override;
    UserInfo user(std::string_view login) override;

    /// Full ordered match list, ignoring the result window (for tests).
    std::vector<std::string> all_matches(std::string_view keyword, RankOrder order) const;

private:
    void on_call();
    const MockRepository& live(std::string_view full_name) const;

    mutable std::mutex mutex_;
    std::map<std::string, MockRepository, std::less<>> repos_;
    std::map<std::string, std::multiset<std::string>, std::less<>> words_;  // name -> searchable words
    std::map<std::string, UserInfo, std::less<>> users_;
    std::size_t calls_ = 0;
    std::size_t pending_failures_ = 0;
    int failure_status_ = 500;
    bool revoked_ = false;
};

/// Serves a MockArchive over the GitHub-compatible REST subset used by
/// HttpArchiveApi, on 127.0.0.1 with an ephemeral port.
class MockArchiveServer {
public:
    /// Requests must carry `Bearer <token>` when `required_token` is non-empty.
    explicit MockArchiveServer(MockArchive& archive, std::string required_token = {});
    ~MockArchiveServer();
    MockArchiveServer(const MockArchiveServer&) = delete;
    MockArchiveServer& operator=(const MockArchiveServer&) = delete;

    int port() const { return port_; }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

}  // namespace malhunt::harvest
