#pragma once

#include "malhunt/corpus.hpp"
#include "malhunt/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt::labelsvc {

enum class ConsensusStatus : std::uint8_t { pending, kept_malware, kept_benign, excluded };

std::string_view to_string(ConsensusStatus status);

/// Below quorum: pending. At or above quorum: kept_* iff every ballot is the
/// same non-uncertain label, otherwise excluded.
ConsensusStatus consensus_of(std::span<const corpus::BallotLabel> labels, std::size_t quorum);

/// Single-line JSON {"repo","judge","label","timestamp"}.
std::string ballot_to_json_line(const corpus::Ballot& ballot);
corpus::Ballot ballot_from_json_line(std::string_view line);

struct ServiceConfig {
    std::vector<std::string> judges;
    std::size_t quorum = 3;
    std::uint64_t session_seed = 0;
    /// Append-only ballot log; empty keeps ballots in memory only.
    std::filesystem::path ballots_path;
    /// Where export_groundtruth() writes labels.jsonl; empty disables writing.
    std::filesystem::path labels_path;

    void validate() const;
};

struct Progress {
    std::size_t total = 0;
    std::size_t ballots = 0;
    std::size_t pending = 0;
    std::size_t kept_malware = 0;
    std::size_t kept_benign = 0;
    std::size_t excluded = 0;
    std::map<std::string, std::size_t> remaining;  // judge -> unballoted repositories
};

/// Judge protocol over a fixed candidate set. Thread-safe: ballot writes are
/// serialized, reads see a consistent snapshot.
class LabelService {
public:
    /// Replays any existing ballot log. Throws ValidationError on an invalid
    /// config or a log entry for an unknown repository or judge.
    LabelService(std::vector<RepositoryRecord> candidates, ServiceConfig config);

    /// Next repository the judge has not balloted, following the judge's
    /// session-seeded shuffled order. Throws UnknownJudge.
    std::optional<RepositoryRecord> next_unlabeled(std::string_view judge) const;
    std::size_t remaining(std::string_view judge) const;

    /// Stores the ballot (last write wins per repo and judge) and returns the
    /// repository's consensus. Throws UnknownRepo, UnknownJudge.
    ConsensusStatus submit(const corpus::Ballot& ballot);

    ConsensusStatus consensus(std::string_view repo) const;
    Progress progress() const;

    /// Kept repositories with their class and ballots, sorted by name; also
    /// written to labels_path when configured.
    std::vector<corpus::LabeledExample> export_groundtruth() const;
    /// labels.jsonl contents for the current ballots.
    std::string export_jsonl() const;

    const RepositoryRecord* find(std::string_view repo) const;
    const std::vector<std::string>& judges() const { return config_.judges; }

    /// Names flagged as possible near-duplicates of `repo` (shown to judges).
    void set_near_duplicates(std::map<std::string, std::vector<std::string>, std::less<>> near);
    std::vector<std::string> near_duplicates_of(std::string_view repo) const;

private:
    void check_judge(std::string_view judge) const;
    void apply(const corpus::Ballot& ballot);
    ConsensusStatus consensus_locked(std::string_view repo) const;
    std::vector<corpus::LabeledExample> kept_locked() const;

    ServiceConfig config_;
    std::map<std::string, RepositoryRecord, std::less<>> candidates_;
    std::map<std::string, std::vector<std::string>, std::less<>> queues_;  // judge -> shuffled names
    // repo -> judge -> winning ballot
    std::map<std::string, std::map<std::string, corpus::Ballot>, std::less<>> ballots_;
    std::map<std::string, std::vector<std::string>, std::less<>> near_;
    std::size_t ballot_count_ = 0;
    mutable std::shared_mutex mutex_;
};

/// HTTP+JSON front end. Binds loopback unless told otherwise.
class LabelServer {
public:
    struct Options {
        std::string host = "127.0.0.1";
        int port = 0;  // 0 = ephemeral
        std::filesystem::path ui_dir;  // optional static assets mounted at /
    };

    LabelServer(LabelService& service, Options options);
    ~LabelServer();
    LabelServer(const LabelServer&) = delete;
    LabelServer& operator=(const LabelServer&) = delete;

    int port() const { return port_; }
    std::string base_url() const;

    /// Serves on a background thread until stop() or destruction.
    void start();
    /// Serves on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

}  // namespace malhunt::labelsvc
