#pragma once

#include "malhunt/textprep.hpp"
#include "malhunt/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt::corpus {

/// Single-line JSON with keys in a fixed order (no trailing newline).
std::string record_to_json_line(const RepositoryRecord& record);
/// Throws ValidationError on malformed input or violated invariants.
RepositoryRecord record_from_json_line(std::string_view line);

enum class BallotLabel : std::uint8_t { malware, benign, uncertain };

std::string_view to_string(BallotLabel label);
std::optional<BallotLabel> parse_ballot_label(std::string_view text);

struct Ballot {
    std::string repo;
    std::string judge;
    BallotLabel label = BallotLabel::uncertain;
    Timestamp timestamp{};

    bool operator==(const Ballot&) const = default;
};

/// A repository kept by unanimous consensus, with the ballots behind it.
struct LabeledExample {
    std::string repo;
    ClassLabel label = ClassLabel::benign;
    std::vector<Ballot> ballots;

    bool operator==(const LabeledExample&) const = default;
};

std::string labeled_to_json_line(const LabeledExample& example);
LabeledExample labeled_from_json_line(std::string_view line);

/// Tiers containing a record found by a keyword of `smallest` (the tiers are nested).
std::set<QueryTier> tier_closure(QueryTier smallest);

/// In-memory corpus: records keyed by full_name, consensus labels and the
/// query tiers each record belongs to.
class CorpusSnapshot {
public:
    /// Validates, then merges by full_name: the newer fetched_at wins and the
    /// tier becomes the smaller of the two. Returns whether anything changed.
    bool upsert(RepositoryRecord record);

    bool erase(std::string_view full_name);

    const std::map<std::string, RepositoryRecord, std::less<>>& records() const { return records_; }
    const RepositoryRecord* find(std::string_view full_name) const;

    /// Throws ValidationError if `repo` has no record.
    void set_label(const LabeledExample& example);
    const std::map<std::string, LabeledExample, std::less<>>& labels() const { return labels_; }

    std::set<QueryTier> tiers_of(std::string_view full_name) const;

    /// Records whose tier membership contains `tier`, ordered by name.
    std::vector<RepositoryRecord> export_tier(QueryTier tier) const;

    std::string serialize_records() const;
    std::string serialize_labels() const;
    static CorpusSnapshot parse(std::string_view records_jsonl, std::string_view labels_jsonl = {});

private:
    std::map<std::string, RepositoryRecord, std::less<>> records_;
    std::map<std::string, LabeledExample, std::less<>> labels_;
};

/// Hash of the normalized content (title, description, topics, readme and
/// sorted file paths after preprocessing).
std::string content_hash(const RepositoryRecord& record, const textprep::Preprocessor& prep);

/// Groups (size >= 2) of records with identical content hashes. Groups and
/// their members are sorted by name.
std::vector<std::vector<std::string>> find_exact_duplicates(const CorpusSnapshot& snapshot,
                                                            const textprep::Preprocessor& prep);

/// Keeps the first name of each duplicate group; returns the removed names.
std::vector<std::string> drop_exact_duplicates(CorpusSnapshot& snapshot, const textprep::Preprocessor& prep);

/// Pairs whose token-set Jaccard similarity is at least `threshold` but whose
/// content hashes differ. Flagged for human review, never dropped.
struct NearDuplicate {
    std::string first;
    std::string second;
    double similarity = 0.0;
};
std::vector<NearDuplicate> find_near_duplicates(const CorpusSnapshot& snapshot, const textprep::Preprocessor& prep,
                                                double threshold = 0.9);

/// Exclusive advisory lock on a workspace, held for the object's lifetime.
class StoreLock {
public:
    explicit StoreLock(const std::filesystem::path& lock_file);
    ~StoreLock();
    StoreLock(const StoreLock&) = delete;
    StoreLock& operator=(const StoreLock&) = delete;

private:
    int fd_ = -1;
};

/// corpus.jsonl and labels.jsonl inside a workspace directory.
class CorpusStore {
public:
    explicit CorpusStore(std::filesystem::path workspace);

    std::filesystem::path records_path() const { return dir_ / "corpus.jsonl"; }
    std::filesystem::path labels_path() const { return dir_ / "labels.jsonl"; }

    /// Missing files read as empty.
    CorpusSnapshot load() const;
    /// Takes the store lock and atomically replaces both files.
    void save(const CorpusSnapshot& snapshot) const;

private:
    std::filesystem::path dir_;
};

/// Reads a whole file; throws StorageError.
std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename; throws StorageError.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace malhunt::corpus
