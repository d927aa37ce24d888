#include "malhunt/corpus.hpp"

#include "malhunt/errors.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace malhunt::corpus {

using Json = nlohmann::ordered_json;

namespace {

std::uint64_t get_count(const Json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ValidationError(std::string("field '") + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

Date get_date(const Json& j, const char* key) {
    auto d = parse_date(j.at(key).get<std::string>());
    if (!d) throw ValidationError(std::string("field '") + key + "' is not a YYYY-MM-DD date");
    return *d;
}

template <typename Fn>
auto parse_line(std::string_view line, const char* what, Fn&& fn) {
    try {
        return fn(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

Json ballot_json(const Ballot& b) {
    return Json{{"judge", b.judge}, {"label", std::string(to_string(b.label))}, {"timestamp", format_timestamp(b.timestamp)}};
}

}  // namespace

std::string record_to_json_line(const RepositoryRecord& r) {
    Json j;
    j["full_name"] = r.full_name;
    j["title"] = r.title;
    j["description"] = r.description;
    j["topics"] = r.topics;
    j["readme"] = r.readme;
    j["file_paths"] = r.file_paths;
    j["created_at"] = format_date(r.created_at);
    j["modified_at"] = format_date(r.modified_at);
    j["fork_count"] = r.fork_count;
    j["watcher_count"] = r.watcher_count;
    j["star_count"] = r.star_count;
    j["author_followers"] = r.author_followers;
    j["author_following"] = r.author_following;
    j["fetched_at"] = format_timestamp(r.fetched_at);
    j["query_tier"] = std::string(to_string(r.query_tier));
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

RepositoryRecord record_from_json_line(std::string_view line) {
    auto record = parse_line(line, "corpus record", [](const Json& j) {
        RepositoryRecord r;
        r.full_name = j.at("full_name").get<std::string>();
        r.title = j.at("title").get<std::string>();
        r.description = j.at("description").get<std::string>();
        r.topics = j.at("topics").get<std::vector<std::string>>();
        r.readme = j.at("readme").get<std::string>();
        r.file_paths = j.at("file_paths").get<std::vector<std::string>>();
        r.created_at = get_date(j, "created_at");
        r.modified_at = get_date(j, "modified_at");
        r.fork_count = get_count(j, "fork_count");
        r.watcher_count = get_count(j, "watcher_count");
        r.star_count = get_count(j, "star_count");
        r.author_followers = get_count(j, "author_followers");
        r.author_following = get_count(j, "author_following");
        auto ts = parse_timestamp(j.at("fetched_at").get<std::string>());
        if (!ts) throw ValidationError("field 'fetched_at' is not a timestamp");
        r.fetched_at = *ts;
        auto tier = parse_query_tier(j.at("query_tier").get<std::string>());
        if (!tier) throw ValidationError("field 'query_tier' must be Q1, Q50 or Q137");
        r.query_tier = *tier;
        return r;
    });
    validate(record);
    return record;
}

std::string_view to_string(BallotLabel label) {
    switch (label) {
        case BallotLabel::malware: return "malware";
        case BallotLabel::benign: return "benign";
        case BallotLabel::uncertain: return "uncertain";
    }
    return "unknown";
}

std::optional<BallotLabel> parse_ballot_label(std::string_view text) {
    for (auto l : {BallotLabel::malware, BallotLabel::benign, BallotLabel::uncertain}) {
        if (to_string(l) == text) return l;
    }
    return std::nullopt;
}

std::string labeled_to_json_line(const LabeledExample& ex) {
    Json j;
    j["repo"] = ex.repo;
    j["label"] = std::string(to_string(ex.label));
    Json ballots = Json::array();
    for (const auto& b : ex.ballots) ballots.push_back(ballot_json(b));
    j["ballots"] = std::move(ballots);
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

LabeledExample labeled_from_json_line(std::string_view line) {
    return parse_line(line, "label", [](const Json& j) {
        LabeledExample ex;
        ex.repo = j.at("repo").get<std::string>();
        auto label = parse_class_label(j.at("label").get<std::string>());
        if (!label) throw ValidationError("label must be 'malware' or 'benign'");
        ex.label = *label;
        if (j.contains("ballots")) {
            for (const auto& jb : j.at("ballots")) {
                Ballot b;
                b.repo = ex.repo;
                b.judge = jb.at("judge").get<std::string>();
                auto bl = parse_ballot_label(jb.at("label").get<std::string>());
                auto ts = parse_timestamp(jb.at("timestamp").get<std::string>());
                if (!bl || !ts) throw ValidationError("malformed ballot for " + ex.repo);
                b.label = *bl;
                b.timestamp = *ts;
                ex.ballots.push_back(std::move(b));
            }
        }
        return ex;
    });
}

std::set<QueryTier> tier_closure(QueryTier smallest) {
    std::set<QueryTier> out;
    for (auto t : kAllTiers) {
        if (static_cast<int>(t) >= static_cast<int>(smallest)) out.insert(t);
    }
    return out;
}

bool CorpusSnapshot::upsert(RepositoryRecord record) {
    validate(record);
    auto it = records_.find(record.full_name);
    if (it == records_.end()) {
        records_.emplace(record.full_name, std::move(record));
        return true;
    }
    const auto& existing = it->second;
    const auto tier = std::min(existing.query_tier, record.query_tier);
    RepositoryRecord merged = record.fetched_at > existing.fetched_at ? std::move(record) : existing;
    merged.query_tier = tier;
    if (merged == existing) return false;
    it->second = std::move(merged);
    return true;
}

bool CorpusSnapshot::erase(std::string_view full_name) {
    auto it = records_.find(full_name);
    if (it == records_.end()) return false;
    records_.erase(it);
    if (auto lit = labels_.find(full_name); lit != labels_.end()) labels_.erase(lit);
    return true;
}

const RepositoryRecord* CorpusSnapshot::find(std::string_view full_name) const {
    auto it = records_.find(full_name);
    return it == records_.end() ? nullptr : &it->second;
}

void CorpusSnapshot::set_label(const LabeledExample& example) {
    if (!records_.contains(example.repo)) throw ValidationError("label refers to unknown repository " + example.repo);
    labels_.insert_or_assign(example.repo, example);
}

std::set<QueryTier> CorpusSnapshot::tiers_of(std::string_view full_name) const {
    const auto* r = find(full_name);
    return r ? tier_closure(r->query_tier) : std::set<QueryTier>{};
}

std::vector<RepositoryRecord> CorpusSnapshot::export_tier(QueryTier tier) const {
    std::vector<RepositoryRecord> out;
    for (const auto& [name, r] : records_) {
        if (tier_closure(r.query_tier).contains(tier)) out.push_back(r);
    }
    return out;
}

std::string CorpusSnapshot::serialize_records() const {
    std::string out;
    for (const auto& [_, r] : records_) {
        out += record_to_json_line(r);
        out.push_back('\n');
    }
    return out;
}

std::string CorpusSnapshot::serialize_labels() const {
    std::string out;
    for (const auto& [_, ex] : labels_) {
        out += labeled_to_json_line(ex);
        out.push_back('\n');
    }
    return out;
}

namespace {

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        try {
            fn(line);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

CorpusSnapshot CorpusSnapshot::parse(std::string_view records_jsonl, std::string_view labels_jsonl) {
    CorpusSnapshot snap;
    for_each_line(records_jsonl, [&](std::string_view line) {
        auto r = record_from_json_line(line);
        if (snap.records_.contains(r.full_name)) throw ValidationError("duplicate full_name " + r.full_name);
        snap.records_.emplace(r.full_name, std::move(r));
    });
    for_each_line(labels_jsonl, [&](std::string_view line) { snap.set_label(labeled_from_json_line(line)); });
    return snap;
}

std::string content_hash(const RepositoryRecord& record, const textprep::Preprocessor& prep) {
    std::string canonical;
    auto append_tokens = [&](std::string_view raw, FieldKind kind) {
        for (const auto& t : prep.preprocess(raw, kind).tokens) {
            canonical += t;
            canonical.push_back(' ');
        }
        canonical.push_back('\x1f');
    };
    append_tokens(record.title, FieldKind::title);
    append_tokens(record.description, FieldKind::description);
    append_tokens(textprep::raw_field_text(record, FieldKind::topics), FieldKind::topics);
    append_tokens(record.readme, FieldKind::readme);
    auto paths = record.file_paths;
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        canonical += p;
        canonical.push_back('\n');
    }
    return hex64(fnv1a64(canonical));
}

std::vector<std::vector<std::string>> find_exact_duplicates(const CorpusSnapshot& snapshot,
                                                            const textprep::Preprocessor& prep) {
    std::map<std::string, std::vector<std::string>> by_hash;
    for (const auto& [name, r] : snapshot.records()) by_hash[content_hash(r, prep)].push_back(name);
    std::vector<std::vector<std::string>> groups;
    for (auto& [_, names] : by_hash) {
        if (names.size() >= 2) groups.push_back(std::move(names));
    }
    std::sort(groups.begin(), groups.end());
    return groups;
}

std::vector<std::string> drop_exact_duplicates(CorpusSnapshot& snapshot, const textprep::Preprocessor& prep) {
    std::vector<std::string> removed;
    for (const auto& group : find_exact_duplicates(snapshot, prep)) {
        for (std::size_t i = 1; i < group.size(); ++i) {
            snapshot.erase(group[i]);
            removed.push_back(group[i]);
        }
    }
    return removed;
}

std::vector<NearDuplicate> find_near_duplicates(const CorpusSnapshot& snapshot, const textprep::Preprocessor& prep,
                                                double threshold) {
    struct Entry {
        const std::string* name;
        std::string hash;
        std::vector<std::string> tokens;  // sorted, unique
    };
    std::vector<Entry> entries;
    for (const auto& [name, r] : snapshot.records()) {
        Entry e{&name, content_hash(r, prep), {}};
        auto toks = prep.preprocess(r);
        for (const auto& f : toks.fields) {
            for (const auto& t : f.tokens) e.tokens.push_back(std::string(to_string(f.kind)) + ":" + t);
        }
        std::sort(e.tokens.begin(), e.tokens.end());
        e.tokens.erase(std::unique(e.tokens.begin(), e.tokens.end()), e.tokens.end());
        entries.push_back(std::move(e));
    }
    std::vector<NearDuplicate> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
            const auto& a = entries[i];
            const auto& b = entries[j];
            if (a.hash == b.hash || a.tokens.empty() || b.tokens.empty()) continue;
            std::vector<std::string> common;
            std::set_intersection(a.tokens.begin(), a.tokens.end(), b.tokens.begin(), b.tokens.end(),
                                  std::back_inserter(common));
            const double uni = static_cast<double>(a.tokens.size() + b.tokens.size() - common.size());
            const double sim = static_cast<double>(common.size()) / uni;
            if (sim >= threshold) out.push_back({*a.name, *b.name, sim});
        }
    }
    return out;
}

StoreLock::StoreLock(const std::filesystem::path& lock_file) {
    fd_ = ::open(lock_file.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw StorageError("cannot open lock file " + lock_file.string() + ": " + std::strerror(errno));
    if (::flock(fd_, LOCK_EX) != 0) {
        ::close(fd_);
        throw StorageError("cannot lock " + lock_file.string() + ": " + std::strerror(errno));
    }
}

StoreLock::~StoreLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

CorpusStore::CorpusStore(std::filesystem::path workspace) : dir_(std::move(workspace)) {}

CorpusSnapshot CorpusStore::load() const {
    auto read_if_exists = [](const std::filesystem::path& p) {
        return std::filesystem::exists(p) ? read_file(p) : std::string{};
    };
    return CorpusSnapshot::parse(read_if_exists(records_path()), read_if_exists(labels_path()));
}

void CorpusStore::save(const CorpusSnapshot& snapshot) const {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw StorageError("cannot create " + dir_.string() + ": " + ec.message());
    StoreLock lock(dir_ / ".malhunt.lock");
    write_file_atomic(records_path(), snapshot.serialize_records());
    write_file_atomic(labels_path(), snapshot.serialize_labels());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw StorageError("error reading " + path.string());
    return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw StorageError("error writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw StorageError("cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace malhunt::corpus
