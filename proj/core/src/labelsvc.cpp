#include "malhunt/labelsvc.hpp"

#include "malhunt/errors.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace malhunt::labelsvc {

using Json = nlohmann::ordered_json;
using corpus::Ballot;
using corpus::BallotLabel;

std::string_view to_string(ConsensusStatus status) {
    switch (status) {
        case ConsensusStatus::pending: return "pending";
        case ConsensusStatus::kept_malware: return "kept_malware";
        case ConsensusStatus::kept_benign: return "kept_benign";
        case ConsensusStatus::excluded: return "excluded";
    }
    return "unknown";
}

ConsensusStatus consensus_of(std::span<const BallotLabel> labels, std::size_t quorum) {
    if (labels.size() < quorum || labels.empty()) return ConsensusStatus::pending;
    const auto first = labels.front();
    const bool unanimous = std::all_of(labels.begin(), labels.end(), [first](BallotLabel l) { return l == first; });
    if (!unanimous || first == BallotLabel::uncertain) return ConsensusStatus::excluded;
    return first == BallotLabel::malware ? ConsensusStatus::kept_malware : ConsensusStatus::kept_benign;
}

std::string ballot_to_json_line(const Ballot& b) {
    Json j{{"repo", b.repo},
           {"judge", b.judge},
           {"label", std::string(corpus::to_string(b.label))},
           {"timestamp", format_timestamp(b.timestamp)}};
    return j.dump();
}

Ballot ballot_from_json_line(std::string_view line) {
    try {
        auto j = Json::parse(line);
        Ballot b;
        b.repo = j.at("repo").get<std::string>();
        b.judge = j.at("judge").get<std::string>();
        auto label = corpus::parse_ballot_label(j.at("label").get<std::string>());
        if (!label) throw ValidationError("invalid ballot label '" + j.at("label").get<std::string>() + "'");
        b.label = *label;
        auto ts = parse_timestamp(j.at("timestamp").get<std::string>());
        if (!ts) throw ValidationError("invalid ballot timestamp");
        b.timestamp = *ts;
        return b;
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed ballot: ") + e.what());
    }
}

void ServiceConfig::validate() const {
    if (judges.empty()) throw ValidationError("label service needs at least one judge");
    if (quorum == 0) throw ValidationError("quorum must be > 0");
    std::set<std::string> seen;
    for (const auto& j : judges) {
        if (j.empty()) throw ValidationError("judge id must be non-empty");
        if (!seen.insert(j).second) throw ValidationError("duplicate judge id '" + j + "'");
    }
}

LabelService::LabelService(std::vector<RepositoryRecord> candidates, ServiceConfig config) : config_(std::move(config)) {
    config_.validate();
    std::vector<std::string> names;
    for (auto& r : candidates) {
        names.push_back(r.full_name);
        auto key = r.full_name;
        candidates_.emplace(std::move(key), std::move(r));
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    for (const auto& judge : config_.judges) {
        auto order = names;
        std::mt19937_64 rng(fnv1a64(judge, fnv1a64(std::to_string(config_.session_seed))));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        queues_.emplace(judge, std::move(order));
    }

    if (!config_.ballots_path.empty() && std::filesystem::exists(config_.ballots_path)) {
        std::ifstream in(config_.ballots_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            Ballot b;
            try {
                b = ballot_from_json_line(line);
            } catch (const ValidationError& e) {
                throw ValidationError(config_.ballots_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (!candidates_.contains(b.repo)) throw UnknownRepo(b.repo);
            check_judge(b.judge);
            apply(b);
        }
    }
}

void LabelService::check_judge(std::string_view judge) const {
    if (!queues_.contains(judge)) throw UnknownJudge(std::string(judge));
}

// Caller holds the write lock. Later timestamps win; equal timestamps fall
// back to the label order so that the result does not depend on arrival order.
void LabelService::apply(const Ballot& b) {
    ++ballot_count_;
    auto& per_judge = ballots_[b.repo];
    auto it = per_judge.find(b.judge);
    if (it == per_judge.end()) {
        per_judge.emplace(b.judge, b);
        return;
    }
    auto& cur = it->second;
    if (std::tie(b.timestamp, b.label) >= std::tie(cur.timestamp, cur.label)) {
        if (b.label != cur.label) {
            spdlog::info("judge {} revised {} from {} to {}", b.judge, b.repo, corpus::to_string(cur.label),
                         corpus::to_string(b.label));
        }
        cur = b;
    }
}

std::optional<RepositoryRecord> LabelService::next_unlabeled(std::string_view judge) const {
    std::shared_lock lock(mutex_);
    check_judge(judge);
    for (const auto& name : queues_.find(judge)->second) {
        auto it = ballots_.find(name);
        if (it == ballots_.end() || !it->second.contains(std::string(judge))) return candidates_.find(name)->second;
    }
    return std::nullopt;
}

std::size_t LabelService::remaining(std::string_view judge) const {
    std::shared_lock lock(mutex_);
    check_judge(judge);
    std::size_t n = 0;
    for (const auto& name : queues_.find(judge)->second) {
        auto it = ballots_.find(name);
        if (it == ballots_.end() || !it->second.contains(std::string(judge))) ++n;
    }
    return n;
}

ConsensusStatus LabelService::submit(const Ballot& ballot) {
    std::unique_lock lock(mutex_);
    if (!candidates_.contains(ballot.repo)) throw UnknownRepo(ballot.repo);
    check_judge(ballot.judge);
    if (!config_.ballots_path.empty()) {
        std::ofstream out(config_.ballots_path, std::ios::app);
        out << ballot_to_json_line(ballot) << '\n';
        out.flush();
        if (!out) throw StorageError("cannot append to " + config_.ballots_path.string());
    }
    apply(ballot);
    return consensus_locked(ballot.repo);
}

ConsensusStatus LabelService::consensus_locked(std::string_view repo) const {
    auto it = ballots_.find(repo);
    if (it == ballots_.end()) return ConsensusStatus::pending;
    std::vector<BallotLabel> labels;
    for (const auto& [_, b] : it->second) labels.push_back(b.label);
    return consensus_of(labels, config_.quorum);
}

ConsensusStatus LabelService::consensus(std::string_view repo) const {
    std::shared_lock lock(mutex_);
    if (!candidates_.contains(repo)) throw UnknownRepo(std::string(repo));
    return consensus_locked(repo);
}

Progress LabelService::progress() const {
    std::shared_lock lock(mutex_);
    Progress p;
    p.total = candidates_.size();
    p.ballots = ballot_count_;
    for (const auto& [name, _] : candidates_) {
        switch (consensus_locked(name)) {
            case ConsensusStatus::pending: ++p.pending; break;
            case ConsensusStatus::kept_malware: ++p.kept_malware; break;
            case ConsensusStatus::kept_benign: ++p.kept_benign; break;
            case ConsensusStatus::excluded: ++p.excluded; break;
        }
    }
    for (const auto& [judge, queue] : queues_) {
        std::size_t n = 0;
        for (const auto& name : queue) {
            auto it = ballots_.find(name);
            if (it == ballots_.end() || !it->second.contains(judge)) ++n;
        }
        p.remaining[judge] = n;
    }
    return p;
}

std::vector<corpus::LabeledExample> LabelService::kept_locked() const {
    std::vector<corpus::LabeledExample> out;
    for (const auto& [name, per_judge] : ballots_) {
        auto status = consensus_locked(name);
        if (status != ConsensusStatus::kept_malware && status != ConsensusStatus::kept_benign) continue;
        corpus::LabeledExample ex;
        ex.repo = name;
        ex.label = status == ConsensusStatus::kept_malware ? ClassLabel::malware : ClassLabel::benign;
        for (const auto& [_, b] : per_judge) ex.ballots.push_back(b);
        out.push_back(std::move(ex));
    }
    return out;
}

std::string LabelService::export_jsonl() const {
    std::shared_lock lock(mutex_);
    std::string text;
    for (const auto& ex : kept_locked()) text += corpus::labeled_to_json_line(ex) + "\n";
    return text;
}

std::vector<corpus::LabeledExample> LabelService::export_groundtruth() const {
    std::shared_lock lock(mutex_);
    auto kept = kept_locked();
    if (!config_.labels_path.empty()) {
        std::string text;
        for (const auto& ex : kept) text += corpus::labeled_to_json_line(ex) + "\n";
        corpus::write_file_atomic(config_.labels_path, text);
    }
    return kept;
}

const RepositoryRecord* LabelService::find(std::string_view repo) const {
    auto it = candidates_.find(repo);
    return it == candidates_.end() ? nullptr : &it->second;
}

void LabelService::set_near_duplicates(std::map<std::string, std::vector<std::string>, std::less<>> near) {
    std::unique_lock lock(mutex_);
    near_ = std::move(near);
}

std::vector<std::string> LabelService::near_duplicates_of(std::string_view repo) const {
    std::shared_lock lock(mutex_);
    auto it = near_.find(repo);
    return it == near_.end() ? std::vector<std::string>{} : it->second;
}

// ---------------------------------------------------------------------------

namespace {

Json summary_json(const RepositoryRecord& r, const std::vector<std::string>& near) {
    auto j = Json::parse(corpus::record_to_json_line(r));
    j.erase("fetched_at");
    j.erase("query_tier");
    j["near_duplicates"] = near;
    return j;
}

void send_json(httplib::Response& res, const Json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

struct LabelServer::Impl {
    LabelService& service;
    Options options;
    httplib::Server server;
    std::thread thread;

    Impl(LabelService& s, Options o) : service(s), options(std::move(o)) {}

    template <typename Fn>
    void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const UnknownRepo& e) {
            send_json(res, {{"error", e.what()}}, 404);
        } catch (const UnknownJudge& e) {
            send_json(res, {{"error", e.what()}}, 404);
        } catch (const ValidationError& e) {
            send_json(res, {{"error", e.what()}}, 400);
        } catch (const Json::exception& e) {
            send_json(res, {{"error", std::string("malformed request: ") + e.what()}}, 400);
        } catch (const std::exception& e) {
            send_json(res, {{"error", e.what()}}, 500);
        }
    }

    void routes() {
        server.Get(R"(/api/queue/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto judge = req.matches[1].str();
                auto next = service.next_unlabeled(judge);
                Json body{{"judge", judge}, {"remaining", service.remaining(judge)}};
                body["next"] = next ? summary_json(*next, service.near_duplicates_of(next->full_name)) : Json(nullptr);
                send_json(res, body);
            });
        });

        server.Get(R"(/api/repo/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto name = req.matches[1].str();
                const auto* r = service.find(name);
                if (!r) throw UnknownRepo(name);
                send_json(res, summary_json(*r, service.near_duplicates_of(name)));
            });
        });

        server.Post("/api/ballot", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto j = Json::parse(req.body);
                Ballot b;
                b.repo = j.at("repo").get<std::string>();
                b.judge = j.at("judge").get<std::string>();
                auto label = corpus::parse_ballot_label(j.at("label").get<std::string>());
                if (!label) throw ValidationError("label must be malware, benign or uncertain");
                b.label = *label;
                if (j.contains("timestamp") && !j["timestamp"].is_null()) {
                    auto ts = parse_timestamp(j["timestamp"].get<std::string>());
                    if (!ts) throw ValidationError("invalid timestamp");
                    b.timestamp = *ts;
                } else {
                    b.timestamp = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
                }
                auto status = service.submit(b);
                send_json(res, {{"repo", b.repo}, {"judge", b.judge}, {"status", std::string(to_string(status))}});
            });
        });

        server.Get("/api/consensus", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                auto p = service.progress();
                const auto decided = p.kept_malware + p.kept_benign + p.excluded;
                const double agreement =
                    decided == 0 ? 0.0 : static_cast<double>(p.kept_malware + p.kept_benign) / static_cast<double>(decided);
                send_json(res, {{"pending", p.pending},
                                {"kept_malware", p.kept_malware},
                                {"kept_benign", p.kept_benign},
                                {"excluded", p.excluded},
                                {"agreement_rate", agreement}});
            });
        });

        server.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                service.export_groundtruth();
                res.set_content(service.export_jsonl(), "application/x-ndjson");
            });
        });

        server.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                auto p = service.progress();
                Json remaining = Json::object();
                for (const auto& [judge, n] : p.remaining) remaining[judge] = n;
                send_json(res, {{"total", p.total},
                                {"ballots", p.ballots},
                                {"pending", p.pending},
                                {"kept_malware", p.kept_malware},
                                {"kept_benign", p.kept_benign},
                                {"excluded", p.excluded},
                                {"remaining", remaining}});
            });
        });

        if (!options.ui_dir.empty()) {
            if (!server.set_mount_point("/", options.ui_dir.string())) {
                throw ValidationError("label-serve: ui directory not found: " + options.ui_dir.string());
            }
        }
    }
};

LabelServer::LabelServer(LabelService& service, Options options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
    impl_->routes();
    const auto& o = impl_->options;
    port_ = o.port == 0 ? impl_->server.bind_to_any_port(o.host) : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
    if (port_ <= 0) throw StorageError("label-serve: cannot bind " + o.host + ":" + std::to_string(o.port));
}

LabelServer::~LabelServer() { stop(); }

std::string LabelServer::base_url() const { return "http://" + impl_->options.host + ":" + std::to_string(port_); }

void LabelServer::start() {
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void LabelServer::run() { impl_->server.listen_after_bind(); }

void LabelServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace malhunt::labelsvc
