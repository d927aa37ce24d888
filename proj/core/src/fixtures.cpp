#include "malhunt/fixtures.hpp"

#include "malhunt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace malhunt::fixtures {

namespace {

// Text words.
const std::vector<std::string> kMalwareWords{
    "keylogger", "ransomware", "botnet",   "trojan",    "rootkit",  "backdoor", "spyware",   "worm",
    "virus",     "exploit",    "payload",  "shellcode", "stealer",  "dropper",  "injector",  "persistence",
    "evasion",   "crypter",    "flooder",  "sniffer",   "spoofer",  "spam",     "windows",   "linux",
    "android",   "iot",        "macos",    "router",    "apk",      "winapi",   "stealth",   "victim",
    "infect",    "encrypt",    "hijack",   "zombie",    "undetect", "bypass",   "privilege", "credential"};
const std::vector<std::string> kBenignWords{
    "tutorial", "website", "blog",     "game",     "calculator", "todo",      "portfolio", "recipe",  "weather",
    "chat",     "music",   "player",   "homework", "course",     "framework", "library",   "dashboard", "theme",
    "plugin",   "notes",   "resume",   "landing",  "bootstrap",  "react",     "django",    "flask",   "example",
    "demo",     "beginner", "exercise", "puzzle",  "chess",      "sudoku",    "markdown",  "template", "gallery"};
const std::vector<std::string> kSharedWords{
    "python", "code",   "simple", "project", "script", "tool",    "app",    "client", "server", "data",
    "file",   "network", "config", "utils",  "main",   "test",    "build",  "version", "user",  "command",
    "module", "program", "source", "system", "java",   "web",     "api",    "fast",    "small", "open"};

// File-name stems.
const std::vector<std::string> kMalwareFiles{"keylogger", "payload", "inject", "hook",  "stealer", "encrypt",
                                             "persist",   "shellcode", "loader", "backdoor", "spread", "bot"};
const std::vector<std::string> kBenignFiles{"index", "app",    "style",     "game",   "todo",   "render",
                                            "view",  "model",  "page",      "component", "helper", "routes"};
const std::vector<std::string> kSharedFiles{"main", "utils", "config", "test", "setup", "build", "common", "core"};

const std::vector<std::string> kSourceExt{"c", "cpp", "h", "py", "go", "js", "cs", "java", "sh", "ps1", "asm"};
const std::vector<std::string> kDocExt{"md", "txt", "png", "jpg", "json", "html", "css", "yml"};

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }
std::size_t between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) { return lo + pick(rng, hi - lo + 1); }

WordDistribution mixture(const std::vector<std::string>& own, const std::vector<std::string>& other,
                         const std::vector<std::string>& shared) {
    WordDistribution d;
    auto add = [&d](const std::vector<std::string>& words, double w) {
        for (const auto& s : words) {
            d.words.push_back(s);
            d.weights.push_back(w);
        }
    };
    add(own, 3.0);
    add(other, 1.0);
    add(shared, 2.0);
    double total = 0.0;
    for (double w : d.weights) total += w;
    for (double& w : d.weights) w /= total;
    return d;
}

std::string draw(const WordDistribution& d, std::mt19937_64& rng) {
    double u = unit(rng);
    for (std::size_t i = 0; i < d.words.size(); ++i) {
        u -= d.weights[i];
        if (u < 0.0) return d.words[i];
    }
    return d.words.back();
}

std::vector<std::string> draw_n(const WordDistribution& d, std::mt19937_64& rng, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw(d, rng));
    return out;
}

std::string join(const std::vector<std::string>& words, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += sep;
        out += words[i];
    }
    return out;
}

Date add_days(Date d, int days) { return Date{std::chrono::sys_days{d} + std::chrono::days{days}}; }

}  // namespace

double WordDistribution::probability(const std::string& word) const {
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (words[i] == word) return weights[i];
    }
    return 0.0;
}

std::vector<RepositoryRecord> LabeledCorpus::records() const {
    std::vector<RepositoryRecord> out;
    for (const auto& r : repositories) out.push_back(r.record);
    return out;
}

std::vector<corpus::LabeledExample> LabeledCorpus::labels() const {
    const auto ts = std::chrono::sys_days{Date{std::chrono::year{2020}, std::chrono::month{2}, std::chrono::day{1}}};
    std::vector<corpus::LabeledExample> out;
    for (const auto& r : repositories) {
        corpus::LabeledExample ex{r.record.full_name, r.label, {}};
        const auto vote = r.label == ClassLabel::malware ? corpus::BallotLabel::malware : corpus::BallotLabel::benign;
        for (const char* judge : {"judge-a", "judge-b", "judge-c"}) {
            ex.ballots.push_back({r.record.full_name, judge, vote, Timestamp{ts}});
        }
        out.push_back(std::move(ex));
    }
    return out;
}

corpus::CorpusSnapshot LabeledCorpus::snapshot() const {
    corpus::CorpusSnapshot snap;
    for (const auto& r : repositories) snap.upsert(r.record);
    for (const auto& ex : labels()) snap.set_label(ex);
    return snap;
}

LabeledCorpus make_labeled_corpus(std::size_t per_class, std::uint64_t seed) {
    if (per_class == 0) throw ValidationError("fixture needs at least one repository per class");
    LabeledCorpus corpus;
    auto& model = corpus.model;
    const auto mal = index_of(ClassLabel::malware);
    const auto ben = index_of(ClassLabel::benign);
    for (auto kind : kAllFields) {
        const auto f = static_cast<std::size_t>(kind);
        if (kind == FieldKind::file_names) {
            model.fields[mal][f] = mixture(kMalwareFiles, kBenignFiles, kSharedFiles);
            model.fields[ben][f] = mixture(kBenignFiles, kMalwareFiles, kSharedFiles);
        } else {
            model.fields[mal][f] = mixture(kMalwareWords, kBenignWords, kSharedWords);
            model.fields[ben][f] = mixture(kBenignWords, kMalwareWords, kSharedWords);
        }
    }

    std::mt19937_64 rng(seed);
    constexpr std::size_t kOwners = 25;
    std::vector<std::uint64_t> followers(kOwners), following(kOwners);
    for (std::size_t i = 0; i < kOwners; ++i) {
        followers[i] = static_cast<std::uint64_t>(std::floor(std::exp(unit(rng) * 7.0))) - 1;
        following[i] = pick(rng, 60);
    }
    const Timestamp fetched{std::chrono::sys_days{Date{std::chrono::year{2020}, std::chrono::month{1}, std::chrono::day{15}}}};

    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        GeneratedRepository g;
        // Interleave classes so that prefixes stay balanced.
        g.label = i % 2 == 0 ? ClassLabel::malware : ClassLabel::benign;
        const auto& dist = model.fields[index_of(g.label)];
        auto field = [&](FieldKind k) -> const WordDistribution& { return dist[static_cast<std::size_t>(k)]; };
        auto& drawn = g.drawn;

        drawn[static_cast<std::size_t>(FieldKind::title)] = draw_n(field(FieldKind::title), rng, between(rng, 2, 3));
        auto topics = draw_n(field(FieldKind::topics), rng, between(rng, 0, 4));
        std::sort(topics.begin(), topics.end());
        topics.erase(std::unique(topics.begin(), topics.end()), topics.end());
        drawn[static_cast<std::size_t>(FieldKind::topics)] = topics;
        drawn[static_cast<std::size_t>(FieldKind::description)] =
            draw_n(field(FieldKind::description), rng, between(rng, 10, 24));
        const bool has_readme = unit(rng) >= 0.3;
        if (has_readme) {
            drawn[static_cast<std::size_t>(FieldKind::readme)] = draw_n(field(FieldKind::readme), rng, between(rng, 5, 20));
        }

        g.source_heavy = g.label == ClassLabel::malware ? unit(rng) < 0.8 : unit(rng) < 0.5;
        const std::size_t nfiles = between(rng, 5, 10);
        const std::size_t ndocs = g.source_heavy ? pick(rng, 2) : nfiles - nfiles / 3;
        auto stems = draw_n(field(FieldKind::file_names), rng, nfiles);
        drawn[static_cast<std::size_t>(FieldKind::file_names)] = stems;
        std::set<std::string> paths;
        for (std::size_t k = 0; k < nfiles; ++k) {
            const bool doc = k < ndocs;
            const auto& ext = doc ? kDocExt[pick(rng, kDocExt.size())] : kSourceExt[pick(rng, kSourceExt.size())];
            std::string dir = doc ? "docs/" : (k % 2 ? "src/" : "");
            auto path = dir + stems[k] + "." + ext;
            // Repeated stems get a suffix so that every path is distinct.
            for (int n = 2; paths.contains(path); ++n) path = dir + stems[k] + "_" + std::to_string(n) + "." + ext;
            paths.insert(path);
        }

        auto& r = g.record;
        const auto owner = static_cast<std::size_t>(std::floor(static_cast<double>(kOwners) * unit(rng) * unit(rng)));
        const auto& title_words = drawn[static_cast<std::size_t>(FieldKind::title)];
        r.title = join(title_words, "-") + "-" + std::to_string(i);
        r.full_name = "author" + std::to_string(owner) + "/" + r.title;
        auto desc = join(drawn[static_cast<std::size_t>(FieldKind::description)], " ");
        desc[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(desc[0])));
        r.description = desc + ".";
        r.topics = topics;
        if (has_readme) r.readme = "# Overview\n\n" + join(drawn[static_cast<std::size_t>(FieldKind::readme)], " ") + "\n";
        r.file_paths.assign(paths.begin(), paths.end());

        const double yr = g.label == ClassLabel::malware ? std::sqrt(unit(rng)) : unit(rng);
        const int year = 2008 + static_cast<int>(std::floor(12.0 * yr));
        r.created_at = add_days(Date{std::chrono::year{year}, std::chrono::month{1}, std::chrono::day{1}},
                                static_cast<int>(pick(rng, 365)));
        r.modified_at = add_days(r.created_at, static_cast<int>(pick(rng, 900)));
        r.star_count = static_cast<std::uint64_t>(std::floor(std::exp(unit(rng) * 6.0))) - 1;
        r.fork_count = r.star_count / 3 + pick(rng, 3);
        r.watcher_count = r.star_count / 10 + 1;
        r.author_followers = followers[owner];
        r.author_following = following[owner];
        r.fetched_at = fetched;
        r.query_tier = kAllTiers[i % 3];
        validate(r);
        corpus.repositories.push_back(std::move(g));
    }
    return corpus;
}

ClassLabel bayes_classify(const GenerativeModel& model, const GeneratedRepository& repo) {
    std::array<double, kNumClasses> score{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        score[c] = std::log(model.prior[c]);
        for (auto kind : kAllFields) {
            const auto f = static_cast<std::size_t>(kind);
            for (const auto& w : repo.drawn[f]) score[c] += std::log(model.fields[c][f].probability(w));
        }
    }
    return score[index_of(ClassLabel::malware)] > score[index_of(ClassLabel::benign)] ? ClassLabel::malware
                                                                                        : ClassLabel::benign;
}

void populate_mock_archive(harvest::MockArchive& archive, const harvest::KeywordTiers& tiers, std::size_t count,
                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    // Keywords introduced by each tier.
    std::array<std::vector<std::string>, 3> fresh;
    for (std::size_t t = 0; t < 3; ++t) {
        for (const auto& kw : tiers.keywords(kAllTiers[t])) {
            if (tiers.smallest_tier(kw) == kAllTiers[t]) fresh[t].push_back(kw);
        }
        // A tier that adds nothing reuses its whole list.
        if (fresh[t].empty()) fresh[t] = tiers.keywords(kAllTiers[t]);
    }
    auto background = [&](std::size_t n) {
        std::vector<std::string> words;
        for (std::size_t i = 0; i < n; ++i) {
            words.push_back(unit(rng) < 0.5 ? kBenignWords[pick(rng, kBenignWords.size())]
                                             : kSharedWords[pick(rng, kSharedWords.size())]);
        }
        return words;
    };
    const Date base{std::chrono::year{2009}, std::chrono::month{1}, std::chrono::day{1}};

    for (std::size_t i = 0; i < count; ++i) {
        const auto& pool = fresh[i % 3];
        const auto& kw = pool[pick(rng, pool.size())];
        harvest::MockRepository repo;
        auto& m = repo.meta;
        m.owner = "owner" + std::to_string(pick(rng, 12));
        m.name = "repo-" + std::to_string(i);
        m.full_name = m.owner + "/" + m.name;
        auto words = background(between(rng, 3, 8));
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pick(rng, words.size() + 1)), kw);
        m.description = join(words, " ");
        if (unit(rng) < 0.5) m.topics = {kBenignWords[pick(rng, kBenignWords.size())]};
        m.created_at = add_days(base, static_cast<int>(pick(rng, 3650)));
        m.modified_at = add_days(m.created_at, static_cast<int>(pick(rng, 500)));
        m.stars = pick(rng, 500);
        m.forks = pick(rng, 100);
        m.watchers = pick(rng, 40);
        m.default_branch = i % 4 == 0 ? "master" : "main";
        if (i % 5 != 0) repo.readme = "# " + m.name + "\n\n" + join(background(6), " ") + "\n";
        const std::size_t nfiles = between(rng, 1, 6);
        for (std::size_t k = 0; k < nfiles; ++k) {
            repo.files.push_back((k % 2 ? "src/" : "") + kSharedFiles[k % kSharedFiles.size()] + "." +
                                 kSourceExt[pick(rng, kSourceExt.size())]);
        }
        std::sort(repo.files.begin(), repo.files.end());
        repo.files.erase(std::unique(repo.files.begin(), repo.files.end()), repo.files.end());
        archive.add(std::move(repo));
    }
    for (std::size_t o = 0; o < 12; ++o) {
        archive.set_user("owner" + std::to_string(o), {pick(rng, 1000), pick(rng, 50)});
    }

    // Deleted between search and fetch.
    harvest::MockRepository gone;
    gone.meta.full_name = "ghost/deleted-malware";
    gone.meta.description = "malware sample collection";
    gone.meta.created_at = gone.meta.modified_at = base;
    gone.files = {"sample.c"};
    archive.add(gone);
    archive.mark_deleted(gone.meta.full_name);

    // No content at all: dropped by the pathological filter.
    harvest::MockRepository empty;
    empty.meta.full_name = "ghost/malware";
    empty.meta.created_at = empty.meta.modified_at = base;
    archive.add(empty);
    archive.set_user("ghost", {0, 0});
}

}  // namespace malhunt::fixtures
