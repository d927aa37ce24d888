#include "malhunt/analytics.hpp"

#include "malhunt/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace malhunt::analytics {

using Json = nlohmann::ordered_json;

CcdfSeries ccdf(std::span<const std::uint64_t> values) {
    if (values.empty()) throw EmptyInput("ccdf of an empty sample");
    std::vector<std::uint64_t> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    CcdfSeries out;
    for (std::size_t i = 0; i < sorted.size();) {
        // sorted.size() - i observations are >= sorted[i]
        out.push_back({sorted[i], static_cast<double>(sorted.size() - i) / n});
        const auto v = sorted[i];
        while (i < sorted.size() && sorted[i] == v) ++i;
    }
    return out;
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DegenerateInput("pearson: sequences differ in length");
    if (x.size() < 2) throw DegenerateInput("pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pearson: constant sequence");
    double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
    return {std::clamp(r, -1.0, 1.0), x.size()};
}

namespace {

int year_of(const RepositoryRecord& r) { return static_cast<int>(r.created_at.year()); }

TrendSeries empty_span(int lo, int hi) {
    TrendSeries s;
    for (int y = lo; y <= hi; ++y) s[y] = 0;
    return s;
}

}  // namespace

TrendSeries yearly_trend(std::span<const RepositoryRecord> records) {
    if (records.empty()) return {};
    int lo = year_of(records.front()), hi = lo;
    for (const auto& r : records) {
        lo = std::min(lo, year_of(r));
        hi = std::max(hi, year_of(r));
    }
    auto series = empty_span(lo, hi);
    for (const auto& r : records) ++series[year_of(r)];
    return series;
}

std::map<std::string, TrendSeries> yearly_trend_by(std::span<const RepositoryRecord> records,
                                                   std::span<const taxonomy::TagAssignment> tags,
                                                   const taxonomy::TagLexicon& lexicon, TrendGroup group) {
    const auto& names = group == TrendGroup::type ? lexicon.types() : lexicon.platforms();
    std::map<std::string, TrendSeries> out;
    auto overall = yearly_trend(records);
    for (const auto& name : names) {
        out[name] = overall.empty() ? TrendSeries{} : empty_span(overall.begin()->first, overall.rbegin()->first);
    }
    std::map<std::string_view, const taxonomy::TagAssignment*> by_name;
    for (const auto& t : tags) by_name[t.repo_name] = &t;
    for (const auto& r : records) {
        auto it = by_name.find(r.full_name);
        if (it == by_name.end()) continue;
        const auto& ids = group == TrendGroup::type ? it->second->types : it->second->platforms;
        for (auto id : ids) ++out[names.at(id)][year_of(r)];
    }
    return out;
}

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::repo_count: return "repo_count";
        case Metric::followers: return "followers";
        case Metric::stars: return "stars";
        case Metric::forks: return "forks";
        case Metric::watchers: return "watchers";
    }
    return "unknown";
}

std::optional<Metric> parse_metric(std::string_view text) {
    for (auto m : {Metric::repo_count, Metric::followers, Metric::stars, Metric::forks, Metric::watchers}) {
        if (to_string(m) == text) return m;
    }
    return std::nullopt;
}

namespace {

std::vector<RankedEntry> rank(std::vector<RankedEntry> entries, std::size_t k) {
    if (k == 0) throw ValidationError("top_k: k must be >= 1");
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.name < b.name;
    });
    if (entries.size() > k) entries.resize(k);
    return entries;
}

}  // namespace

std::vector<RankedEntry> top_authors(std::span<const RepositoryRecord> records, Metric metric, std::size_t k) {
    if (metric != Metric::repo_count && metric != Metric::followers) {
        throw ValidationError("authors can be ranked by repo_count or followers only");
    }
    std::map<std::string, std::uint64_t> value;
    for (const auto& r : records) {
        auto& v = value[r.owner()];
        if (metric == Metric::repo_count) {
            ++v;
        } else {
            v = std::max(v, r.author_followers);
        }
    }
    std::vector<RankedEntry> entries;
    for (auto& [name, v] : value) entries.push_back({name, v});
    return rank(std::move(entries), k);
}

std::vector<RankedEntry> top_repositories(std::span<const RepositoryRecord> records, Metric metric, std::size_t k) {
    std::vector<RankedEntry> entries;
    for (const auto& r : records) {
        std::uint64_t v = 0;
        switch (metric) {
            case Metric::stars: v = r.star_count; break;
            case Metric::forks: v = r.fork_count; break;
            case Metric::watchers: v = r.watcher_count; break;
            default: throw ValidationError("repositories can be ranked by stars, forks or watchers only");
        }
        entries.push_back({r.full_name, v});
    }
    return rank(std::move(entries), k);
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Json ccdf_json(const CcdfSeries& s) {
    Json arr = Json::array();
    for (const auto& p : s) arr.push_back(Json::array({p.value, p.fraction}));
    return arr;
}

std::string ccdf_csv(const CcdfSeries& s) {
    std::string out = "value,ccdf\n";
    for (const auto& p : s) out += std::to_string(p.value) + "," + fmt_double(p.fraction) + "\n";
    return out;
}

Json trend_json(const TrendSeries& s) {
    Json j = Json::object();
    for (const auto& [year, count] : s) j[std::to_string(year)] = count;
    return j;
}

std::string grouped_trend_csv(const std::map<std::string, TrendSeries>& groups, const std::vector<std::string>& order) {
    std::string out = "year";
    for (const auto& name : order) out += "," + name;
    out += "\n";
    std::set<int> years;
    for (const auto& [_, s] : groups) {
        for (const auto& [y, _c] : s) years.insert(y);
    }
    for (int y : years) {
        out += std::to_string(y);
        for (const auto& name : order) {
            const auto& s = groups.at(name);
            auto it = s.find(y);
            out += "," + std::to_string(it == s.end() ? 0 : it->second);
        }
        out += "\n";
    }
    return out;
}

Json ranking_json(const std::vector<RankedEntry>& entries) {
    Json arr = Json::array();
    for (const auto& e : entries) arr.push_back(Json{{"name", e.name}, {"value", e.value}});
    return arr;
}

Json correlation_json(std::span<const double> x, std::span<const double> y) {
    try {
        auto c = pearson(x, y);
        return Json{{"r", c.r}, {"n", c.n}};
    } catch (const DegenerateInput& e) {
        return Json{{"r", nullptr}, {"n", x.size()}, {"reason", e.what()}};
    }
}

}  // namespace

Report build_report(std::span<const RepositoryRecord> records, std::span<const taxonomy::TagAssignment> tags,
                    const taxonomy::TagLexicon& lexicon, const ReportOptions& options) {
    Report report;
    Json doc;
    doc["config_hash"] = options.config_hash;
    doc["repositories"] = records.size();

    std::vector<std::uint64_t> forks, stars, watchers;
    std::vector<double> forks_d, stars_d, watchers_d;
    for (const auto& r : records) {
        forks.push_back(r.fork_count);
        stars.push_back(r.star_count);
        watchers.push_back(r.watcher_count);
        forks_d.push_back(static_cast<double>(r.fork_count));
        stars_d.push_back(static_cast<double>(r.star_count));
        watchers_d.push_back(static_cast<double>(r.watcher_count));
    }

    Json popularity = Json::object();
    if (!records.empty()) {
        auto cf = ccdf(forks), cs = ccdf(stars), cw = ccdf(watchers);
        popularity["forks"] = ccdf_json(cf);
        popularity["stars"] = ccdf_json(cs);
        popularity["watchers"] = ccdf_json(cw);
        report.figure_csv["ccdf_forks.csv"] = ccdf_csv(cf);
        report.figure_csv["ccdf_stars.csv"] = ccdf_csv(cs);
        report.figure_csv["ccdf_watchers.csv"] = ccdf_csv(cw);
    }
    doc["ccdf"] = std::move(popularity);

    doc["correlations"] = Json{{"stars_vs_forks", correlation_json(stars_d, forks_d)},
                               {"forks_vs_watchers", correlation_json(forks_d, watchers_d)},
                               {"watchers_vs_stars", correlation_json(watchers_d, stars_d)},
                               {"note", "r and n only; significance is not computed"}};

    auto matrix = taxonomy::build_matrix(tags, lexicon);
    Json cells = Json::object();
    std::string matrix_csv = "type";
    for (const auto& p : matrix.platforms) matrix_csv += "," + p;
    matrix_csv += ",total\n";
    for (std::size_t t = 0; t < matrix.types.size(); ++t) {
        Json row = Json::object();
        matrix_csv += matrix.types[t];
        for (std::size_t p = 0; p < matrix.platforms.size(); ++p) {
            row[matrix.platforms[p]] = matrix.cells[t][p];
            matrix_csv += "," + std::to_string(matrix.cells[t][p]);
        }
        row["total"] = matrix.type_totals[t];
        matrix_csv += "," + std::to_string(matrix.type_totals[t]) + "\n";
        cells[matrix.types[t]] = std::move(row);
    }
    Json platform_totals = Json::object();
    matrix_csv += "total";
    for (std::size_t p = 0; p < matrix.platforms.size(); ++p) {
        platform_totals[matrix.platforms[p]] = matrix.platform_totals[p];
        matrix_csv += "," + std::to_string(matrix.platform_totals[p]);
    }
    matrix_csv += "," + std::to_string(matrix.repositories) + "\n";
    report.figure_csv["type_platform_matrix.csv"] = matrix_csv;
    doc["type_platform"] = Json{{"repositories", matrix.repositories},
                                {"cells", std::move(cells)},
                                {"platform_totals", std::move(platform_totals)},
                                {"with_any_type", matrix.with_any_type},
                                {"with_any_platform", matrix.with_any_platform},
                                {"multi_type", matrix.multi_type},
                                {"multi_platform", matrix.multi_platform},
                                {"multi_type_rate", matrix.multi_type_rate()},
                                {"multi_platform_rate", matrix.multi_platform_rate()}};

    auto overall = yearly_trend(records);
    auto by_type = yearly_trend_by(records, tags, lexicon, TrendGroup::type);
    auto by_platform = yearly_trend_by(records, tags, lexicon, TrendGroup::platform);
    Json by_type_json = Json::object(), by_platform_json = Json::object();
    for (const auto& name : lexicon.types()) by_type_json[name] = trend_json(by_type.at(name));
    for (const auto& name : lexicon.platforms()) by_platform_json[name] = trend_json(by_platform.at(name));
    doc["yearly"] = Json{{"overall", trend_json(overall)}, {"by_type", by_type_json}, {"by_platform", by_platform_json}};
    {
        std::string csv = "year,count\n";
        for (const auto& [y, c] : overall) csv += std::to_string(y) + "," + std::to_string(c) + "\n";
        report.figure_csv["trend_overall.csv"] = csv;
        report.figure_csv["trend_by_type.csv"] = grouped_trend_csv(by_type, lexicon.types());
        report.figure_csv["trend_by_platform.csv"] = grouped_trend_csv(by_platform, lexicon.platforms());
    }

    Json authors = Json::object();
    if (!records.empty()) {
        const auto all = records.size();
        auto per_author = top_authors(records, Metric::repo_count, all);
        auto followers = top_authors(records, Metric::followers, all);
        std::vector<std::uint64_t> repo_counts, follower_counts;
        for (const auto& e : per_author) repo_counts.push_back(e.value);
        for (const auto& e : followers) follower_counts.push_back(e.value);
        auto repos_ccdf = ccdf(repo_counts);
        auto followers_ccdf = ccdf(follower_counts);
        authors["count"] = per_author.size();
        authors["repos_per_author_ccdf"] = ccdf_json(repos_ccdf);
        authors["followers_ccdf"] = ccdf_json(followers_ccdf);
        authors["top_by_repo_count"] = ranking_json(top_authors(records, Metric::repo_count, options.top_k));
        authors["top_by_followers"] = ranking_json(top_authors(records, Metric::followers, options.top_k));
        report.figure_csv["ccdf_repos_per_author.csv"] = ccdf_csv(repos_ccdf);
        report.figure_csv["ccdf_author_followers.csv"] = ccdf_csv(followers_ccdf);
    }
    doc["authors"] = std::move(authors);

    Json top = Json::object();
    if (!records.empty()) {
        for (auto m : {Metric::stars, Metric::forks, Metric::watchers}) {
            top[std::string(to_string(m))] = ranking_json(top_repositories(records, m, options.top_k));
        }
    }
    doc["top_repositories"] = std::move(top);

    report.json_text = doc.dump(2) + "\n";
    return report;
}

}  // namespace malhunt::analytics
