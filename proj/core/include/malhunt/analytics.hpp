#pragma once

#include "malhunt/taxonomy.hpp"
#include "malhunt/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt::analytics {

struct CcdfPoint {
    std::uint64_t value = 0;
    double fraction = 0.0;  // P[X >= value]

    bool operator==(const CcdfPoint&) const = default;
};

using CcdfSeries = std::vector<CcdfPoint>;

/// Empirical P[X >= x] at each distinct observed x. Throws EmptyInput.
CcdfSeries ccdf(std::span<const std::uint64_t> values);

struct CorrelationResult {
    double r = 0.0;
    std::size_t n = 0;
};

/// Product-moment correlation. Throws DegenerateInput for mismatched lengths,
/// fewer than two points, or a constant sequence.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

/// year -> new repositories; contiguous over the observed span.
using TrendSeries = std::map<int, std::uint64_t>;

TrendSeries yearly_trend(std::span<const RepositoryRecord> records);

enum class TrendGroup { type, platform };

/// One series per category name. Every series spans the same contiguous year
/// range as the ungrouped trend. `tags` are matched to records by repo name.
std::map<std::string, TrendSeries> yearly_trend_by(std::span<const RepositoryRecord> records,
                                                   std::span<const taxonomy::TagAssignment> tags,
                                                   const taxonomy::TagLexicon& lexicon, TrendGroup group);

enum class Metric { repo_count, followers, stars, forks, watchers };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view text);

struct RankedEntry {
    std::string name;
    std::uint64_t value = 0;

    bool operator==(const RankedEntry&) const = default;
};

/// Authors ranked by repo_count or followers. `records` should already be
/// restricted to malware-classified repositories.
std::vector<RankedEntry> top_authors(std::span<const RepositoryRecord> records, Metric metric, std::size_t k);

/// Repositories ranked by stars, forks or watchers.
std::vector<RankedEntry> top_repositories(std::span<const RepositoryRecord> records, Metric metric, std::size_t k);

/// Full ecosystem report as JSON plus one CSV per figure.
struct Report {
    std::string json_text;
    std::map<std::string, std::string> figure_csv;  // file name -> contents
};

struct ReportOptions {
    std::size_t top_k = 10;
    std::string config_hash;
};

Report build_report(std::span<const RepositoryRecord> records, std::span<const taxonomy::TagAssignment> tags,
                    const taxonomy::TagLexicon& lexicon, const ReportOptions& options);

}  // namespace malhunt::analytics
