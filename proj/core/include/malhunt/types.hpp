#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt {

/// The five text fields the classifier reads, in feature-vector layout order.
enum class FieldKind : std::uint8_t { title, topics, description, file_names, readme };

inline constexpr std::array<FieldKind, 5> kAllFields{FieldKind::title, FieldKind::topics, FieldKind::description,
                                                     FieldKind::file_names, FieldKind::readme};

std::string_view to_string(FieldKind kind);
std::optional<FieldKind> parse_field_kind(std::string_view text);

/// Binary class label. Benign is index 0 so that exact ties resolve to it.
enum class ClassLabel : std::uint8_t { benign = 0, malware = 1 };

inline constexpr std::size_t kNumClasses = 2;

inline constexpr std::size_t index_of(ClassLabel label) { return static_cast<std::size_t>(label); }
std::string_view to_string(ClassLabel label);
std::optional<ClassLabel> parse_class_label(std::string_view text);

/// Nested keyword tiers: Q1 is a subset of Q50, which is a subset of Q137.
enum class QueryTier : std::uint8_t { q1 = 0, q50 = 1, q137 = 2 };

inline constexpr std::array<QueryTier, 3> kAllTiers{QueryTier::q1, QueryTier::q50, QueryTier::q137};

std::string_view to_string(QueryTier tier);
std::optional<QueryTier> parse_query_tier(std::string_view text);

using Date = std::chrono::year_month_day;
using Timestamp = std::chrono::sys_seconds;

/// "YYYY-MM-DD"
std::string format_date(Date date);
std::optional<Date> parse_date(std::string_view text);

/// "YYYY-MM-DDTHH:MM:SSZ". parse_timestamp also accepts a bare date.
std::string format_timestamp(Timestamp ts);
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// One archived repository.
struct RepositoryRecord {
    std::string full_name;  // owner/name
    std::string title;
    std::string description;
    std::vector<std::string> topics;
    std::string readme;
    std::vector<std::string> file_paths;
    Date created_at{};
    Date modified_at{};
    std::uint64_t fork_count = 0;
    std::uint64_t watcher_count = 0;
    std::uint64_t star_count = 0;
    std::uint64_t author_followers = 0;
    std::uint64_t author_following = 0;
    Timestamp fetched_at{};
    QueryTier query_tier = QueryTier::q137;

    std::string owner() const;

    bool operator==(const RepositoryRecord&) const = default;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const RepositoryRecord& record);

/// 64-bit FNV-1a; stable across platforms, used for content and config hashes.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace malhunt
