#include "malhunt/types.hpp"

#include "malhunt/errors.hpp"

#include <charconv>
#include <cstdio>

namespace malhunt {

std::string_view to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::title: return "title";
        case FieldKind::topics: return "topics";
        case FieldKind::description: return "description";
        case FieldKind::file_names: return "file_names";
        case FieldKind::readme: return "readme";
    }
    return "unknown";
}

std::optional<FieldKind> parse_field_kind(std::string_view text) {
    for (auto kind : kAllFields) {
        if (to_string(kind) == text) return kind;
    }
    return std::nullopt;
}

std::string_view to_string(ClassLabel label) { return label == ClassLabel::malware ? "malware" : "benign"; }

std::optional<ClassLabel> parse_class_label(std::string_view text) {
    if (text == "malware") return ClassLabel::malware;
    if (text == "benign") return ClassLabel::benign;
    return std::nullopt;
}

std::string_view to_string(QueryTier tier) {
    switch (tier) {
        case QueryTier::q1: return "Q1";
        case QueryTier::q50: return "Q50";
        case QueryTier::q137: return "Q137";
    }
    return "unknown";
}

std::optional<QueryTier> parse_query_tier(std::string_view text) {
    for (auto tier : kAllTiers) {
        auto name = to_string(tier);
        if (text.size() != name.size()) continue;
        bool same = true;
        for (std::size_t i = 0; i < text.size(); ++i) {
            char c = text[i];
            if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
            if (c != name[i]) same = false;
        }
        if (same) return tier;
    }
    return std::nullopt;
}

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    auto first = text.data() + pos;
    auto last = first + len;
    for (auto p = first; p != last; ++p) {
        if (*p < '0' || *p > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

}  // namespace

std::string format_date(Date date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

std::optional<Date> parse_date(std::string_view text) {
    int y = 0, m = 0, d = 0;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) return std::nullopt;
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    auto days = floor<std::chrono::days>(ts);
    year_month_day ymd{days};
    hh_mm_ss hms{ts - days};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(ymd).c_str(), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
    return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    auto date = parse_date(text);
    if (!date) return std::nullopt;
    Timestamp ts{std::chrono::sys_days{*date}};
    if (text.size() == 10) return ts;
    int h = 0, mi = 0, s = 0;
    if (text.size() < 19 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':')
        return std::nullopt;
    if (!read_int(text, 11, 2, h) || !read_int(text, 14, 2, mi) || !read_int(text, 17, 2, s)) return std::nullopt;
    if (h > 23 || mi > 59 || s > 60) return std::nullopt;
    auto rest = text.substr(19);
    if (!(rest.empty() || rest == "Z")) return std::nullopt;
    return ts + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

std::string RepositoryRecord::owner() const {
    auto slash = full_name.find('/');
    return slash == std::string::npos ? full_name : full_name.substr(0, slash);
}

void validate(const RepositoryRecord& record) {
    auto slash = record.full_name.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == record.full_name.size() ||
        record.full_name.find('/', slash + 1) != std::string::npos) {
        throw ValidationError("full_name must be owner/name: '" + record.full_name + "'");
    }
    if (!record.created_at.ok() || !record.modified_at.ok()) {
        throw ValidationError(record.full_name + ": invalid created_at/modified_at");
    }
    if (std::chrono::sys_days{record.created_at} > std::chrono::sys_days{record.modified_at}) {
        throw ValidationError(record.full_name + ": created_at is after modified_at");
    }
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace malhunt
