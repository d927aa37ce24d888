#pragma once

#include "malhunt/textprep.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt::taxonomy {

/// Keyword stems for the malware types and target platforms. All stems pass
/// through the same Preprocessor as repository text, so matching is plain
/// token equality.
class TagLexicon {
public:
    static constexpr std::size_t kTypeCount = 13;
    static constexpr std::size_t kPlatformCount = 6;

    /// Parses data/taxonomy.json-style text: {"types": {name: [words]},
    /// "platforms": {name: [words]}, "negative": [words]}. Category names are
    /// always matched as keywords too. Throws ValidationError unless there are
    /// exactly 13 types and 6 platforms.
    static TagLexicon parse(std::string_view json_text, const textprep::Preprocessor& prep);
    static TagLexicon load(const std::filesystem::path& path, const textprep::Preprocessor& prep);
    /// Built-in lexicon.
    static TagLexicon defaults(const textprep::Preprocessor& prep);

    const std::vector<std::string>& types() const { return types_; }
    const std::vector<std::string>& platforms() const { return platforms_; }

    /// Categories whose stems include `token`; empty for negative stems.
    const std::vector<std::size_t>* types_for(std::string_view token) const;
    const std::vector<std::size_t>* platforms_for(std::string_view token) const;
    bool is_negative(std::string_view token) const { return negative_.contains(token); }

    /// Stems associated with one type/platform (for inspection and tests).
    std::set<std::string> type_stems(std::size_t type) const;
    std::set<std::string> platform_stems(std::size_t platform) const;

private:
    std::vector<std::string> types_;
    std::vector<std::string> platforms_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> type_index_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> platform_index_;
    std::set<std::string, std::less<>> negative_;
};

struct TagAssignment {
    std::string repo_name;
    std::set<std::size_t> types;      // indices into TagLexicon::types()
    std::set<std::size_t> platforms;  // indices into TagLexicon::platforms()

    bool operator==(const TagAssignment&) const = default;
};

/// A category is assigned iff one of its stems occurs in any field.
TagAssignment tag_repository(const textprep::RepositoryTokens& tokens, const TagLexicon& lexicon,
                             std::string repo_name = {});

/// Type x platform distribution.
struct TagMatrix {
    std::vector<std::string> types;
    std::vector<std::string> platforms;
    /// cells[t][p] = repositories tagged with both t and p.
    std::vector<std::vector<std::uint64_t>> cells;
    std::vector<std::uint64_t> type_totals;      // repositories tagged with type t
    std::vector<std::uint64_t> platform_totals;  // repositories tagged with platform p
    std::uint64_t repositories = 0;
    std::uint64_t with_any_type = 0;
    std::uint64_t with_any_platform = 0;
    std::uint64_t multi_type = 0;
    std::uint64_t multi_platform = 0;

    /// Fractions of all repositories with more than one type / platform;
    /// 0 for an empty input.
    double multi_type_rate() const;
    double multi_platform_rate() const;
};

TagMatrix build_matrix(std::span<const TagAssignment> assignments, const TagLexicon& lexicon);

}  // namespace malhunt::taxonomy
