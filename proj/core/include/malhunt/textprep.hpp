#pragma once

#include "malhunt/types.hpp"

#include <array>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt::textprep {

/// Token list for one repository field after the full preprocessing pipeline.
/// Tokens are non-empty, lowercase, stemmed and drawn from [a-z0-9_-].
struct TokenizedField {
    FieldKind kind = FieldKind::title;
    std::vector<std::string> tokens;

    bool operator==(const TokenizedField&) const = default;
};

/// All five fields of one repository, indexed by FieldKind.
struct RepositoryTokens {
    std::array<TokenizedField, 5> fields;

    RepositoryTokens();
    TokenizedField& operator[](FieldKind kind) { return fields[static_cast<std::size_t>(kind)]; }
    const TokenizedField& operator[](FieldKind kind) const { return fields[static_cast<std::size_t>(kind)]; }

    bool operator==(const RepositoryTokens&) const = default;
};

using WordSet = std::set<std::string, std::less<>>;

/// Character level: drops malformed UTF-8, lowercases ASCII letters and
/// replaces each punctuation or currency code point with one space.
/// '_' is kept since it is part of identifiers and file names.
std::string normalize_chars(std::string_view raw);

/// Entity level: removes whitespace-separated tokens that are numbers, URLs
/// (scheme:// or www.) or e-mail addresses, and deletes digits from the
/// remaining tokens. Surviving tokens are re-joined with single spaces.
std::string strip_entities(std::string_view text);

/// Parses a one-entry-per-line list; blank lines and '#' comments are skipped
/// and entries are lowercased.
WordSet parse_word_list(std::string_view text);
WordSet load_word_list(const std::filesystem::path& path);

/// Word-level stage plus the full per-field pipeline. Immutable after
/// construction, so one instance may be shared across threads.
class Preprocessor {
public:
    /// Uses the built-in stopword list and filename blacklist.
    Preprocessor();
    Preprocessor(WordSet stopwords, WordSet filename_blacklist);

    static Preprocessor from_files(const std::filesystem::path& stopwords,
                                   const std::filesystem::path& filename_blacklist);

    /// Expects char-normalized, entity-stripped text.
    TokenizedField tokenize_and_filter(std::string_view text, FieldKind kind) const;

    /// strip_entities -> normalize_chars -> tokenize_and_filter.
    TokenizedField preprocess(std::string_view raw, FieldKind kind) const;

    RepositoryTokens preprocess(const RepositoryRecord& record) const;

    const WordSet& stopwords() const { return stopwords_; }
    const WordSet& filename_blacklist() const { return blacklist_; }

private:
    bool keep(std::string_view token, FieldKind kind) const;

    WordSet stopwords_;
    WordSet blacklist_;
    WordSet blacklist_stems_;
};

/// Raw text of one field: topics are space-joined, file paths newline-joined.
std::string raw_field_text(const RepositoryRecord& record, FieldKind kind);

}  // namespace malhunt::textprep
