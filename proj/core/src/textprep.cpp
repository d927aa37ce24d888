#include "malhunt/textprep.hpp"

#include "malhunt/errors.hpp"
#include "malhunt/resources.hpp"
#include "malhunt/stemmer.hpp"

#include <fstream>
#include <sstream>

namespace malhunt::textprep {

namespace {

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Decodes one code point starting at `pos`. Returns the sequence length, or 0
// for a malformed/overlong/surrogate sequence (the caller skips one byte).
std::size_t decode_utf8(std::string_view s, std::size_t pos, char32_t& cp) {
    auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char lead = byte(pos);
    std::size_t len = 0;
    char32_t min = 0;
    if (lead >= 0xC2 && lead <= 0xDF) {
        len = 2, cp = lead & 0x1F, min = 0x80;
    } else if (lead >= 0xE0 && lead <= 0xEF) {
        len = 3, cp = lead & 0x0F, min = 0x800;
    } else if (lead >= 0xF0 && lead <= 0xF4) {
        len = 4, cp = lead & 0x07, min = 0x10000;
    } else {
        return 0;
    }
    if (pos + len > s.size()) return 0;
    for (std::size_t i = 1; i < len; ++i) {
        unsigned char c = byte(pos + i);
        if ((c & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (c & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    return len;
}

bool is_symbol_or_punct(char32_t cp) {
    return (cp >= 0x00A0 && cp <= 0x00BF) || cp == 0x00D7 || cp == 0x00F7 || (cp >= 0x2000 && cp <= 0x206F) ||
           (cp >= 0x20A0 && cp <= 0x20CF) || (cp >= 0x2190 && cp <= 0x2BFF) || (cp >= 0x3000 && cp <= 0x303F) ||
           (cp >= 0xFE00 && cp <= 0xFE0F) || (cp >= 0xFE30 && cp <= 0xFE4F) || (cp >= 0xFF00 && cp <= 0xFF0F) ||
           (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) ||
           (cp >= 0xFFE0 && cp <= 0xFFEF) || cp == 0xFEFF || (cp >= 0x1F000 && cp <= 0x1FAFF);
}

// Locale-independent case folding for the scripts commonly seen in titles.
char32_t fold_case(char32_t cp) {
    if ((cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) || (cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2) ||
        (cp >= 0x0410 && cp <= 0x042F))
        return cp + 0x20;
    if (cp >= 0x0400 && cp <= 0x040F) return cp + 0x50;
    return cp;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_lower_alpha(char c) { return c >= 'a' && c <= 'z'; }
bool is_alpha(char c) { return is_lower_alpha(c) || (c >= 'A' && c <= 'Z'); }
char to_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::vector<std::string_view> split_whitespace(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) out.push_back(text.substr(start, i - start));
    }
    return out;
}

bool is_trailing_punct(char c) {
    switch (c) {
        case ')': case ']': case '>': case '"': case '\'': case '.': case ',': case ';': case ':': case '!':
        case '?': case '*': case '`': return true;
        default: return false;
    }
}

bool is_scheme_char(char c) { return is_alpha(c) || is_digit(c) || c == '+' || c == '.' || c == '-'; }

// Removes the first URL in `token`, returning true if one was found. A URL
// runs from its scheme (or "www.") to the end of the token, minus trailing
// punctuation such as a closing markdown parenthesis.
bool erase_url(std::string& token) {
    std::string lower;
    lower.reserve(token.size());
    for (char c : token) lower.push_back(to_lower(c));

    std::size_t start = std::string::npos;
    if (auto sep = lower.find("://"); sep != std::string::npos && sep > 0) {
        std::size_t s = sep;
        while (s > 0 && is_scheme_char(lower[s - 1])) --s;
        while (s < sep && !is_alpha(lower[s])) ++s;
        if (s < sep) start = s;
    }
    if (auto www = lower.find("www."); www != std::string::npos && www < start &&
                                       (www == 0 || !is_scheme_char(lower[www - 1]))) {
        start = www;
    }
    if (start == std::string::npos) return false;
    std::size_t end = token.size();
    while (end > start && is_trailing_punct(token[end - 1])) --end;
    token.erase(start, end - start);
    return true;
}

bool is_email_char(char c) {
    return is_alpha(c) || is_digit(c) || c == '.' || c == '_' || c == '%' || c == '+' || c == '-';
}

bool erase_email(std::string& token) {
    for (std::size_t at = token.find('@'); at != std::string::npos; at = token.find('@', at + 1)) {
        std::size_t s = at;
        while (s > 0 && is_email_char(token[s - 1])) --s;
        std::size_t e = at + 1;
        while (e < token.size() && is_email_char(token[e])) ++e;
        while (e > at + 1 && token[e - 1] == '.') --e;
        std::string_view domain(token.data() + at + 1, e - at - 1);
        auto dot = domain.rfind('.');
        bool valid = s < at && dot != std::string_view::npos && dot > 0 && dot + 1 < domain.size() &&
                     is_alpha(domain[dot + 1]);
        if (valid) {
            token.erase(s, e - s);
            return true;
        }
    }
    return false;
}

// Integers and decimals, optionally signed, with grouping separators or a
// trailing percent sign: "127", "-3.5", "1,000", "42%".
bool is_number(std::string_view core) {
    std::size_t i = 0;
    if (i < core.size() && (core[i] == '+' || core[i] == '-')) ++i;
    if (i == core.size() || !is_digit(core[i])) return false;
    while (i < core.size()) {
        if (is_digit(core[i])) {
            ++i;
        } else if ((core[i] == '.' || core[i] == ',') && i + 1 < core.size() && is_digit(core[i + 1])) {
            ++i;
        } else if (core[i] == '%' && i + 1 == core.size()) {
            ++i;
        } else {
            return false;
        }
    }
    return true;
}

std::string_view trim_punct(std::string_view token) {
    auto leading = [](char c) { return c == '(' || c == '[' || c == '{' || c == '<' || c == '"' || c == '\'' || c == '`'; };
    while (!token.empty() && leading(token.front())) token.remove_prefix(1);
    while (!token.empty() && is_trailing_punct(token.back())) token.remove_suffix(1);
    return token;
}

std::string_view trim_underscores(std::string_view token) {
    while (!token.empty() && token.front() == '_') token.remove_prefix(1);
    while (!token.empty() && token.back() == '_') token.remove_suffix(1);
    return token;
}

bool has_letter(std::string_view token) {
    for (char c : token) {
        if (is_lower_alpha(c)) return true;
    }
    return false;
}

bool is_token_char(char c) { return is_lower_alpha(c) || is_digit(c) || c == '_'; }

// Stems and trims until the token no longer changes.
std::string canonical_form(std::string_view token) {
    std::string current(trim_underscores(token));
    while (true) {
        std::string next(trim_underscores(stable_stem(current)));
        if (next == current) return current;
        current = std::move(next);
    }
}

}  // namespace

std::string normalize_chars(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        auto c = static_cast<unsigned char>(raw[i]);
        if (c < 0x80) {
            char ch = static_cast<char>(c);
            if (is_alpha(ch) || is_digit(ch) || ch == '_') {
                out.push_back(to_lower(ch));
            } else if (is_space(ch)) {
                out.push_back(ch);
            } else {
                out.push_back(' ');
            }
            ++i;
            continue;
        }
        char32_t cp = 0;
        std::size_t len = decode_utf8(raw, i, cp);
        if (len == 0) {
            ++i;
            continue;
        }
        if (is_symbol_or_punct(cp)) {
            out.push_back(' ');
        } else {
            append_utf8(out, fold_case(cp));
        }
        i += len;
    }
    return out;
}

std::string strip_entities(std::string_view text) {
    std::string out;
    for (auto piece : split_whitespace(text)) {
        if (is_number(trim_punct(piece))) continue;
        std::string token(piece);
        while (erase_url(token)) {
        }
        while (erase_email(token)) {
        }
        std::string kept;
        kept.reserve(token.size());
        for (char c : token) {
            if (!is_digit(c)) kept.push_back(c);
        }
        if (kept.empty()) continue;
        if (!out.empty()) out.push_back(' ');
        out += kept;
    }
    return out;
}

WordSet parse_word_list(std::string_view text) {
    WordSet words;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        while (!line.empty() && is_space(line.front())) line.remove_prefix(1);
        while (!line.empty() && is_space(line.back())) line.remove_suffix(1);
        if (!line.empty() && line.front() != '#') {
            std::string word;
            for (char c : line) word.push_back(to_lower(c));
            words.insert(std::move(word));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return words;
}

WordSet load_word_list(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read word list " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_word_list(buf.str());
}

RepositoryTokens::RepositoryTokens() {
    for (auto kind : kAllFields) fields[static_cast<std::size_t>(kind)].kind = kind;
}

Preprocessor::Preprocessor()
    : Preprocessor(parse_word_list(resources::stopwords()), parse_word_list(resources::filename_blacklist())) {}

Preprocessor::Preprocessor(WordSet stopwords, WordSet filename_blacklist)
    : stopwords_(std::move(stopwords)), blacklist_(std::move(filename_blacklist)) {
    for (const auto& word : blacklist_) {
        std::string normalized = normalize_chars(word);
        for (auto piece : split_whitespace(normalized)) blacklist_stems_.insert(canonical_form(piece));
        blacklist_stems_.insert(canonical_form(word));
    }
}

Preprocessor Preprocessor::from_files(const std::filesystem::path& stopwords,
                                      const std::filesystem::path& filename_blacklist) {
    return Preprocessor(load_word_list(stopwords), load_word_list(filename_blacklist));
}

bool Preprocessor::keep(std::string_view token, FieldKind kind) const {
    if (token.size() < 2 || !has_letter(token)) return false;
    if (stopwords_.contains(token)) return false;
    if (kind == FieldKind::file_names && (blacklist_.contains(token) || blacklist_stems_.contains(token))) return false;
    return true;
}

TokenizedField Preprocessor::tokenize_and_filter(std::string_view text, FieldKind kind) const {
    TokenizedField field;
    field.kind = kind;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_token_char(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && is_token_char(text[i])) ++i;
        if (i == start) continue;
        auto raw = trim_underscores(text.substr(start, i - start));
        if (!keep(raw, kind)) continue;
        std::string stem = canonical_form(raw);
        if (!keep(stem, kind)) continue;
        field.tokens.push_back(std::move(stem));
    }
    return field;
}

TokenizedField Preprocessor::preprocess(std::string_view raw, FieldKind kind) const {
    return tokenize_and_filter(normalize_chars(strip_entities(raw)), kind);
}

RepositoryTokens Preprocessor::preprocess(const RepositoryRecord& record) const {
    RepositoryTokens out;
    for (auto kind : kAllFields) out[kind] = preprocess(raw_field_text(record, kind), kind);
    return out;
}

std::string raw_field_text(const RepositoryRecord& record, FieldKind kind) {
    auto join = [](const std::vector<std::string>& parts, char sep) {
        std::string s;
        for (const auto& p : parts) {
            if (!s.empty()) s.push_back(sep);
            s += p;
        }
        return s;
    };
    switch (kind) {
        case FieldKind::title: return record.title;
        case FieldKind::topics: return join(record.topics, ' ');
        case FieldKind::description: return record.description;
        case FieldKind::file_names: return join(record.file_paths, '\n');
        case FieldKind::readme: return record.readme;
    }
    return {};
}

}  // namespace malhunt::textprep
