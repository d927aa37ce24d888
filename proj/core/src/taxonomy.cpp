#include "malhunt/taxonomy.hpp"

#include "malhunt/errors.hpp"
#include "malhunt/resources.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace malhunt::taxonomy {

namespace {

using Json = nlohmann::ordered_json;

// Stems one lexicon entry with the title-field pipeline; a multi-word entry
// contributes each of its stems.
std::vector<std::string> stems_of(std::string_view word, const textprep::Preprocessor& prep) {
    return prep.preprocess(word, FieldKind::title).tokens;
}

void add_category(const Json& categories, std::vector<std::string>& names,
                  std::map<std::string, std::vector<std::size_t>, std::less<>>& index,
                  const textprep::Preprocessor& prep) {
    for (const auto& [name, words] : categories.items()) {
        const std::size_t id = names.size();
        names.push_back(name);
        std::set<std::string> stems;
        for (const auto& s : stems_of(name, prep)) stems.insert(s);
        for (const auto& w : words) {
            for (const auto& s : stems_of(w.get<std::string>(), prep)) stems.insert(s);
        }
        for (const auto& s : stems) index[s].push_back(id);
    }
}

}  // namespace

TagLexicon TagLexicon::parse(std::string_view json_text, const textprep::Preprocessor& prep) {
    TagLexicon lex;
    try {
        auto doc = Json::parse(json_text);
        add_category(doc.at("types"), lex.types_, lex.type_index_, prep);
        add_category(doc.at("platforms"), lex.platforms_, lex.platform_index_, prep);
        if (doc.contains("negative")) {
            for (const auto& w : doc.at("negative")) {
                for (const auto& s : stems_of(w.get<std::string>(), prep)) lex.negative_.insert(s);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("taxonomy: malformed JSON: ") + e.what());
    }
    if (lex.types_.size() != kTypeCount || lex.platforms_.size() != kPlatformCount) {
        throw ValidationError("taxonomy must define exactly 13 types and 6 platforms, got " +
                              std::to_string(lex.types_.size()) + " and " + std::to_string(lex.platforms_.size()));
    }
    return lex;
}

TagLexicon TagLexicon::load(const std::filesystem::path& path, const textprep::Preprocessor& prep) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), prep);
}

TagLexicon TagLexicon::defaults(const textprep::Preprocessor& prep) { return parse(resources::taxonomy_json(), prep); }

const std::vector<std::size_t>* TagLexicon::types_for(std::string_view token) const {
    if (negative_.contains(token)) return nullptr;
    auto it = type_index_.find(token);
    return it == type_index_.end() ? nullptr : &it->second;
}

const std::vector<std::size_t>* TagLexicon::platforms_for(std::string_view token) const {
    if (negative_.contains(token)) return nullptr;
    auto it = platform_index_.find(token);
    return it == platform_index_.end() ? nullptr : &it->second;
}

std::set<std::string> TagLexicon::type_stems(std::size_t type) const {
    std::set<std::string> out;
    for (const auto& [stem, ids] : type_index_) {
        for (auto id : ids) {
            if (id == type) out.insert(stem);
        }
    }
    return out;
}

std::set<std::string> TagLexicon::platform_stems(std::size_t platform) const {
    std::set<std::string> out;
    for (const auto& [stem, ids] : platform_index_) {
        for (auto id : ids) {
            if (id == platform) out.insert(stem);
        }
    }
    return out;
}

TagAssignment tag_repository(const textprep::RepositoryTokens& tokens, const TagLexicon& lexicon, std::string repo_name) {
    TagAssignment out;
    out.repo_name = std::move(repo_name);
    for (const auto& field : tokens.fields) {
        for (const auto& token : field.tokens) {
            if (const auto* ids = lexicon.types_for(token)) out.types.insert(ids->begin(), ids->end());
            if (const auto* ids = lexicon.platforms_for(token)) out.platforms.insert(ids->begin(), ids->end());
        }
    }
    return out;
}

double TagMatrix::multi_type_rate() const {
    return repositories == 0 ? 0.0 : static_cast<double>(multi_type) / static_cast<double>(repositories);
}

double TagMatrix::multi_platform_rate() const {
    return repositories == 0 ? 0.0 : static_cast<double>(multi_platform) / static_cast<double>(repositories);
}

TagMatrix build_matrix(std::span<const TagAssignment> assignments, const TagLexicon& lexicon) {
    TagMatrix m;
    m.types = lexicon.types();
    m.platforms = lexicon.platforms();
    m.cells.assign(m.types.size(), std::vector<std::uint64_t>(m.platforms.size(), 0));
    m.type_totals.assign(m.types.size(), 0);
    m.platform_totals.assign(m.platforms.size(), 0);
    for (const auto& a : assignments) {
        ++m.repositories;
        for (auto t : a.types) {
            if (t >= m.types.size()) throw ValidationError("tag assignment references unknown type");
            ++m.type_totals[t];
            for (auto p : a.platforms) {
                if (p >= m.platforms.size()) throw ValidationError("tag assignment references unknown platform");
                ++m.cells[t][p];
            }
        }
        for (auto p : a.platforms) {
            if (p >= m.platforms.size()) throw ValidationError("tag assignment references unknown platform");
            ++m.platform_totals[p];
        }
        if (!a.types.empty()) ++m.with_any_type;
        if (!a.platforms.empty()) ++m.with_any_platform;
        if (a.types.size() > 1) ++m.multi_type;
        if (a.platforms.size() > 1) ++m.multi_platform;
    }
    return m;
}

}  // namespace malhunt::taxonomy
