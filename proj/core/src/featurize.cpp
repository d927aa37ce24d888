#include "malhunt/featurize.hpp"

#include "malhunt/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace malhunt::features {

using Json = nlohmann::ordered_json;

std::string_view to_string(WeightingMode mode) {
    switch (mode) {
        case WeightingMode::presence: return "presence";
        case WeightingMode::count: return "count";
        case WeightingMode::tfidf: return "tfidf";
    }
    return "unknown";
}

std::optional<WeightingMode> parse_weighting_mode(std::string_view text) {
    for (auto mode : {WeightingMode::presence, WeightingMode::count, WeightingMode::tfidf}) {
        if (to_string(mode) == text) return mode;
    }
    return std::nullopt;
}

std::vector<FieldBudget> default_budgets() {
    return {{FieldKind::title, 30},
            {FieldKind::topics, 10},
            {FieldKind::description, 400},
            {FieldKind::file_names, 100},
            {FieldKind::readme, 10}};
}

double chi_square(const Contingency& t) {
    const double a = static_cast<double>(t.a);
    const double b = static_cast<double>(t.b);
    const double c = static_cast<double>(t.c);
    const double d = static_cast<double>(t.d);
    const double denom = (a + b) * (c + d) * (a + c) * (b + d);
    if (denom == 0.0) return 0.0;
    const double n = a + b + c + d;
    const double diff = a * d - b * c;
    return n * diff * diff / denom;
}

namespace {

void require_both_classes(std::span<const LabeledTokens> labeled) {
    bool mal = false, ben = false;
    for (const auto& doc : labeled) {
        (doc.label == ClassLabel::malware ? mal : ben) = true;
    }
    if (!mal || !ben) throw DegenerateCorpus("labeled set must contain both malware and benign examples");
}

}  // namespace

double chi_square(std::string_view word, FieldKind kind, std::span<const LabeledTokens> labeled) {
    require_both_classes(labeled);
    Contingency table;
    for (const auto& doc : labeled) {
        const auto& tokens = doc.tokens[kind].tokens;
        bool present = std::find(tokens.begin(), tokens.end(), word) != tokens.end();
        if (doc.label == ClassLabel::malware) {
            ++(present ? table.a : table.c);
        } else {
            ++(present ? table.b : table.d);
        }
    }
    return chi_square(table);
}

Vocabulary::Vocabulary(WeightingMode mode, std::uint64_t training_docs, std::array<FieldVocabulary, 5> fields)
    : mode_(mode), training_docs_(training_docs), fields_(std::move(fields)) {
    for (auto kind : kAllFields) {
        const auto& f = field(kind);
        if (f.kind != kind) throw ValidationError("vocabulary fields out of layout order");
        if (f.words.size() > f.budget) {
            throw ValidationError("vocabulary field " + std::string(malhunt::to_string(kind)) + " exceeds its budget");
        }
    }
    index();
}

void Vocabulary::index() {
    for (std::size_t f = 0; f < fields_.size(); ++f) {
        const auto& words = fields_[f].words;
        auto& order = lookup_order_[f];
        order.resize(words.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return words[x].word < words[y].word; });
        for (std::size_t i = 1; i < order.size(); ++i) {
            if (words[order[i]].word == words[order[i - 1]].word) {
                throw ValidationError("duplicate vocabulary word '" + words[order[i]].word + "'");
            }
        }
    }
}

std::size_t Vocabulary::width() const {
    std::size_t w = 0;
    for (const auto& f : fields_) w += f.budget;
    return w;
}

std::size_t Vocabulary::offset(FieldKind kind) const {
    std::size_t off = 0;
    for (std::size_t f = 0; f < static_cast<std::size_t>(kind); ++f) off += fields_[f].budget;
    return off;
}

std::size_t Vocabulary::selected_count() const {
    std::size_t n = 0;
    for (const auto& f : fields_) n += f.words.size();
    return n;
}

std::optional<std::size_t> Vocabulary::slot(FieldKind kind, std::string_view word) const {
    const auto fi = static_cast<std::size_t>(kind);
    const auto& words = fields_[fi].words;
    const auto& order = lookup_order_[fi];
    auto it = std::lower_bound(order.begin(), order.end(), word,
                               [&](std::size_t idx, std::string_view w) { return words[idx].word < w; });
    if (it == order.end() || words[*it].word != word) return std::nullopt;
    return offset(kind) + *it;
}

std::string Vocabulary::to_json_text() const {
    Json doc;
    doc["mode"] = std::string(to_string(mode_));
    doc["training_docs"] = training_docs_;
    doc["width"] = width();
    Json fields = Json::array();
    for (const auto& f : fields_) {
        Json jf;
        jf["field"] = std::string(malhunt::to_string(f.kind));
        jf["budget"] = f.budget;
        Json words = Json::array();
        for (const auto& w : f.words) {
            words.push_back(Json{{"word", w.word}, {"score", w.score}, {"df", w.doc_freq}});
        }
        jf["words"] = std::move(words);
        fields.push_back(std::move(jf));
    }
    doc["fields"] = std::move(fields);
    return doc.dump(2) + "\n";
}

Vocabulary Vocabulary::from_json_text(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
        auto mode = parse_weighting_mode(doc.at("mode").get<std::string>());
        if (!mode) throw ValidationError("vocabulary: unknown mode");
        std::array<FieldVocabulary, 5> fields{};
        std::set<FieldKind> seen;
        for (const auto& jf : doc.at("fields")) {
            auto kind = parse_field_kind(jf.at("field").get<std::string>());
            if (!kind || !seen.insert(*kind).second) throw ValidationError("vocabulary: bad or repeated field");
            auto& f = fields[static_cast<std::size_t>(*kind)];
            f.kind = *kind;
            f.budget = jf.at("budget").get<std::size_t>();
            for (const auto& jw : jf.at("words")) {
                f.words.push_back({jw.at("word").get<std::string>(), jw.at("score").get<double>(),
                                   jw.at("df").get<std::uint64_t>()});
            }
        }
        if (seen.size() != kAllFields.size()) throw ValidationError("vocabulary: missing fields");
        return Vocabulary(*mode, doc.at("training_docs").get<std::uint64_t>(), std::move(fields));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("vocabulary: malformed JSON: ") + e.what());
    }
}

std::string Vocabulary::hash() const { return hex64(fnv1a64(to_json_text())); }

Vocabulary select_vocabulary(std::span<const LabeledTokens> labeled, std::span<const FieldBudget> budgets,
                             WeightingMode mode) {
    std::array<std::optional<std::size_t>, 5> budget_of{};
    for (const auto& b : budgets) {
        auto& slot = budget_of[static_cast<std::size_t>(b.kind)];
        if (slot) throw ValidationError("budget given twice for field " + std::string(malhunt::to_string(b.kind)));
        slot = b.k;
    }
    for (auto kind : kAllFields) {
        if (!budget_of[static_cast<std::size_t>(kind)]) {
            throw ValidationError("missing budget for field " + std::string(malhunt::to_string(kind)));
        }
    }
    require_both_classes(labeled);

    std::uint64_t n_mal = 0, n_ben = 0;
    for (const auto& doc : labeled) ++(doc.label == ClassLabel::malware ? n_mal : n_ben);

    std::array<FieldVocabulary, 5> fields{};
    for (auto kind : kAllFields) {
        // word -> (malware docs containing, benign docs containing)
        std::map<std::string, std::pair<std::uint64_t, std::uint64_t>, std::less<>> df;
        for (const auto& doc : labeled) {
            std::set<std::string_view> unique(doc.tokens[kind].tokens.begin(), doc.tokens[kind].tokens.end());
            for (auto word : unique) {
                auto it = df.find(word);
                if (it == df.end()) it = df.emplace(std::string(word), std::pair<std::uint64_t, std::uint64_t>{}).first;
                ++(doc.label == ClassLabel::malware ? it->second.first : it->second.second);
            }
        }
        std::vector<ScoredWord> scored;
        scored.reserve(df.size());
        for (const auto& [word, counts] : df) {
            Contingency t{counts.first, counts.second, n_mal - counts.first, n_ben - counts.second};
            scored.push_back({word, chi_square(t), counts.first + counts.second});
        }
        const std::size_t k = *budget_of[static_cast<std::size_t>(kind)];
        auto by_rank = [](const ScoredWord& x, const ScoredWord& y) {
            if (x.score != y.score) return x.score > y.score;
            return x.word < y.word;
        };
        if (scored.size() > k) {
            std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), by_rank);
            scored.resize(k);
        } else {
            std::sort(scored.begin(), scored.end(), by_rank);
        }
        auto& f = fields[static_cast<std::size_t>(kind)];
        f.kind = kind;
        f.budget = k;
        f.words = std::move(scored);
    }
    return Vocabulary(mode, labeled.size(), std::move(fields));
}

FeatureVector vectorize(const textprep::RepositoryTokens& tokens, const Vocabulary& vocab, std::string repo_name) {
    FeatureVector fv;
    fv.repo_name = std::move(repo_name);
    fv.values.assign(vocab.width(), 0.0);
    for (auto kind : kAllFields) {
        for (const auto& token : tokens[kind].tokens) {
            if (auto slot = vocab.slot(kind, token)) fv.values[*slot] += 1.0;
        }
    }
    switch (vocab.mode()) {
        case WeightingMode::count: break;
        case WeightingMode::presence:
            for (auto& v : fv.values) v = v > 0.0 ? 1.0 : 0.0;
            break;
        case WeightingMode::tfidf:
            for (auto kind : kAllFields) {
                const auto& f = vocab.field(kind);
                const std::size_t off = vocab.offset(kind);
                for (std::size_t i = 0; i < f.words.size(); ++i) {
                    const auto df = f.words[i].doc_freq;
                    if (df == 0) continue;
                    fv.values[off + i] *= std::log(static_cast<double>(vocab.training_docs()) / static_cast<double>(df));
                }
            }
            break;
    }
    return fv;
}

}  // namespace malhunt::features
