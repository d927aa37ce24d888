#pragma once

#include "malhunt/textprep.hpp"
#include "malhunt/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt::features {

/// How a selected word's slot is valued in the feature vector.
enum class WeightingMode : std::uint8_t { presence, count, tfidf };

std::string_view to_string(WeightingMode mode);
std::optional<WeightingMode> parse_weighting_mode(std::string_view text);

/// Number of top-scoring words kept for one field.
struct FieldBudget {
    FieldKind kind = FieldKind::title;
    std::size_t k = 0;

    bool operator==(const FieldBudget&) const = default;
};

/// title 30, topics 10, description 400, file_names 100, readme 10 (sum 550).
std::vector<FieldBudget> default_budgets();

/// Preprocessed repository with its consensus class.
struct LabeledTokens {
    std::string name;
    textprep::RepositoryTokens tokens;
    ClassLabel label = ClassLabel::benign;
};

/// Document-level presence table for one word:
/// a = malware docs containing it, b = benign containing,
/// c = malware lacking, d = benign lacking.
struct Contingency {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::uint64_t c = 0;
    std::uint64_t d = 0;
};

/// N(ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)); 0 when any marginal is zero.
double chi_square(const Contingency& table);

/// Builds the contingency table of `word` in field `kind` and scores it.
/// Throws DegenerateCorpus unless both classes are present.
double chi_square(std::string_view word, FieldKind kind, std::span<const LabeledTokens> labeled);

struct ScoredWord {
    std::string word;
    double score = 0.0;
    std::uint64_t doc_freq = 0;  // training documents containing the word in this field

    bool operator==(const ScoredWord&) const = default;
};

struct FieldVocabulary {
    FieldKind kind = FieldKind::title;
    std::size_t budget = 0;
    std::vector<ScoredWord> words;  // descending score, ties lexicographic

    bool operator==(const FieldVocabulary&) const = default;
};

/// Per-field selected words, frozen at training time. Slot layout: fields in
/// FieldKind order, each occupying `budget` slots whether or not all are used.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(WeightingMode mode, std::uint64_t training_docs, std::array<FieldVocabulary, 5> fields);

    WeightingMode mode() const { return mode_; }
    std::uint64_t training_docs() const { return training_docs_; }
    const FieldVocabulary& field(FieldKind kind) const { return fields_[static_cast<std::size_t>(kind)]; }

    /// Total vector width: sum of field budgets.
    std::size_t width() const;
    std::size_t offset(FieldKind kind) const;
    std::size_t selected_count() const;

    /// Absolute vector slot of `word` in `kind`, if selected.
    std::optional<std::size_t> slot(FieldKind kind, std::string_view word) const;

    /// Stable key order; byte-identical across save/load.
    std::string to_json_text() const;
    static Vocabulary from_json_text(std::string_view text);

    /// Hash of the canonical JSON form.
    std::string hash() const;

    bool operator==(const Vocabulary& other) const {
        return mode_ == other.mode_ && training_docs_ == other.training_docs_ && fields_ == other.fields_;
    }

private:
    void index();

    WeightingMode mode_ = WeightingMode::count;
    std::uint64_t training_docs_ = 0;
    std::array<FieldVocabulary, 5> fields_{};
    std::array<std::vector<std::size_t>, 5> lookup_order_{};  // indices sorted by word
};

/// Top-K_f chi-square words per field. Budgets must cover all five fields
/// exactly once. Fields with fewer distinct words than K_f keep all of them.
Vocabulary select_vocabulary(std::span<const LabeledTokens> labeled, std::span<const FieldBudget> budgets,
                             WeightingMode mode);

struct FeatureVector {
    std::string repo_name;
    std::vector<double> values;

    bool operator==(const FeatureVector&) const = default;
};

/// presence: 0/1; count: occurrences; tfidf: count * ln(N_train / df).
/// Out-of-vocabulary tokens are ignored.
FeatureVector vectorize(const textprep::RepositoryTokens& tokens, const Vocabulary& vocab,
                        std::string repo_name = {});

}  // namespace malhunt::features
