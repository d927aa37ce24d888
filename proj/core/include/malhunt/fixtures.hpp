#pragma once

#include "malhunt/corpus.hpp"
#include "malhunt/harvester.hpp"
#include "malhunt/mock_archive.hpp"
#include "malhunt/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// Seeded synthetic data for tests, benchmarks and `malhunt make-fixture`.
namespace malhunt::fixtures {

inline constexpr std::uint64_t kDefaultSeed = 20190101;

/// Per-field token distribution of one class: draws pick from `words` with
/// probabilities `weights` (normalized).
struct WordDistribution {
    std::vector<std::string> words;
    std::vector<double> weights;

    double probability(const std::string& word) const;
};

/// Generative model behind the labeled corpus, indexed [class][field].
struct GenerativeModel {
    std::array<std::array<WordDistribution, 5>, kNumClasses> fields;
    std::array<double, kNumClasses> prior{0.5, 0.5};
};

/// One generated repository with the raw words drawn for each field, so an
/// exact Bayes classifier can be evaluated against the true model.
struct GeneratedRepository {
    RepositoryRecord record;
    ClassLabel label = ClassLabel::benign;
    std::array<std::vector<std::string>, 5> drawn;  // indexed by FieldKind
    bool source_heavy = false;
};

struct LabeledCorpus {
    GenerativeModel model;
    std::vector<GeneratedRepository> repositories;

    std::vector<RepositoryRecord> records() const;
    /// Unanimous three-judge ballots for every repository.
    std::vector<corpus::LabeledExample> labels() const;
    corpus::CorpusSnapshot snapshot() const;
};

/// `per_class` malware and `per_class` benign repositories with
/// class-dependent word distributions in every field. Some malware
/// repositories hold mostly documentation, so fewer are source-heavy.
LabeledCorpus make_labeled_corpus(std::size_t per_class = 60, std::uint64_t seed = kDefaultSeed);

/// Exact Bayes posterior class under the generating model (ties -> benign).
ClassLabel bayes_classify(const GenerativeModel& model, const GeneratedRepository& repo);

/// Populates a mock archive whose repositories are each reachable through
/// keywords of one tier only, plus a few deleted, README-less and empty
/// repositories.
void populate_mock_archive(harvest::MockArchive& archive, const harvest::KeywordTiers& tiers, std::size_t count,
                           std::uint64_t seed = kDefaultSeed);

}  // namespace malhunt::fixtures
