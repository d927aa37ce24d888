#pragma once

#include "malhunt/naive_bayes.hpp"
#include "malhunt/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace malhunt::eval {

/// One-vs-rest confusion counts for a single class.
struct Confusion {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    Confusion& operator+=(const Confusion& o);
    bool operator==(const Confusion&) const = default;
};

/// Zero denominators yield 0 with the matching flag set.
struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;

    bool operator==(const ClassMetrics&) const = default;
};

ClassMetrics compute_metrics(const Confusion& confusion);

/// Confusion counts from the point of view of `positive`.
Confusion confusion_for(ClassLabel positive, std::span<const ClassLabel> truth, std::span<const ClassLabel> predicted);

struct FoldResult {
    std::size_t fold = 0;
    std::size_t test_size = 0;
    std::array<Confusion, kNumClasses> confusion{};
    double accuracy = 0.0;
};

struct EvalReport {
    std::size_t folds = 0;
    std::uint64_t seed = 0;
    double alpha = 1.0;
    std::size_t evaluated = 0;
    std::array<Confusion, kNumClasses> confusion{};  // pooled over folds, indexed by ClassLabel
    std::array<ClassMetrics, kNumClasses> metrics{};
    double accuracy = 0.0;
    std::vector<FoldResult> per_fold;
    std::string config_hash;

    const ClassMetrics& of(ClassLabel c) const { return metrics[index_of(c)]; }
    std::string to_json_text() const;
};

/// Stratified assignment of examples to folds: each class is shuffled with a
/// seeded Fisher-Yates pass, then dealt round-robin with the fold counter
/// carried across classes. Returns the fold index of every example.
/// Throws TooFewExamples if folds < 2 or there are fewer examples than folds.
std::vector<std::size_t> stratified_folds(std::span<const ClassLabel> labels, std::size_t folds, std::uint64_t seed);

/// Trains on `train` indices and predicts every `test` index, in order.
using FoldClassifier =
    std::function<std::vector<ClassLabel>(std::span<const std::size_t> train, std::span<const std::size_t> test)>;

/// Generic k-fold driver: pools confusion counts over the stratified folds.
EvalReport cross_validate_with(std::span<const ClassLabel> labels, std::size_t folds, std::uint64_t seed,
                               const FoldClassifier& classify);

/// k-fold cross-validation of the multinomial Naive Bayes model on fixed vectors.
EvalReport cross_validate(std::span<const nb::LabeledVector> examples, std::size_t folds, double alpha,
                          std::uint64_t seed);

}  // namespace malhunt::eval
