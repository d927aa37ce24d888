#pragma once

#include "malhunt/featurize.hpp"
#include "malhunt/types.hpp"

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace malhunt::nb {

struct LabeledVector {
    features::FeatureVector vector;
    ClassLabel label = ClassLabel::benign;
};

struct Prediction {
    ClassLabel label = ClassLabel::benign;
    /// log P(c) + sum_i v_i log P(i|c), indexed by ClassLabel.
    std::array<double, kNumClasses> log_joint{};
    /// log_joint normalized over the two classes.
    std::array<double, kNumClasses> log_posterior{};
};

/// Multinomial Naive Bayes with additive (Laplace/Lidstone) smoothing.
/// Immutable once trained.
class NaiveBayesModel {
public:
    /// log_prior_c = ln(n_c/n);
    /// log_likelihood_{c,i} = ln((count_{c,i} + alpha) / (sum_j count_{c,j} + alpha * W)).
    /// Throws DegenerateCorpus if a class is absent, InvalidAlpha if alpha <= 0,
    /// WidthMismatch if vectors differ in width.
    static NaiveBayesModel train(std::span<const LabeledVector> examples, double alpha,
                                 std::string vocabulary_hash = {});

    /// argmax_c of log_joint; an exact tie goes to benign.
    Prediction predict(std::span<const double> vector) const;

    std::size_t width() const { return log_likelihood_[0].size(); }
    double alpha() const { return alpha_; }
    double log_prior(ClassLabel c) const { return log_prior_[index_of(c)]; }
    double log_likelihood(ClassLabel c, std::size_t slot) const { return log_likelihood_[index_of(c)][slot]; }
    const std::string& vocabulary_hash() const { return vocabulary_hash_; }

    /// Hash of the run configuration that produced the model (set by the pipeline).
    const std::string& config_hash() const { return config_hash_; }
    void set_config_hash(std::string hash) { config_hash_ = std::move(hash); }

    std::string to_json_text() const;
    /// Refuses to load when `expected_vocabulary_hash` is non-empty and differs
    /// from the hash stored in the model.
    static NaiveBayesModel from_json_text(std::string_view text, std::string_view expected_vocabulary_hash = {});

private:
    std::array<double, kNumClasses> log_prior_{};
    std::array<std::vector<double>, kNumClasses> log_likelihood_{};
    double alpha_ = 1.0;
    std::string vocabulary_hash_;
    std::string config_hash_;
};

}  // namespace malhunt::nb
