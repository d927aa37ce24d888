#include "malhunt/errors.hpp"
#include "malhunt/naive_bayes.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace malhunt;
using namespace malhunt::nb;

namespace {

LabeledVector ex(std::vector<double> v, ClassLabel c) { return {{"", std::move(v)}, c}; }

void expect_normalized(const NaiveBayesModel& m) {
    EXPECT_NEAR(std::exp(m.log_prior(ClassLabel::benign)) + std::exp(m.log_prior(ClassLabel::malware)), 1.0, 1e-12);
    for (auto c : {ClassLabel::benign, ClassLabel::malware}) {
        double s = 0;
        for (std::size_t i = 0; i < m.width(); ++i) s += std::exp(m.log_likelihood(c, i));
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

}  // namespace

TEST(NaiveBayes, HandComputedLikelihood) {
    std::vector<LabeledVector> d{ex({2, 0}, ClassLabel::malware), ex({0, 2}, ClassLabel::benign)};
    auto m = NaiveBayesModel::train(d, 1.0);
    EXPECT_NEAR(std::exp(m.log_likelihood(ClassLabel::malware, 0)), 0.75, 1e-15);
    EXPECT_NEAR(std::exp(m.log_likelihood(ClassLabel::malware, 1)), 0.25, 1e-15);
    EXPECT_NEAR(std::exp(m.log_prior(ClassLabel::malware)), 0.5, 1e-15);
    expect_normalized(m);
}

TEST(NaiveBayes, UniformOnZeroVectors) {
    std::vector<LabeledVector> d{ex({0, 0, 0, 0}, ClassLabel::malware), ex({0, 0, 0, 0}, ClassLabel::benign)};
    auto m = NaiveBayesModel::train(d, 1.0);
    for (auto c : {ClassLabel::benign, ClassLabel::malware}) {
        EXPECT_NEAR(m.log_prior(c), std::log(0.5), 1e-15);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(m.log_likelihood(c, i), std::log(0.25), 1e-15);
    }
}

TEST(NaiveBayes, Guards) {
    std::vector<LabeledVector> d{ex({1}, ClassLabel::malware), ex({1}, ClassLabel::benign)};
    EXPECT_THROW(NaiveBayesModel::train(d, 0.0), InvalidAlpha);
    EXPECT_THROW(NaiveBayesModel::train(d, -1.0), InvalidAlpha);
    std::vector<LabeledVector> one{ex({1}, ClassLabel::malware), ex({2}, ClassLabel::malware)};
    EXPECT_THROW(NaiveBayesModel::train(one, 1.0), DegenerateCorpus);
    std::vector<LabeledVector> ragged{ex({1}, ClassLabel::malware), ex({2, 3}, ClassLabel::benign)};
    EXPECT_THROW(NaiveBayesModel::train(ragged, 1.0), WidthMismatch);
    auto m = NaiveBayesModel::train(d, 1.0);
    const std::vector<double> wide{1, 2};
    EXPECT_THROW(m.predict(wide), WidthMismatch);
}

TEST(NaiveBayes, PriorOnlyDecision) {
    std::vector<LabeledVector> d;
    for (int i = 0; i < 7; ++i) d.push_back(ex({0, 0}, ClassLabel::malware));
    for (int i = 0; i < 3; ++i) d.push_back(ex({0, 0}, ClassLabel::benign));
    auto m = NaiveBayesModel::train(d, 1.0);
    const std::vector<double> zero{0, 0};
    auto p = m.predict(zero);
    EXPECT_EQ(p.label, ClassLabel::malware);
    EXPECT_NEAR(std::exp(p.log_posterior[index_of(ClassLabel::malware)]), 0.7, 1e-12);
}

TEST(NaiveBayes, ExactTieGoesBenign) {
    std::vector<LabeledVector> d{ex({1, 1}, ClassLabel::malware), ex({1, 1}, ClassLabel::benign)};
    auto m = NaiveBayesModel::train(d, 1.0);
    const std::vector<double> v{3, 3};
    auto p = m.predict(v);
    EXPECT_EQ(p.log_joint[0], p.log_joint[1]);
    EXPECT_EQ(p.label, ClassLabel::benign);
}

TEST(NaiveBayes, ScalingKeepsArgmaxWhenOneClassDominates) {
    std::vector<LabeledVector> d{ex({2, 0}, ClassLabel::malware), ex({0, 2}, ClassLabel::benign)};
    auto m = NaiveBayesModel::train(d, 1.0);
    const std::vector<double> v{1, 0}, v2{2, 0}, v5{5, 0};
    EXPECT_EQ(m.predict(v).label, ClassLabel::malware);
    EXPECT_EQ(m.predict(v2).label, ClassLabel::malware);
    EXPECT_EQ(m.predict(v5).label, ClassLabel::malware);
}

TEST(NaiveBayes, MatchesProbabilitySpaceOracle) {
    std::mt19937_64 rng(2024);
    for (int iter = 0; iter < 2000; ++iter) {
        const std::size_t w = 1 + rng() % 5, n = 2 + rng() % 7;
        std::vector<std::vector<int>> docs(n, std::vector<int>(w));
        std::vector<int> labels(n);
        std::vector<LabeledVector> train;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng() % 2);
            std::vector<double> v(w);
            for (std::size_t j = 0; j < w; ++j) v[j] = docs[i][j] = static_cast<int>(rng() % 4);
            train.push_back(ex(v, labels[i] ? ClassLabel::malware : ClassLabel::benign));
        }
        const double alpha = (rng() % 2) ? 1.0 : 0.5;
        auto m = NaiveBayesModel::train(train, alpha);
        expect_normalized(m);
        std::vector<int> x(w);
        std::vector<double> xv(w);
        for (std::size_t j = 0; j < w; ++j) xv[j] = x[j] = static_cast<int>(rng() % 4);
        auto o = oracle::nb_log_posterior(docs, labels, alpha, x);
        auto p = m.predict(xv);
        ASSERT_NEAR(p.log_posterior[0], static_cast<double>(o[0]), 1e-9);
        ASSERT_NEAR(p.log_posterior[1], static_cast<double>(o[1]), 1e-9);
    }
}

TEST(NaiveBayes, JsonRoundTripAndHashGuard) {
    std::vector<LabeledVector> d{ex({2, 0, 1}, ClassLabel::malware), ex({0, 2, 1}, ClassLabel::benign)};
    auto m = NaiveBayesModel::train(d, 0.5, "vocabhash");
    m.set_config_hash("cfg");
    const auto text = m.to_json_text();
    auto back = NaiveBayesModel::from_json_text(text, "vocabhash");
    EXPECT_EQ(back.to_json_text(), text);
    EXPECT_EQ(back.alpha(), 0.5);
    EXPECT_EQ(back.config_hash(), "cfg");
    for (std::size_t i = 0; i < 3; ++i)
        EXPECT_EQ(back.log_likelihood(ClassLabel::malware, i), m.log_likelihood(ClassLabel::malware, i));
    EXPECT_NO_THROW(NaiveBayesModel::from_json_text(text));
    EXPECT_THROW(NaiveBayesModel::from_json_text(text, "otherhash"), ValidationError);
    EXPECT_THROW(NaiveBayesModel::from_json_text("[]"), ValidationError);
}
