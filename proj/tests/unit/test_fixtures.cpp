#include "malhunt/corpus.hpp"
#include "malhunt/errors.hpp"
#include "malhunt/fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace malhunt;
using namespace malhunt::fixtures;

TEST(Fixtures, DeterministicPerSeed) {
    auto a = make_labeled_corpus(20, 11), b = make_labeled_corpus(20, 11), c = make_labeled_corpus(20, 12);
    EXPECT_EQ(a.snapshot().serialize_records(), b.snapshot().serialize_records());
    EXPECT_EQ(a.snapshot().serialize_labels(), b.snapshot().serialize_labels());
    EXPECT_NE(a.snapshot().serialize_records(), c.snapshot().serialize_records());
}

TEST(Fixtures, BalancedAndValid) {
    auto corpus = make_labeled_corpus();
    ASSERT_EQ(corpus.repositories.size(), 120u);
    std::size_t mal = 0, source_heavy_mal = 0, source_heavy_ben = 0;
    for (const auto& r : corpus.repositories) {
        EXPECT_NO_THROW(validate(r.record));
        mal += r.label == ClassLabel::malware;
        if (r.source_heavy) (r.label == ClassLabel::malware ? source_heavy_mal : source_heavy_ben)++;
    }
    EXPECT_EQ(mal, 60u);
    EXPECT_GT(source_heavy_mal, 0u);
    EXPECT_LT(source_heavy_mal, 60u);  // some malware is mostly documentation
    auto labels = corpus.labels();
    ASSERT_EQ(labels.size(), 120u);
    for (const auto& l : labels) EXPECT_EQ(l.ballots.size(), 3u);
    EXPECT_EQ(corpus.snapshot().labels().size(), 120u);
}

TEST(Fixtures, DistributionsAreNormalizedAndClassDependent) {
    auto corpus = make_labeled_corpus(10);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        for (std::size_t f = 0; f < 5; ++f) {
            const auto& d = corpus.model.fields[c][f];
            double total = 0;
            for (const auto& w : d.words) total += d.probability(w);
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
    const auto& mal_desc = corpus.model.fields[index_of(ClassLabel::malware)][2];
    const auto& ben_desc = corpus.model.fields[index_of(ClassLabel::benign)][2];
    EXPECT_NE(mal_desc.weights, ben_desc.weights);
    EXPECT_EQ(mal_desc.probability("no-such-word"), 0.0);
}

// The exact Bayes classifier under the true generating model separates the
// default fixture almost perfectly, so a learned classifier has headroom.
TEST(Fixtures, SeparableUnderGeneratingModel) {
    auto corpus = make_labeled_corpus();
    std::size_t correct = 0;
    for (const auto& r : corpus.repositories) correct += bayes_classify(corpus.model, r) == r.label;
    EXPECT_GE(correct, 118u);
}

TEST(Fixtures, MockArchivePopulation) {
    harvest::MockArchive archive;
    auto tiers = harvest::KeywordTiers::builtin();
    populate_mock_archive(archive, tiers, 30);
    EXPECT_EQ(archive.names().size(), 32u);
    EXPECT_THROW(archive.repository("ghost/deleted-malware"), GoneError);
    EXPECT_FALSE(archive.all_matches("malware", harvest::RankOrder::best_match).empty());
}
