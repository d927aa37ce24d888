#include "malhunt/errors.hpp"
#include "malhunt/featurize.hpp"
#include "malhunt/fixtures.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace malhunt;
using namespace malhunt::features;

namespace {

LabeledTokens doc(std::string name, ClassLabel label, std::vector<std::string> description,
                  std::vector<std::string> title = {}) {
    LabeledTokens d;
    d.name = std::move(name);
    d.label = label;
    d.tokens[FieldKind::description].tokens = std::move(description);
    d.tokens[FieldKind::title].tokens = std::move(title);
    return d;
}

std::vector<LabeledTokens> fixture_tokens(const fixtures::LabeledCorpus& corpus) {
    textprep::Preprocessor p;
    std::vector<LabeledTokens> out;
    for (const auto& r : corpus.repositories) out.push_back({r.record.full_name, p.preprocess(r.record), r.label});
    return out;
}

}  // namespace

TEST(ChiSquare, ContingencyExamples) {
    EXPECT_DOUBLE_EQ(chi_square(Contingency{5, 5, 5, 5}), 0.0);
    EXPECT_DOUBLE_EQ(chi_square(Contingency{5, 0, 0, 5}), 10.0);
    EXPECT_DOUBLE_EQ(chi_square(Contingency{0, 0, 5, 5}), 0.0);
    EXPECT_DOUBLE_EQ(chi_square(Contingency{0, 0, 0, 0}), 0.0);
}

TEST(ChiSquare, WordAbsentEverywhereScoresZero) {
    std::vector<LabeledTokens> docs{doc("a/1", ClassLabel::malware, {"rat"}), doc("a/2", ClassLabel::benign, {"tool"})};
    EXPECT_EQ(chi_square("zzz", FieldKind::description, docs), 0.0);
    EXPECT_DOUBLE_EQ(chi_square("rat", FieldKind::description, docs), 2.0);
    // Presence in another field does not count.
    EXPECT_EQ(chi_square("rat", FieldKind::title, docs), 0.0);
}

TEST(ChiSquare, DegenerateCorpus) {
    std::vector<LabeledTokens> docs{doc("a/1", ClassLabel::malware, {"rat"})};
    EXPECT_THROW(chi_square("rat", FieldKind::description, docs), DegenerateCorpus);
    EXPECT_THROW(chi_square("rat", FieldKind::description, std::span<const LabeledTokens>{}), DegenerateCorpus);
    EXPECT_THROW(select_vocabulary(docs, default_budgets(), WeightingMode::count), DegenerateCorpus);
}

TEST(ChiSquare, MatchesExpectedCountOracle) {
    std::mt19937_64 rng(99);
    const std::vector<std::string> vocab{"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9"};
    for (int iter = 0; iter < 300; ++iter) {
        const std::size_t n = 2 + rng() % 19;
        std::vector<LabeledTokens> docs;
        std::vector<oracle::Doc> odocs;
        for (std::size_t i = 0; i < n; ++i) {
            const bool mal = i == 0 ? true : i == 1 ? false : rng() % 2;
            std::vector<std::string> words;
            oracle::Doc od;
            od.malware = mal;
            for (const auto& w : vocab) {
                if (rng() % 3 == 0) {
                    words.push_back(w);
                    if (rng() % 2) words.push_back(w);  // repeats must not matter
                    od.words.insert(w);
                }
            }
            docs.push_back(doc("o/" + std::to_string(i), mal ? ClassLabel::malware : ClassLabel::benign, words));
            odocs.push_back(od);
        }
        for (const auto& w : vocab) {
            EXPECT_NEAR(chi_square(w, FieldKind::description, docs), oracle::chi_square_expected_counts(odocs, w), 1e-9);
        }
    }
}

// Adding a malware-only document containing w, with B and D fixed, never lowers the score.
TEST(ChiSquare, MonotoneInMalwareDocsContainingWord) {
    for (std::uint64_t a = 0; a <= 8; ++a) {
        for (std::uint64_t b = 0; b <= 8; ++b) {
            for (std::uint64_t c = 0; c <= 8; ++c) {
                for (std::uint64_t d = 0; d <= 8; ++d) {
                    const Contingency before{a, b, c, d};
                    const Contingency after{a + 1, b, c, d};
                    if (a * d < b * c) continue;  // w must not lean benign
                    EXPECT_GE(chi_square(after) + 1e-12, chi_square(before)) << a << b << c << d;
                }
            }
        }
    }
}

TEST(SelectVocabulary, DefaultBudgetsTotal550) {
    auto b = default_budgets();
    ASSERT_EQ(b.size(), 5u);
    std::size_t total = 0;
    for (const auto& fb : b) total += fb.k;
    EXPECT_EQ(total, 550u);
    EXPECT_EQ(b[0], (FieldBudget{FieldKind::title, 30}));
    EXPECT_EQ(b[2], (FieldBudget{FieldKind::description, 400}));
}

TEST(SelectVocabulary, BudgetUnderflowKeepsAll) {
    std::vector<LabeledTokens> docs{doc("a/1", ClassLabel::malware, {"rat", "spy"}),
                                    doc("a/2", ClassLabel::benign, {"tool", "game"})};
    std::vector<FieldBudget> budgets{{FieldKind::title, 1},
                                     {FieldKind::topics, 1},
                                     {FieldKind::description, 10},
                                     {FieldKind::file_names, 1},
                                     {FieldKind::readme, 1}};
    auto v = select_vocabulary(docs, budgets, WeightingMode::count);
    EXPECT_EQ(v.field(FieldKind::description).words.size(), 4u);
    EXPECT_EQ(v.width(), 14u);
    EXPECT_EQ(v.selected_count(), 4u);
}

TEST(SelectVocabulary, TieGoesToLexicographicallySmaller) {
    // "beta" and "alpha" have identical tables; only one slot is free.
    std::vector<LabeledTokens> docs{doc("a/1", ClassLabel::malware, {"beta", "alpha"}),
                                    doc("a/2", ClassLabel::benign, {"zeta"}),
                                    doc("a/3", ClassLabel::benign, {"zeta"})};
    std::vector<FieldBudget> budgets{{FieldKind::title, 0},
                                     {FieldKind::topics, 0},
                                     {FieldKind::description, 2},
                                     {FieldKind::file_names, 0},
                                     {FieldKind::readme, 0}};
    auto v = select_vocabulary(docs, budgets, WeightingMode::count);
    const auto& w = v.field(FieldKind::description).words;
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w[0].word, "alpha");
    EXPECT_EQ(w[1].word, "beta");
    EXPECT_DOUBLE_EQ(w[0].score, w[1].score);
}

TEST(SelectVocabulary, RejectsBadBudgets) {
    std::vector<LabeledTokens> docs{doc("a/1", ClassLabel::malware, {"rat"}), doc("a/2", ClassLabel::benign, {"tool"})};
    auto b = default_budgets();
    b.pop_back();
    EXPECT_THROW(select_vocabulary(docs, b, WeightingMode::count), ValidationError);
    b = default_budgets();
    b[1].kind = FieldKind::title;
    EXPECT_THROW(select_vocabulary(docs, b, WeightingMode::count), ValidationError);
}

// A training set with 9253 distinct words, spread so that every field has
// more candidates than its budget, selects exactly 550.
TEST(SelectVocabulary, NineThousandWordCorpusSelects550) {
    const std::array<std::size_t, 5> per_field{300, 150, 6000, 2500, 303};  // sum 9253
    std::vector<LabeledTokens> docs;
    for (int i = 0; i < 40; ++i) {
        LabeledTokens d;
        d.name = "o/r" + std::to_string(i);
        d.label = i % 2 ? ClassLabel::malware : ClassLabel::benign;
        docs.push_back(d);
    }
    std::set<std::string> distinct;
    for (std::size_t f = 0; f < 5; ++f) {
        for (std::size_t w = 0; w < per_field[f]; ++w) {
            std::string word = "f" + std::to_string(f) + "w" + std::to_string(w);
            distinct.insert(word);
            docs[(w * 7 + f) % docs.size()].tokens.fields[f].tokens.push_back(word);
            docs[(w * 13 + 3) % docs.size()].tokens.fields[f].tokens.push_back(word);
        }
    }
    ASSERT_EQ(distinct.size(), 9253u);
    auto v = select_vocabulary(docs, default_budgets(), WeightingMode::count);
    EXPECT_EQ(v.selected_count(), 550u);
    EXPECT_EQ(v.width(), 550u);
    for (auto k : kAllFields) {
        const auto& words = v.field(k).words;
        std::set<std::string> unique;
        for (std::size_t i = 0; i < words.size(); ++i) {
            unique.insert(words[i].word);
            if (i > 0) {
                ASSERT_TRUE(words[i - 1].score > words[i].score ||
                            (words[i - 1].score == words[i].score && words[i - 1].word < words[i].word));
            }
        }
        EXPECT_EQ(unique.size(), words.size());
    }
}

TEST(Vectorize, LayoutAndModes) {
    std::vector<LabeledTokens> docs{doc("a/1", ClassLabel::malware, {"rat", "spy"}, {"keylogg"}),
                                    doc("a/2", ClassLabel::benign, {"tool", "rat"}, {"game"}),
                                    doc("a/3", ClassLabel::benign, {"tool"}, {"game"})};
    auto v = select_vocabulary(docs, default_budgets(), WeightingMode::count);
    ASSERT_EQ(v.width(), 550u);
    EXPECT_EQ(v.offset(FieldKind::title), 0u);
    EXPECT_EQ(v.offset(FieldKind::topics), 30u);
    EXPECT_EQ(v.offset(FieldKind::description), 40u);
    EXPECT_EQ(v.offset(FieldKind::file_names), 440u);
    EXPECT_EQ(v.offset(FieldKind::readme), 540u);

    textprep::RepositoryTokens r;
    r[FieldKind::title].tokens = {"keylogg", "keylogg", "unknown"};
    r[FieldKind::description].tokens = {"rat"};
    auto fv = vectorize(r, v, "x/y");
    ASSERT_EQ(fv.values.size(), 550u);
    EXPECT_EQ(fv.repo_name, "x/y");
    const auto ks = *v.slot(FieldKind::title, "keylogg");
    EXPECT_EQ(fv.values[ks], 2.0);
    EXPECT_FALSE(v.slot(FieldKind::title, "unknown"));
    EXPECT_FALSE(v.slot(FieldKind::title, "rat"));  // only selected in description
    EXPECT_EQ(fv.values[*v.slot(FieldKind::description, "rat")], 1.0);
    EXPECT_EQ(vectorize(r, v, "x/y"), fv);

    auto vp = select_vocabulary(docs, default_budgets(), WeightingMode::presence);
    EXPECT_EQ(vectorize(r, vp).values[ks], 1.0);

    auto vt = select_vocabulary(docs, default_budgets(), WeightingMode::tfidf);
    EXPECT_NEAR(vectorize(r, vt).values[ks], 2.0 * std::log(3.0 / 1.0), 1e-12);
    // "rat" appears in 2 of 3 training descriptions.
    EXPECT_NEAR(vectorize(r, vt).values[*vt.slot(FieldKind::description, "rat")],
                std::log(3.0 / 2.0), 1e-12);
}

TEST(Vectorize, EmptyRepositoryIsZeroVector) {
    std::vector<LabeledTokens> docs{doc("a/1", ClassLabel::malware, {"rat"}), doc("a/2", ClassLabel::benign, {"tool"})};
    auto v = select_vocabulary(docs, default_budgets(), WeightingMode::count);
    auto fv = vectorize(textprep::RepositoryTokens{}, v);
    ASSERT_EQ(fv.values.size(), 550u);
    for (double x : fv.values) EXPECT_EQ(x, 0.0);
}

TEST(Vocabulary, JsonRoundTripIsByteStable) {
    auto corpus = fixtures::make_labeled_corpus(20, 5);
    auto docs = fixture_tokens(corpus);
    auto v = select_vocabulary(docs, default_budgets(), WeightingMode::tfidf);
    const auto text = v.to_json_text();
    auto back = Vocabulary::from_json_text(text);
    EXPECT_EQ(back, v);
    EXPECT_EQ(back.to_json_text(), text);
    EXPECT_EQ(back.hash(), v.hash());
    EXPECT_THROW(Vocabulary::from_json_text("{\"nope\":1}"), ValidationError);
}

TEST(Vectorize, WidthInvariantOnFixture) {
    auto corpus = fixtures::make_labeled_corpus(30);
    auto docs = fixture_tokens(corpus);
    for (auto mode : {WeightingMode::presence, WeightingMode::count, WeightingMode::tfidf}) {
        auto v = select_vocabulary(docs, default_budgets(), mode);
        EXPECT_EQ(v.width(), 550u);
        for (const auto& d : docs) {
            auto fv = vectorize(d.tokens, v);
            ASSERT_EQ(fv.values.size(), 550u);
            for (double x : fv.values) ASSERT_GE(x, 0.0);
        }
    }
}

TEST(WeightingMode, Strings) {
    for (auto m : {WeightingMode::presence, WeightingMode::count, WeightingMode::tfidf})
        EXPECT_EQ(parse_weighting_mode(to_string(m)), m);
    EXPECT_FALSE(parse_weighting_mode("embedding"));
}
