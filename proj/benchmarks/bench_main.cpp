#include "malhunt/featurize.hpp"
#include "malhunt/fixtures.hpp"
#include "malhunt/naive_bayes.hpp"
#include "malhunt/textprep.hpp"

#include <benchmark/benchmark.h>

using namespace malhunt;

namespace {

const fixtures::LabeledCorpus& fixture() {
    static const auto c = fixtures::make_labeled_corpus();
    return c;
}

const std::vector<features::LabeledTokens>& tokens() {
    static const auto t = [] {
        textprep::Preprocessor prep;
        std::vector<features::LabeledTokens> out;
        for (const auto& r : fixture().repositories) out.push_back({r.record.full_name, prep.preprocess(r.record), r.label});
        return out;
    }();
    return t;
}

const features::Vocabulary& vocabulary() {
    static const auto v =
        features::select_vocabulary(tokens(), features::default_budgets(), features::WeightingMode::count);
    return v;
}

std::vector<nb::LabeledVector> vectors() {
    std::vector<nb::LabeledVector> out;
    for (const auto& t : tokens()) out.push_back({features::vectorize(t.tokens, vocabulary(), t.name), t.label});
    return out;
}

}  // namespace

static void BM_Preprocess(benchmark::State& state) {
    textprep::Preprocessor prep;
    const auto& repos = fixture().repositories;
    for (auto _ : state) {
        for (const auto& r : repos) benchmark::DoNotOptimize(prep.preprocess(r.record));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(repos.size()));
}
BENCHMARK(BM_Preprocess);

static void BM_ChiSquareTable(benchmark::State& state) {
    features::Contingency t{37, 4, 23, 56};
    for (auto _ : state) {
        benchmark::DoNotOptimize(t);
        benchmark::DoNotOptimize(features::chi_square(t));
    }
}
BENCHMARK(BM_ChiSquareTable);

static void BM_SelectVocabulary(benchmark::State& state) {
    const auto& data = tokens();
    const auto budgets = features::default_budgets();
    for (auto _ : state) {
        benchmark::DoNotOptimize(features::select_vocabulary(data, budgets, features::WeightingMode::count));
    }
}
BENCHMARK(BM_SelectVocabulary)->Unit(benchmark::kMillisecond);

static void BM_Vectorize(benchmark::State& state) {
    const auto& data = tokens();
    const auto& vocab = vocabulary();
    for (auto _ : state) {
        for (const auto& d : data) benchmark::DoNotOptimize(features::vectorize(d.tokens, vocab));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_Vectorize);

static void BM_NaiveBayesTrain(benchmark::State& state) {
    const auto train = vectors();
    for (auto _ : state) benchmark::DoNotOptimize(nb::NaiveBayesModel::train(train, 1.0));
}
BENCHMARK(BM_NaiveBayesTrain);

static void BM_NaiveBayesPredict(benchmark::State& state) {
    const auto train = vectors();
    const auto model = nb::NaiveBayesModel::train(train, 1.0);
    for (auto _ : state) {
        for (const auto& v : train) benchmark::DoNotOptimize(model.predict(v.vector.values));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(train.size()));
}
BENCHMARK(BM_NaiveBayesPredict);

BENCHMARK_MAIN();
