#include "malhunt/evaluation.hpp"

#include "malhunt/errors.hpp"

#include <json.hpp>

#include <random>

namespace malhunt::eval {

using Json = nlohmann::ordered_json;

Confusion& Confusion::operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

ClassMetrics compute_metrics(const Confusion& c) {
    ClassMetrics m;
    const auto pp = c.tp + c.fp;
    const auto ap = c.tp + c.fn;
    if (pp == 0) {
        m.precision_undefined = true;
    } else {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(pp);
    }
    if (ap == 0) {
        m.recall_undefined = true;
    } else {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(ap);
    }
    if (m.precision + m.recall == 0.0) {
        m.f1_undefined = true;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

Confusion confusion_for(ClassLabel positive, std::span<const ClassLabel> truth, std::span<const ClassLabel> predicted) {
    if (truth.size() != predicted.size()) throw ValidationError("truth and prediction lengths differ");
    Confusion c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool actual = truth[i] == positive;
        const bool guess = predicted[i] == positive;
        if (actual && guess) {
            ++c.tp;
        } else if (!actual && guess) {
            ++c.fp;
        } else if (actual) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

std::vector<std::size_t> stratified_folds(std::span<const ClassLabel> labels, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw TooFewExamples("cross-validation needs at least 2 folds");
    if (labels.size() < folds) {
        throw TooFewExamples("cannot split " + std::to_string(labels.size()) + " examples into " +
                             std::to_string(folds) + " folds");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> assignment(labels.size(), 0);
    std::size_t counter = 0;
    for (auto label : {ClassLabel::malware, ClassLabel::benign}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == label) members.push_back(i);
        }
        // Fisher-Yates with an explicit draw so the order does not depend on
        // the standard library's distribution implementation.
        for (std::size_t i = members.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(members[i - 1], members[j]);
        }
        for (auto idx : members) assignment[idx] = counter++ % folds;
    }
    return assignment;
}

EvalReport cross_validate_with(std::span<const ClassLabel> labels, std::size_t folds, std::uint64_t seed,
                               const FoldClassifier& classify) {
    const auto assignment = stratified_folds(labels, folds, seed);
    EvalReport report;
    report.folds = folds;
    report.seed = seed;
    std::vector<ClassLabel> all_truth, all_pred;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < labels.size(); ++i) (assignment[i] == f ? test : train).push_back(i);
        auto predicted = classify(train, test);
        if (predicted.size() != test.size()) throw ValidationError("fold classifier returned wrong prediction count");
        std::vector<ClassLabel> truth;
        truth.reserve(test.size());
        for (auto i : test) truth.push_back(labels[i]);

        FoldResult fr;
        fr.fold = f;
        fr.test_size = test.size();
        std::size_t correct = 0;
        for (std::size_t i = 0; i < test.size(); ++i) correct += truth[i] == predicted[i] ? 1 : 0;
        fr.accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
        for (auto c : {ClassLabel::benign, ClassLabel::malware}) fr.confusion[index_of(c)] = confusion_for(c, truth, predicted);
        report.per_fold.push_back(fr);
        all_truth.insert(all_truth.end(), truth.begin(), truth.end());
        all_pred.insert(all_pred.end(), predicted.begin(), predicted.end());
    }
    report.evaluated = all_truth.size();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < all_truth.size(); ++i) correct += all_truth[i] == all_pred[i] ? 1 : 0;
    report.accuracy = static_cast<double>(correct) / static_cast<double>(all_truth.size());
    for (auto c : {ClassLabel::benign, ClassLabel::malware}) {
        report.confusion[index_of(c)] = confusion_for(c, all_truth, all_pred);
        report.metrics[index_of(c)] = compute_metrics(report.confusion[index_of(c)]);
    }
    return report;
}

EvalReport cross_validate(std::span<const nb::LabeledVector> examples, std::size_t folds, double alpha,
                          std::uint64_t seed) {
    if (!(alpha > 0.0)) throw InvalidAlpha(alpha);
    std::vector<ClassLabel> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples) labels.push_back(ex.label);
    auto report = cross_validate_with(labels, folds, seed, [&](auto train_idx, auto test_idx) {
        std::vector<nb::LabeledVector> train;
        train.reserve(train_idx.size());
        for (auto i : train_idx) train.push_back(examples[i]);
        auto model = nb::NaiveBayesModel::train(train, alpha);
        std::vector<ClassLabel> out;
        out.reserve(test_idx.size());
        for (auto i : test_idx) out.push_back(model.predict(examples[i].vector.values).label);
        return out;
    });
    report.alpha = alpha;
    return report;
}

namespace {

Json confusion_json(const Confusion& c) { return Json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}; }

Json metrics_json(const ClassMetrics& m) {
    Json j{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    Json undefined = Json::array();
    if (m.precision_undefined) undefined.push_back("precision");
    if (m.recall_undefined) undefined.push_back("recall");
    if (m.f1_undefined) undefined.push_back("f1");
    j["undefined"] = std::move(undefined);
    return j;
}

}  // namespace

std::string EvalReport::to_json_text() const {
    Json doc;
    doc["config_hash"] = config_hash;
    doc["folds"] = folds;
    doc["seed"] = seed;
    doc["alpha"] = alpha;
    doc["evaluated"] = evaluated;
    doc["accuracy"] = accuracy;
    Json classes = Json::object();
    for (auto c : {ClassLabel::malware, ClassLabel::benign}) {
        classes[std::string(to_string(c))] =
            Json{{"confusion", confusion_json(confusion[index_of(c)])}, {"metrics", metrics_json(metrics[index_of(c)])}};
    }
    doc["classes"] = std::move(classes);
    Json folds_json = Json::array();
    for (const auto& f : per_fold) {
        folds_json.push_back(Json{{"fold", f.fold},
                                  {"test_size", f.test_size},
                                  {"accuracy", f.accuracy},
                                  {"malware", confusion_json(f.confusion[index_of(ClassLabel::malware)])},
                                  {"benign", confusion_json(f.confusion[index_of(ClassLabel::benign)])}});
    }
    doc["per_fold"] = std::move(folds_json);
    return doc.dump(2) + "\n";
}

}  // namespace malhunt::eval
