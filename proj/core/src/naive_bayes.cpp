#include "malhunt/naive_bayes.hpp"

#include "malhunt/errors.hpp"

#include <json.hpp>

#include <cmath>

namespace malhunt::nb {

using Json = nlohmann::ordered_json;

NaiveBayesModel NaiveBayesModel::train(std::span<const LabeledVector> examples, double alpha,
                                       std::string vocabulary_hash) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidAlpha(alpha);
    if (examples.empty()) throw DegenerateCorpus("no training examples");
    const std::size_t width = examples.front().vector.values.size();

    std::array<std::size_t, kNumClasses> docs{};
    std::array<std::vector<double>, kNumClasses> counts;
    for (auto& c : counts) c.assign(width, 0.0);
    for (const auto& ex : examples) {
        if (ex.vector.values.size() != width) throw WidthMismatch(width, ex.vector.values.size());
        const auto c = index_of(ex.label);
        ++docs[c];
        for (std::size_t i = 0; i < width; ++i) {
            const double v = ex.vector.values[i];
            if (v < 0.0 || !std::isfinite(v)) throw ValidationError("feature values must be finite and >= 0");
            counts[c][i] += v;
        }
    }
    if (docs[0] == 0 || docs[1] == 0) {
        throw DegenerateCorpus("training data must contain both malware and benign examples");
    }

    NaiveBayesModel model;
    model.alpha_ = alpha;
    model.vocabulary_hash_ = std::move(vocabulary_hash);
    const double n = static_cast<double>(examples.size());
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        model.log_prior_[c] = std::log(static_cast<double>(docs[c]) / n);
        double total = 0.0;
        for (double v : counts[c]) total += v;
        const double denom = std::log(total + alpha * static_cast<double>(width));
        auto& ll = model.log_likelihood_[c];
        ll.resize(width);
        for (std::size_t i = 0; i < width; ++i) ll[i] = std::log(counts[c][i] + alpha) - denom;
    }
    return model;
}

Prediction NaiveBayesModel::predict(std::span<const double> vector) const {
    if (vector.size() != width()) throw WidthMismatch(width(), vector.size());
    Prediction p;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        double score = log_prior_[c];
        const auto& ll = log_likelihood_[c];
        for (std::size_t i = 0; i < vector.size(); ++i) {
            if (vector[i] != 0.0) score += vector[i] * ll[i];
        }
        p.log_joint[c] = score;
    }
    const auto mal = index_of(ClassLabel::malware);
    const auto ben = index_of(ClassLabel::benign);
    p.label = p.log_joint[mal] > p.log_joint[ben] ? ClassLabel::malware : ClassLabel::benign;

    const double hi = std::max(p.log_joint[0], p.log_joint[1]);
    const double lse = hi + std::log(std::exp(p.log_joint[0] - hi) + std::exp(p.log_joint[1] - hi));
    for (std::size_t c = 0; c < kNumClasses; ++c) p.log_posterior[c] = p.log_joint[c] - lse;
    return p;
}

std::string NaiveBayesModel::to_json_text() const {
    Json doc;
    doc["model"] = "multinomial_naive_bayes";
    doc["alpha"] = alpha_;
    doc["width"] = width();
    doc["vocabulary_hash"] = vocabulary_hash_;
    doc["config_hash"] = config_hash_;
    Json classes = Json::array();
    for (auto label : {ClassLabel::benign, ClassLabel::malware}) {
        const auto c = index_of(label);
        classes.push_back(Json{{"class", std::string(to_string(label))},
                               {"log_prior", log_prior_[c]},
                               {"log_likelihood", log_likelihood_[c]}});
    }
    doc["classes"] = std::move(classes);
    return doc.dump(1) + "\n";
}

NaiveBayesModel NaiveBayesModel::from_json_text(std::string_view text, std::string_view expected_vocabulary_hash) {
    NaiveBayesModel model;
    try {
        auto doc = Json::parse(text);
        model.alpha_ = doc.at("alpha").get<double>();
        model.vocabulary_hash_ = doc.at("vocabulary_hash").get<std::string>();
        model.config_hash_ = doc.value("config_hash", std::string{});
        const auto width = doc.at("width").get<std::size_t>();
        std::array<bool, kNumClasses> seen{};
        for (const auto& jc : doc.at("classes")) {
            auto label = parse_class_label(jc.at("class").get<std::string>());
            if (!label) throw ValidationError("model: unknown class");
            const auto c = index_of(*label);
            seen[c] = true;
            model.log_prior_[c] = jc.at("log_prior").get<double>();
            model.log_likelihood_[c] = jc.at("log_likelihood").get<std::vector<double>>();
            if (model.log_likelihood_[c].size() != width) throw ValidationError("model: likelihood row width mismatch");
        }
        if (!seen[0] || !seen[1]) throw ValidationError("model: both classes required");
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model: malformed JSON: ") + e.what());
    }
    if (!(model.alpha_ > 0.0)) throw InvalidAlpha(model.alpha_);
    if (!expected_vocabulary_hash.empty() && expected_vocabulary_hash != model.vocabulary_hash_) {
        throw ValidationError("model was trained on vocabulary " + model.vocabulary_hash_ + " but vocabulary " +
                              std::string(expected_vocabulary_hash) + " was supplied");
    }
    return model;
}

}  // namespace malhunt::nb
