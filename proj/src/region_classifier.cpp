#include "uod/region_classifier.hpp"

#include "uod/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uod {
namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

}  // namespace

CentroidClassifier::CentroidClassifier(ClusterModel model, double temperature)
    : model_(std::move(model)), temperature_(temperature) {
    if (!(temperature_ > 0.0)) throw std::invalid_argument("CentroidClassifier: temperature must be positive");
    if (model_.n_classes() == 0) throw std::invalid_argument("CentroidClassifier: model has no foreground centroid");
    for (std::size_t j = 0; j < model_.k_g(); ++j) {
        const double n = std::sqrt(simd::dot(model_.centroid(j), model_.centroid(j)));
        if (!(n > 0.0)) throw std::invalid_argument("CentroidClassifier: zero centroid");
        centroid_norms_.push_back(n);
    }
}

std::vector<double> CentroidClassifier::cosines(std::span<const float> feature) const {
    if (feature.size() != model_.dim) throw std::invalid_argument("classify: feature dimension mismatch");
    const double fn = std::sqrt(simd::dot(feature, feature));
    if (!(fn > 0.0)) throw std::invalid_argument("classify: zero feature vector");
    std::vector<double> cos(model_.k_g());
    for (std::size_t j = 0; j < model_.k_g(); ++j) {
        cos[j] = std::clamp(simd::dot(feature, model_.centroid(j)) / (fn * centroid_norms_[j]), -1.0, 1.0);
    }
    return cos;
}

ClassDecision CentroidClassifier::classify(std::span<const float> feature) const {
    const auto cos = cosines(feature);
    std::vector<double> logits;
    for (std::size_t j = 0; j < model_.k_g(); ++j) {
        if (model_.is_foreground[j]) logits.push_back(cos[j] / temperature_);
    }
    ClassDecision d;
    d.probabilities = softmax(logits);
    const auto best = std::max_element(d.probabilities.begin(), d.probabilities.end());
    d.class_id = static_cast<int>(best - d.probabilities.begin());
    d.confidence = *best;
    return d;
}

FgDecision CentroidClassifier::classify_fg(std::span<const float> feature) const {
    const auto cos = cosines(feature);
    if (model_.n_classes() == model_.k_g()) return {true, 1.0};
    std::vector<double> logits(cos.size());
    for (std::size_t j = 0; j < cos.size(); ++j) logits[j] = cos[j] / temperature_;
    const auto p = softmax(logits);
    double p_fg = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (model_.is_foreground[j]) p_fg += p[j];
    }
    return {p_fg >= 0.5, p_fg};
}

}  // namespace uod
