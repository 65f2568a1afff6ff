#pragma once
// Region classification against the discovered clusters. The centroid
// backend scores a feature by cosine-softmax over the cluster centroids.

#include "uod/semantic_clustering.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace uod {

struct ClassDecision {
    int class_id = 0;
    double confidence = 0.0;
    std::vector<double> probabilities;  // per discovered class
};

struct FgDecision {
    bool is_fg = true;
    double p_fg = 1.0;
};

class ClassifierBackend {
public:
    virtual ~ClassifierBackend() = default;
    virtual ClassDecision classify(std::span<const float> feature) const = 0;
    virtual FgDecision classify_fg(std::span<const float> feature) const = 0;
};

// Softmax of cosine similarities scaled by 1/temperature.
class CentroidClassifier final : public ClassifierBackend {
public:
    // Throws std::invalid_argument if the model has no foreground centroid
    // or temperature <= 0.
    CentroidClassifier(ClusterModel model, double temperature = 0.07);

    ClassDecision classify(std::span<const float> feature) const override;
    FgDecision classify_fg(std::span<const float> feature) const override;

    const ClusterModel& model() const noexcept { return model_; }
    double temperature() const noexcept { return temperature_; }

private:
    std::vector<double> cosines(std::span<const float> feature) const;

    ClusterModel model_;
    double temperature_;
    std::vector<double> centroid_norms_;
};

}  // namespace uod
