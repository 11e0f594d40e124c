#pragma once

#include <span>
#include <string>
#include <vector>

#include "tcg/features.hpp"
#include "tcg/graph.hpp"

namespace tcg {

/// Per-feature mean and population sigma of normalized benign vectors.
struct BaselineModel {
    std::vector<double> mean;
    std::vector<double> stddev;
    bool operator==(const BaselineModel&) const = default;
};

/// Throws InsufficientData for fewer than 10 vectors.
BaselineModel fit_baseline(std::span<const FeatureVector> benign);

/// RMS z-distance sqrt(mean_i ((x_i - mu_i) / sigma_i)^2). Throws DimensionMismatch.
double anomaly_score(const BaselineModel& model, std::span<const double> x);

/// Smallest validation score q with (#scores >= q) / n <= target_fpr. With
/// target_fpr = 0 this is the next double above the largest score.
/// Throws InsufficientData for fewer than 20 scores.
double calibrate_threshold(std::span<const double> benign_scores, double target_fpr = 0.05);
double calibrate_threshold(const BaselineModel& model, std::span<const FeatureVector> benign_validation,
                           double target_fpr = 0.05);

struct TrainingHyper {
    double learning_rate = 0.1;
    int epochs = 500;
    double l2 = 1e-4;
    bool operator==(const TrainingHyper&) const = default;
};

struct LinearClassifier {
    std::vector<double> weights;
    double bias = 0.0;
    TrainingHyper hyper;
    bool operator==(const LinearClassifier&) const = default;
};

/// Row-major design matrix view: `rows` vectors of equal length.
using DesignMatrix = std::span<const std::vector<double>>;

/// Mean logistic loss plus (l2 / 2) ||w||^2; the bias is not regularized.
double logistic_loss(std::span<const double> weights, double bias, DesignMatrix x,
                     std::span<const int> y, double l2);

/// Analytic gradient of logistic_loss; returns d/dw followed by d/db.
std::vector<double> logistic_gradient(std::span<const double> weights, double bias, DesignMatrix x,
                                      std::span<const int> y, double l2);

struct TrainingReport {
    std::vector<double> loss_history;  // loss before each epoch, then the final loss
};

/// Full-batch gradient descent from zero weights. Labels are 0 (benign) / 1.
/// Throws DegenerateLabels and InsufficientData.
LinearClassifier train_classifier(DesignMatrix x, std::span<const int> y, const TrainingHyper& hyper = {},
                                  TrainingReport* report = nullptr);
LinearClassifier train_classifier(std::span<const FeatureVector> x, std::span<const int> y,
                                  const TrainingHyper& hyper = {}, TrainingReport* report = nullptr);

/// Numerically stable logistic of w.x + b, clamped into the open interval (0, 1).
double predict(const LinearClassifier& model, std::span<const double> x);

double logistic(double z);

enum class Severity : std::uint8_t { Low, High };
std::string_view to_string(Severity severity);

struct Verdict {
    double window_start = 0.0;
    double window_end = 0.0;
    double anomaly_score = 0.0;
    double prob = 0.0;
    std::vector<std::string> signature_hits;
    Label label = Label::Benign;
    Severity severity = Severity::Low;
    bool operator==(const Verdict&) const = default;
};

struct DecisionInputs {
    const BaselineModel& baseline;
    double threshold;
    const LinearClassifier& classifier;
    double p_thresh = 0.5;
};

/// Disjunctive fusion: ransomware iff prob >= p_thresh or score >= threshold.
/// Signature hits only raise the severity of a positive verdict.
Verdict decide(std::span<const double> x, const DecisionInputs& inputs,
               std::vector<std::string> signature_hits, double window_start = 0.0,
               double window_end = 0.0);

// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

/// Everything `detect` needs, persisted as one document.
struct DetectionModel {
    GraphParams graph;
    FeatureOptions features;
    Normalizer normalizer;
    BaselineModel baseline;
    double threshold = 0.0;
    double p_thresh = 0.5;
    LinearClassifier classifier;
    TransitionModel transitions;

    bool operator==(const DetectionModel& o) const {
        return graph == o.graph && features.entropy_threshold == o.features.entropy_threshold &&
               normalizer == o.normalizer && baseline == o.baseline && threshold == o.threshold &&
               p_thresh == o.p_thresh && classifier == o.classifier && transitions == o.transitions;
    }
};

std::string serialize_model(const DetectionModel& model);
/// Throws IncompatibleModel (version or layout mismatch) or MalformedDocument.
DetectionModel parse_model(const std::string& text);
void save_model(const std::string& path, const DetectionModel& model);
DetectionModel load_model(const std::string& path);

}  // namespace tcg
