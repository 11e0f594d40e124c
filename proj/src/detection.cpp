#include "tcg/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json_util.hpp"
#include "tcg/errors.hpp"

namespace tcg {

namespace {

std::vector<double> column_mean(std::span<const FeatureVector> vs) {
    std::vector<double> mean(kFeatureCount, 0.0);
    for (const auto& v : vs) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) mean[i] += v[i];
    }
    for (auto& m : mean) m /= static_cast<double>(vs.size());
    return mean;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void check_design(DesignMatrix x, std::span<const int> y, std::size_t dim) {
    if (x.size() != y.size()) throw DimensionMismatch("design matrix and labels differ in length");
    for (const auto& row : x) {
        if (row.size() != dim) throw DimensionMismatch("ragged design matrix");
    }
}

}  // namespace

BaselineModel fit_baseline(std::span<const FeatureVector> benign) {
    if (benign.size() < 10) throw InsufficientData("baseline needs at least 10 benign vectors");
    BaselineModel model;
    model.mean = column_mean(benign);
    model.stddev.assign(kFeatureCount, 0.0);
    for (const auto& v : benign) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            const double d = v[i] - model.mean[i];
            model.stddev[i] += d * d;
        }
    }
    for (auto& s : model.stddev) {
        s = std::max(std::sqrt(s / static_cast<double>(benign.size())), kSigmaFloor);
    }
    return model;
}

double anomaly_score(const BaselineModel& model, std::span<const double> x) {
    const std::size_t d = model.mean.size();
    if (d == 0 || x.size() != d || model.stddev.size() != d) {
        throw DimensionMismatch("vector dimension " + std::to_string(x.size()) +
                                " does not match baseline dimension " + std::to_string(d));
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double z = (x[i] - model.mean[i]) / std::max(model.stddev[i], kSigmaFloor);
        ss += z * z;
    }
    return std::sqrt(ss / static_cast<double>(d));
}

double calibrate_threshold(std::span<const double> benign_scores, double target_fpr) {
    if (benign_scores.size() < 20) throw InsufficientData("calibration needs at least 20 scores");
    if (!(target_fpr >= 0.0 && target_fpr <= 1.0)) throw InvalidParams("target_fpr must be in [0, 1]");
    std::vector<double> s(benign_scores.begin(), benign_scores.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    const double allowed = target_fpr * static_cast<double>(n) + 1e-9;
    if (target_fpr > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0 && s[i] == s[i - 1]) continue;  // ties count with their first occurrence
            if (static_cast<double>(n - i) <= allowed) return s[i];
        }
    }
    return std::nextafter(s.back(), std::numeric_limits<double>::infinity());
}

double calibrate_threshold(const BaselineModel& model, std::span<const FeatureVector> benign_validation,
                           double target_fpr) {
    std::vector<double> scores;
    scores.reserve(benign_validation.size());
    for (const auto& v : benign_validation) scores.push_back(anomaly_score(model, v));
    return calibrate_threshold(scores, target_fpr);
}

// ---------------------------------------------------------------------------

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double logistic_loss(std::span<const double> weights, double bias, DesignMatrix x,
                     std::span<const int> y, double l2) {
    check_design(x, y, weights.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = dot(weights, x[i]) + bias;
        loss += softplus(z) - static_cast<double>(y[i]) * z;
    }
    loss /= static_cast<double>(x.size());
    return loss + 0.5 * l2 * dot(weights, weights);
}

std::vector<double> logistic_gradient(std::span<const double> weights, double bias, DesignMatrix x,
                                      std::span<const int> y, double l2) {
    check_design(x, y, weights.size());
    const std::size_t d = weights.size();
    std::vector<double> grad(d + 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = logistic(dot(weights, x[i]) + bias) - static_cast<double>(y[i]);
        for (std::size_t j = 0; j < d; ++j) grad[j] += r * x[i][j];
        grad[d] += r;
    }
    const double n = static_cast<double>(x.size());
    for (std::size_t j = 0; j < d; ++j) grad[j] = grad[j] / n + l2 * weights[j];
    grad[d] /= n;
    return grad;
}

LinearClassifier train_classifier(DesignMatrix x, std::span<const int> y, const TrainingHyper& hyper,
                                  TrainingReport* report) {
    if (x.size() < 2 || x.size() != y.size()) {
        throw InsufficientData("classifier needs at least 2 labeled vectors");
    }
    const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
    const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
    if (!has_pos || !has_neg) throw DegenerateLabels("training labels contain a single class");
    for (int label : y) {
        if (label != 0 && label != 1) throw InvalidParams("labels must be 0 or 1");
    }

    LinearClassifier model;
    model.hyper = hyper;
    model.weights.assign(x.front().size(), 0.0);
    if (report) report->loss_history.clear();
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        if (report) report->loss_history.push_back(logistic_loss(model.weights, model.bias, x, y, hyper.l2));
        const auto grad = logistic_gradient(model.weights, model.bias, x, y, hyper.l2);
        for (std::size_t j = 0; j < model.weights.size(); ++j) {
            model.weights[j] -= hyper.learning_rate * grad[j];
        }
        model.bias -= hyper.learning_rate * grad.back();
    }
    if (report) report->loss_history.push_back(logistic_loss(model.weights, model.bias, x, y, hyper.l2));
    return model;
}

LinearClassifier train_classifier(std::span<const FeatureVector> x, std::span<const int> y,
                                  const TrainingHyper& hyper, TrainingReport* report) {
    std::vector<std::vector<double>> rows;
    rows.reserve(x.size());
    for (const auto& v : x) rows.emplace_back(v.begin(), v.end());
    return train_classifier(DesignMatrix(rows), y, hyper, report);
}

double predict(const LinearClassifier& model, std::span<const double> x) {
    if (x.size() != model.weights.size() || model.weights.empty()) {
        throw DimensionMismatch("vector dimension does not match classifier");
    }
    const double p = logistic(dot(model.weights, x) + model.bias);
    constexpr double kLo = std::numeric_limits<double>::min();
    constexpr double kHi = 1.0 - 0x1.0p-53;
    return std::clamp(p, kLo, kHi);
}

std::string_view to_string(Severity severity) { return severity == Severity::High ? "high" : "low"; }

Verdict decide(std::span<const double> x, const DecisionInputs& in, std::vector<std::string> hits,
               double window_start, double window_end) {
    Verdict v;
    v.window_start = window_start;
    v.window_end = window_end;
    v.anomaly_score = anomaly_score(in.baseline, x);
    v.prob = predict(in.classifier, x);
    v.signature_hits = std::move(hits);
    const bool positive = v.prob >= in.p_thresh || v.anomaly_score >= in.threshold;
    v.label = positive ? Label::Ransomware : Label::Benign;
    v.severity = positive && !v.signature_hits.empty() ? Severity::High : Severity::Low;
    return v;
}

// ---------------------------------------------------------------------------
// Model document

namespace {

using detail::field;
using detail::Json;
using detail::OrderedJson;

std::vector<double> real_list(const Json& j, std::string_view where, std::size_t expected) {
    if (!j.is_array()) throw MalformedDocument(std::string(where) + ": expected a list");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(detail::to_real(v, where));
    if (expected && out.size() != expected) {
        throw IncompatibleModel(std::string(where) + ": expected " + std::to_string(expected) + " values");
    }
    return out;
}

OrderedJson behavior_json(const BehaviorKey& k) {
    return {{"op", std::string(to_string(k.op))}, {"class", std::string(to_string(k.target_class))}};
}

BehaviorKey behavior_from_json(const Json& j, std::string_view where) {
    detail::reject_unknown(j, {"op", "class"}, where);
    const auto op = parse_operation(detail::to_text(field(j, "op", where), where));
    const auto cls = parse_target_class(detail::to_text(field(j, "class", where), where));
    if (!op || !cls) throw MalformedDocument(std::string(where) + ": bad behaviour key");
    return {*op, *cls};
}

}  // namespace

std::string serialize_model(const DetectionModel& m) {
    OrderedJson doc;
    doc["format_version"] = kModelFormatVersion;
    doc["feature_layout_version"] = kFeatureLayoutVersion;
    doc["graph_params"] = {{"delta", m.graph.delta},
                           {"tau", m.graph.tau},
                           {"window", m.graph.window},
                           {"stride", m.graph.stride}};
    doc["entropy_threshold"] = m.features.entropy_threshold;
    doc["normalizer"] = {{"mean", m.normalizer.mean}, {"stddev", m.normalizer.stddev}};
    doc["baseline"] = {{"mean", m.baseline.mean}, {"stddev", m.baseline.stddev}};
    doc["threshold"] = m.threshold;
    doc["p_thresh"] = m.p_thresh;
    doc["classifier"] = {{"weights", m.classifier.weights},
                         {"bias", m.classifier.bias},
                         {"learning_rate", m.classifier.hyper.learning_rate},
                         {"epochs", m.classifier.hyper.epochs},
                         {"l2", m.classifier.hyper.l2}};
    OrderedJson counts = OrderedJson::array();
    for (const auto& [pair, c] : m.transitions.counts()) {
        counts.push_back({{"from", behavior_json(pair.first)}, {"to", behavior_json(pair.second)}, {"count", c}});
    }
    doc["transitions"] = {{"alpha", m.transitions.alpha()},
                          {"vocab_size", m.transitions.vocab_size()},
                          {"fitted", m.transitions.fitted()},
                          {"counts", std::move(counts)}};
    return doc.dump(2) + "\n";
}

DetectionModel parse_model(const std::string& text) {
    const Json doc = detail::parse_document(text, "model");
    const auto version = detail::to_int(field(doc, "format_version", "model"), "model.format_version");
    if (version != kModelFormatVersion) {
        throw IncompatibleModel("model format_version " + std::to_string(version) + " is not supported");
    }
    const auto layout =
        detail::to_int(field(doc, "feature_layout_version", "model"), "model.feature_layout_version");
    if (layout != kFeatureLayoutVersion) {
        throw IncompatibleModel("model feature layout " + std::to_string(layout) + " is not supported");
    }
    detail::reject_unknown(doc, {"format_version", "feature_layout_version", "graph_params",
                                 "entropy_threshold", "normalizer", "baseline", "threshold",
                                 "p_thresh", "classifier", "transitions"},
                           "model");

    DetectionModel m;
    const auto& gp = field(doc, "graph_params", "model");
    detail::reject_unknown(gp, {"delta", "tau", "window", "stride"}, "model.graph_params");
    m.graph.delta = detail::to_real(field(gp, "delta", "graph_params"), "graph_params.delta");
    m.graph.tau = detail::to_real(field(gp, "tau", "graph_params"), "graph_params.tau");
    m.graph.window = detail::to_real(field(gp, "window", "graph_params"), "graph_params.window");
    m.graph.stride = detail::to_real(field(gp, "stride", "graph_params"), "graph_params.stride");
    m.graph.validate();
    m.features.entropy_threshold =
        detail::to_real(field(doc, "entropy_threshold", "model"), "model.entropy_threshold");

    const auto& norm = field(doc, "normalizer", "model");
    detail::reject_unknown(norm, {"mean", "stddev"}, "model.normalizer");
    m.normalizer.mean = real_list(field(norm, "mean", "normalizer"), "normalizer.mean", kFeatureCount);
    m.normalizer.stddev = real_list(field(norm, "stddev", "normalizer"), "normalizer.stddev", kFeatureCount);

    const auto& base = field(doc, "baseline", "model");
    detail::reject_unknown(base, {"mean", "stddev"}, "model.baseline");
    m.baseline.mean = real_list(field(base, "mean", "baseline"), "baseline.mean", kFeatureCount);
    m.baseline.stddev = real_list(field(base, "stddev", "baseline"), "baseline.stddev", kFeatureCount);

    m.threshold = detail::to_real(field(doc, "threshold", "model"), "model.threshold");
    m.p_thresh = detail::to_real(field(doc, "p_thresh", "model"), "model.p_thresh");

    const auto& cls = field(doc, "classifier", "model");
    detail::reject_unknown(cls, {"weights", "bias", "learning_rate", "epochs", "l2"}, "model.classifier");
    m.classifier.weights = real_list(field(cls, "weights", "classifier"), "classifier.weights", kFeatureCount);
    m.classifier.bias = detail::to_real(field(cls, "bias", "classifier"), "classifier.bias");
    m.classifier.hyper.learning_rate =
        detail::to_real(field(cls, "learning_rate", "classifier"), "classifier.learning_rate");
    m.classifier.hyper.epochs =
        static_cast<int>(detail::to_int(field(cls, "epochs", "classifier"), "classifier.epochs"));
    m.classifier.hyper.l2 = detail::to_real(field(cls, "l2", "classifier"), "classifier.l2");

    const auto& tr = field(doc, "transitions", "model");
    detail::reject_unknown(tr, {"alpha", "vocab_size", "fitted", "counts"}, "model.transitions");
    TransitionModel transitions(detail::to_real(field(tr, "alpha", "transitions"), "transitions.alpha"),
                                detail::to_int(field(tr, "vocab_size", "transitions"), "transitions.vocab_size"));
    for (const auto& c : field(tr, "counts", "transitions")) {
        detail::reject_unknown(c, {"from", "to", "count"}, "transitions.counts");
        transitions.add_count(behavior_from_json(field(c, "from", "count"), "from"),
                              behavior_from_json(field(c, "to", "count"), "to"),
                              detail::to_int(field(c, "count", "count"), "count"));
    }
    if (detail::to_bool(field(tr, "fitted", "transitions"), "transitions.fitted")) transitions.mark_fitted();
    m.transitions = std::move(transitions);
    return m;
}

void save_model(const std::string& path, const DetectionModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UnreadableInput("cannot write model '" + path + "'");
    out << serialize_model(model);
}

DetectionModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableInput("cannot open model '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

}  // namespace tcg
