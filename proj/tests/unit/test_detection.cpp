#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "tcg/detection.hpp"
#include "tcg/errors.hpp"
#include "tcg/rng.hpp"

using namespace tcg;

namespace {
FeatureVector filled(double v) {
    FeatureVector f;
    f.fill(v);
    return f;
}

// Long-double reference for the regularized mean logistic loss.
long double ref_loss(const std::vector<double>& w, double b, const std::vector<std::vector<double>>& x,
                     const std::vector<int>& y, double l2) {
    long double sum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double z = b;
        for (std::size_t j = 0; j < w.size(); ++j) z += static_cast<long double>(w[j]) * x[i][j];
        const long double p = 1.0L / (1.0L + std::exp(-z));
        sum += y[i] ? -std::log(p) : -std::log(1.0L - p);
    }
    long double reg = 0;
    for (double v : w) reg += static_cast<long double>(v) * v;
    return sum / x.size() + l2 / 2 * reg;
}
}  // namespace

TEST(Baseline, PopulationSigmaAndFloor) {
    std::vector<FeatureVector> xs;
    for (int i = 0; i < 10; ++i) xs.push_back(filled(i % 2 == 0 ? 0.0 : 2.0));
    const auto m = fit_baseline(xs);
    EXPECT_DOUBLE_EQ(m.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(m.stddev[0], 1.0);

    std::vector<FeatureVector> flat(10, filled(3.0));
    EXPECT_EQ(fit_baseline(flat).stddev[4], kSigmaFloor);
    EXPECT_THROW(fit_baseline(std::vector<FeatureVector>(9)), InsufficientData);
}

TEST(AnomalyScore, ClosedFormAndErrors) {
    BaselineModel m;
    m.mean.assign(kFeatureCount, 0.0);
    m.stddev.assign(kFeatureCount, 1.0);
    FeatureVector x{};
    x[0] = 2.0;
    EXPECT_NEAR(anomaly_score(m, x), std::sqrt(4.0 / 15.0), 1e-12);
    EXPECT_NEAR(anomaly_score(m, x), 0.5164, 1e-4);
    EXPECT_EQ(anomaly_score(m, FeatureVector{}), 0.0);
    std::vector<double> short_x(3, 0.0);
    EXPECT_THROW(anomaly_score(m, short_x), DimensionMismatch);
}

TEST(AnomalyScore, InvariantUnderAffineRescaling) {
    Rng rng(4);
    std::vector<FeatureVector> train(50);
    for (auto& x : train)
        for (auto& v : x) v = rng.normal(0.0, 1.0);
    const auto m = fit_baseline(train);
    std::vector<FeatureVector> scaled = train;
    for (auto& x : scaled)
        for (auto& v : x) v = 3.0 * v + 10.0;
    const auto ms = fit_baseline(scaled);
    for (std::size_t i = 0; i < train.size(); ++i)
        EXPECT_NEAR(anomaly_score(m, train[i]), anomaly_score(ms, scaled[i]), 1e-9);
}

TEST(CalibrateThreshold, Examples) {
    std::vector<double> s;
    for (int i = 1; i <= 20; ++i) s.push_back(i);
    EXPECT_EQ(calibrate_threshold(s, 0.05), 20.0);
    EXPECT_EQ(calibrate_threshold(s, 0.10), 19.0);
    EXPECT_EQ(calibrate_threshold(s, 0.0), std::nextafter(20.0, std::numeric_limits<double>::infinity()));
    EXPECT_THROW(calibrate_threshold(std::vector<double>(19, 1.0)), InsufficientData);
}

TEST(CalibrateThreshold, FalsePositiveRateBound) {
    Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> s(20 + rng.below(300));
        for (auto& v : s) v = std::floor(rng.exponential(1.0) * 4.0) / 4.0;  // ties on purpose
        const double fpr = rng.uniform(0.0, 0.3);
        const double q = calibrate_threshold(s, fpr);
        std::size_t above = 0;
        for (double v : s) above += v >= q;
        EXPECT_LE(static_cast<double>(above) / static_cast<double>(s.size()), fpr + 1e-12);
    }
}

TEST(Classifier, SeparableToySet) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        x.push_back({i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i});
        y.push_back(i < 10 ? 0 : 1);
    }
    TrainingReport rep;
    const auto m = train_classifier(x, y, TrainingHyper{}, &rep);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(predict(m, x[i]) >= 0.5, y[i] == 1);
    ASSERT_EQ(rep.loss_history.size(), 501u);
    for (std::size_t i = 1; i < rep.loss_history.size(); ++i)
        EXPECT_LE(rep.loss_history[i], rep.loss_history[i - 1] + 1e-12);
    EXPECT_NEAR(rep.loss_history.front(), std::log(2.0), 1e-12);
}

TEST(Classifier, Errors) {
    std::vector<std::vector<double>> x = {{1.0}, {2.0}};
    std::vector<int> same = {1, 1};
    EXPECT_THROW(train_classifier(x, same), DegenerateLabels);
    std::vector<std::vector<double>> none;
    std::vector<int> no_labels;
    EXPECT_THROW(train_classifier(none, no_labels), InsufficientData);
}

TEST(Classifier, LossAndGradientAgainstReference) {
    Rng rng(12);
    const std::size_t d = 6;
    std::vector<std::vector<double>> x(40, std::vector<double>(d));
    std::vector<int> y(40);
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (auto& v : x[i]) v = rng.normal(0.0, 2.0);
        y[i] = rng.bernoulli(0.5);
    }
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal(0.0, 1.0);
    const double b = 0.3, l2 = 0.01;
    EXPECT_NEAR(logistic_loss(w, b, x, y, l2), static_cast<double>(ref_loss(w, b, x, y, l2)), 1e-12);

    const auto g = logistic_gradient(w, b, x, y, l2);
    ASSERT_EQ(g.size(), d + 1);
    const double h = 1e-6;
    for (std::size_t j = 0; j <= d; ++j) {
        auto wp = w, wm = w;
        double bp = b, bm = b;
        if (j < d) {
            wp[j] += h;
            wm[j] -= h;
        } else {
            bp += h;
            bm -= h;
        }
        const long double num = (ref_loss(wp, bp, x, y, l2) - ref_loss(wm, bm, x, y, l2)) / (2 * h);
        EXPECT_NEAR(g[j], static_cast<double>(num), 1e-7);
    }
}

TEST(Predict, SaturationStaysInOpenInterval) {
    LinearClassifier m;
    m.weights = {0.0};
    m.bias = 40.0;
    const std::vector<double> x = {0.0};
    EXPECT_LT(predict(m, x), 1.0);
    EXPECT_GT(predict(m, x), 0.99);
    m.bias = -800.0;
    EXPECT_GT(predict(m, x), 0.0);
    EXPECT_DOUBLE_EQ(logistic(0.0), 0.5);
    EXPECT_NEAR(logistic(2.0) + logistic(-2.0), 1.0, 1e-15);
}

TEST(Decide, FusionRules) {
    BaselineModel base;
    base.mean.assign(kFeatureCount, 0.0);
    base.stddev.assign(kFeatureCount, 1.0);
    LinearClassifier clf;
    clf.weights.assign(kFeatureCount, 0.0);
    clf.bias = -5.0;  // prob ~ 0.0067
    const DecisionInputs in{base, 1.0, clf, 0.5};

    FeatureVector quiet{};
    auto v = decide(quiet, in, {}, 0, 40);
    EXPECT_EQ(v.label, Label::Benign);
    EXPECT_EQ(v.severity, Severity::Low);
    EXPECT_EQ(v.window_end, 40.0);

    // Signature hits alone never flip the label.
    v = decide(quiet, in, {"encrypt_chain"});
    EXPECT_EQ(v.label, Label::Benign);
    EXPECT_EQ(v.severity, Severity::Low);

    FeatureVector loud = filled(2.0);  // score 2 >= 1
    v = decide(loud, in, {});
    EXPECT_EQ(v.label, Label::Ransomware);
    EXPECT_EQ(v.severity, Severity::Low);
    v = decide(loud, in, {"encrypt_chain"});
    EXPECT_EQ(v.severity, Severity::High);

    LinearClassifier eager = clf;
    eager.bias = 5.0;
    v = decide(quiet, DecisionInputs{base, 1.0, eager, 0.5}, {});
    EXPECT_EQ(v.label, Label::Ransomware);
}

TEST(ModelDocument, RoundTripAndCompatibility) {
    DetectionModel m;
    m.normalizer.mean.assign(kFeatureCount, 0.25);
    m.normalizer.stddev.assign(kFeatureCount, 1.5);
    m.baseline.mean.assign(kFeatureCount, -0.1);
    m.baseline.stddev.assign(kFeatureCount, 0.7);
    m.threshold = 2.125;
    m.classifier.weights.assign(kFeatureCount, 0.1);
    m.classifier.bias = -1.0 / 3.0;
    m.transitions = TransitionModel(1.0, kBehaviorVocabSize);
    m.transitions.add_count({OperationKind::FileRead, TargetClass::UserDoc},
                            {OperationKind::FileWrite, TargetClass::UserDoc}, 4);
    m.transitions.mark_fitted();
    const auto doc = serialize_model(m);
    const auto back = parse_model(doc);
    EXPECT_EQ(back, m);
    EXPECT_EQ(serialize_model(back), doc);

    const auto path = std::filesystem::temp_directory_path() / "tcg_unit_model.json";
    save_model(path.string(), m);
    EXPECT_EQ(load_model(path.string()), m);
    std::filesystem::remove(path);

    std::string bumped = doc;
    const auto pos = bumped.find("\"format_version\": 1");
    ASSERT_NE(pos, std::string::npos);
    bumped.replace(pos, 19, "\"format_version\": 9");
    EXPECT_THROW(parse_model(bumped), IncompatibleModel);
    EXPECT_THROW(parse_model("{"), MalformedDocument);
}
