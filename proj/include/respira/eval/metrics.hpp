#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "respira/core/error.hpp"
#include "respira/train/manifest.hpp"

namespace respira::eval {

using train::kNumClasses;

// Rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::array<std::array<int64_t, kNumClasses>, kNumClasses> counts{};

  int64_t total() const {
    int64_t t = 0;
    for (const auto& row : counts)
      for (int64_t v : row) t += v;
    return t;
  }
  int64_t trace() const {
    int64_t t = 0;
    for (int c = 0; c < kNumClasses; ++c) t += counts[static_cast<size_t>(c)][static_cast<size_t>(c)];
    return t;
  }
  int64_t row_sum(int c) const {
    int64_t t = 0;
    for (int64_t v : counts[static_cast<size_t>(c)]) t += v;
    return t;
  }
  int64_t col_sum(int c) const {
    int64_t t = 0;
    for (int r = 0; r < kNumClasses; ++r) t += counts[static_cast<size_t>(r)][static_cast<size_t>(c)];
    return t;
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : counts) rows.push_back(row);
    return rows;
  }
};

inline ConfusionMatrix confusion(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted) {
  if (true_labels.size() != predicted.size())
    throw data_error("confusion: label vectors of unequal length");
  if (true_labels.empty()) throw data_error("confusion: empty input");
  ConfusionMatrix cm;
  for (size_t i = 0; i < true_labels.size(); ++i) {
    int t = true_labels[i], p = predicted[i];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses)
      throw data_error("confusion: label outside class set");
    cm.counts[static_cast<size_t>(t)][static_cast<size_t>(p)]++;
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t support = 0;
  bool degenerate = false;  // a zero denominator was hit
  double auc = std::numeric_limits<double>::quiet_NaN();  // filled by roc_auc when defined
};

struct MetricsReport {
  std::array<ClassMetrics, kNumClasses> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
  double macro_auc = std::numeric_limits<double>::quiet_NaN();
  int64_t total = 0;
};

// One-vs-rest precision/recall/F1 per class; zero denominators yield 0 with
// the degenerate flag set instead of NaN.
inline MetricsReport class_metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.total = cm.total();
  if (r.total == 0) throw data_error("metrics: empty confusion matrix");
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(r.total);

  double wp = 0.0, wr = 0.0, wf = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& m = r.per_class[static_cast<size_t>(c)];
    int64_t tp = cm.counts[static_cast<size_t>(c)][static_cast<size_t>(c)];
    int64_t fp = cm.col_sum(c) - tp;
    int64_t fn = cm.row_sum(c) - tp;
    m.support = cm.row_sum(c);
    if (tp + fp > 0)
      m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    else
      m.degenerate = true;
    if (tp + fn > 0)
      m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    else
      m.degenerate = true;
    if (m.precision + m.recall > 0.0)
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    r.macro_precision += m.precision / kNumClasses;
    r.macro_recall += m.recall / kNumClasses;
    r.macro_f1 += m.f1 / kNumClasses;
    wp += m.precision * static_cast<double>(m.support);
    wr += m.recall * static_cast<double>(m.support);
    wf += m.f1 * static_cast<double>(m.support);
  }
  r.weighted_precision = wp / static_cast<double>(r.total);
  r.weighted_recall = wr / static_cast<double>(r.total);
  r.weighted_f1 = wf / static_cast<double>(r.total);
  return r;
}

// One-vs-rest binary accuracy (TP+TN)/(TP+TN+FP+FN) for a single class, on
// explicit request only: reporting it per class alongside multiclass results
// inflates scores (TN dominates), so the standard report uses trace/total.
inline double per_class_binary_accuracy(const ConfusionMatrix& cm, int c) {
  if (c < 0 || c >= kNumClasses) throw data_error("binary accuracy: class out of range");
  int64_t tp = cm.counts[static_cast<size_t>(c)][static_cast<size_t>(c)];
  int64_t fp = cm.col_sum(c) - tp;
  int64_t fn = cm.row_sum(c) - tp;
  int64_t tn = cm.total() - tp - fp - fn;
  return static_cast<double>(tp + tn) / static_cast<double>(cm.total());
}

struct RocPoint {
  double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocResult {
  double auc = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;  // needs >= 1 positive and >= 1 negative
  std::vector<RocPoint> points;
};

// One-vs-rest ROC via the full threshold sweep over unique score values
// (plus +inf sentinel). Equal scores collapse into one sweep step, which
// makes the trapezoidal area equal the rank/midpoint (pair-counting)
// estimator exactly.
inline RocResult roc_curve(const std::vector<double>& scores, const std::vector<int>& is_positive) {
  if (scores.size() != is_positive.size()) throw data_error("roc: length mismatch");
  RocResult out;
  int64_t npos = 0, nneg = 0;
  for (int v : is_positive) (v ? npos : nneg)++;
  if (npos == 0 || nneg == 0) return out;

  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  out.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  double auc = 0.0;
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    int64_t dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (is_positive[order[j]]) ++dtp;
      else ++dfp;
      ++j;
    }
    double tpr0 = static_cast<double>(tp) / npos;
    double fpr0 = static_cast<double>(fp) / nneg;
    tp += dtp;
    fp += dfp;
    double tpr1 = static_cast<double>(tp) / npos;
    double fpr1 = static_cast<double>(fp) / nneg;
    auc += (fpr1 - fpr0) * 0.5 * (tpr0 + tpr1);
    out.points.push_back({fpr1, tpr1, scores[order[i]]});
    i = j;
  }
  out.auc = auc;
  out.defined = true;
  return out;
}

struct MulticlassRoc {
  std::array<RocResult, kNumClasses> per_class;
  double macro_auc = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

// scores: row-major (n, kNumClasses) probability (or score) rows.
inline MulticlassRoc roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (labels.empty() || scores.size() != labels.size() * kNumClasses)
    throw data_error("roc_auc: scores must be n x 5");
  MulticlassRoc out;
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> s(labels.size());
    std::vector<int> pos(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
      s[i] = scores[i * kNumClasses + static_cast<size_t>(c)];
      pos[i] = labels[i] == c ? 1 : 0;
    }
    out.per_class[static_cast<size_t>(c)] = roc_curve(s, pos);
    if (out.per_class[static_cast<size_t>(c)].defined) {
      sum += out.per_class[static_cast<size_t>(c)].auc;
      ++defined;
    } else {
      out.warnings.push_back("class '" + train::class_names()[static_cast<size_t>(c)] +
                             "' has no positives or no negatives; AUC undefined and excluded");
    }
  }
  if (defined > 0) out.macro_auc = sum / defined;
  return out;
}

inline nlohmann::json report_to_json(const MetricsReport& r, const MulticlassRoc* roc = nullptr) {
  nlohmann::json per_class = nlohmann::json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& m = r.per_class[static_cast<size_t>(c)];
    nlohmann::json jm = {{"precision", m.precision}, {"recall", m.recall},     {"f1", m.f1},
                         {"support", m.support},     {"degenerate", m.degenerate}};
    if (roc && roc->per_class[static_cast<size_t>(c)].defined)
      jm["auc"] = roc->per_class[static_cast<size_t>(c)].auc;
    per_class[train::class_names()[static_cast<size_t>(c)]] = jm;
  }
  nlohmann::json j = {{"per_class", per_class},
                      {"accuracy", r.accuracy},
                      {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}},
                      {"weighted", {{"precision", r.weighted_precision}, {"recall", r.weighted_recall}, {"f1", r.weighted_f1}}},
                      {"total", r.total}};
  if (roc && !std::isnan(roc->macro_auc)) j["macro"]["auc"] = roc->macro_auc;
  if (roc && !roc->warnings.empty()) j["roc_warnings"] = roc->warnings;
  return j;
}

}  // namespace respira::eval
