#include <doctest.h>

#include <filesystem>

#include "respira/core/rng.hpp"
#include "respira/eval/metrics.hpp"
#include "respira/report/figures.hpp"
#include "respira/pipeline/commands.hpp"

using namespace respira;
using namespace respira::report;

TEST_CASE("figures: deterministic bytes for identical inputs") {
  Rng rng(3);
  std::vector<float> vals(32 * 20);
  for (auto& v : vals) v = static_cast<float>(rng.gaussian());
  HeatmapOptions opt;
  opt.title = "demo";
  std::string a = heatmap_figure(vals, 32, 20, opt);
  std::string b = heatmap_figure(vals, 32, 20, opt);
  CHECK(a == b);
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("<rect") != std::string::npos);

  std::vector<Series> series = {{"x", "#ff0000", {1, 2, 3}, {0.5, 0.7, 0.9}}};
  CHECK(line_chart(series, "t", "x", "y") == line_chart(series, "t", "x", "y"));
}

TEST_CASE("figures: confusion and roc render the expected annotations") {
  std::vector<int> t = {0, 1, 2, 3, 4, 0, 1};
  std::vector<int> p = {0, 1, 2, 3, 4, 1, 1};
  auto cm = eval::confusion(t, p);
  std::string fig = confusion_figure(cm, "confusion");
  for (const auto& name : train::class_names())
    CHECK(fig.find(name) != std::string::npos);

  Rng rng(5);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    labels.push_back(static_cast<int>(rng.below(5)));
    for (int c = 0; c < 5; ++c) scores.push_back(rng.uniform() + (labels.back() == c ? 0.4 : 0.0));
  }
  auto roc = eval::roc_auc(scores, labels);
  std::string rfig = roc_figure(roc, "roc");
  CHECK(rfig.find("polyline") != std::string::npos);
  CHECK(rfig.find("false positive rate") != std::string::npos);
}

TEST_CASE("report: regenerates byte-identically and omits absent sections") {
  auto dir = std::filesystem::temp_directory_path() / "respira_report_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  // minimal epochs log only; no metrics, no xai
  std::string jsonl;
  for (int e = 1; e <= 5; ++e) {
    train::EpochLog log;
    log.epoch = e;
    log.train_loss = 1.0 / e;
    log.val_loss = 1.2 / e;
    log.train_accuracy = 0.5 + 0.08 * e;
    log.val_accuracy = 0.45 + 0.08 * e;
    log.val_macro_f1 = 0.4 + 0.1 * e;
    log.lr = 3e-4;
    jsonl += log.to_json().dump() + "\n";
  }
  write_file_text(dir / "epochs.jsonl", jsonl);

  std::string html1 = pipeline::cmd_report(dir);
  std::string html2 = pipeline::cmd_report(dir);
  CHECK(html1 == html2);
  CHECK(read_file_text(dir / "report.html") == html1);
  CHECK(html1.find("Learning curves") != std::string::npos);
  CHECK(html1.find("Attribution gallery") == std::string::npos);  // no xai outputs
  CHECK(html1.find("Missing artifacts") != std::string::npos);    // metrics absent, listed
  CHECK(std::filesystem::exists(dir / "learning_curves.svg"));
  std::filesystem::remove_all(dir);
}
