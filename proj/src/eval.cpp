#include "manet/eval.hpp"

#include <filesystem>
#include <fstream>

namespace manet {

namespace {

constexpr int kPrPoints = 51;   // 0..50 px
constexpr int kSrPoints = 21;   // 0, 0.05, ..., 1.0

MetricReport metrics_from_scores(const std::vector<double>& dist, const std::vector<double>& overlap) {
  const size_t n = dist.size();
  MetricReport r;
  r.pr_curve.resize(kPrPoints);
  r.sr_curve.resize(kSrPoints);
  for (int t = 0; t < kPrPoints; ++t) {
    int hits = 0;
    for (double d : dist)
      if (d <= t) ++hits;
    r.pr_curve[t] = double(hits) / n;
  }
  for (int t = 0; t < kSrPoints; ++t) {
    const double thr = t * 0.05;
    int hits = 0;
    for (double o : overlap)
      if (o > thr) ++hits;
    r.sr_curve[t] = double(hits) / n;
  }
  int hits5 = 0, hits20 = 0;
  for (double d : dist) {
    if (d <= 5.0) ++hits5;
    if (d <= 20.0) ++hits20;
  }
  r.pr_at_5 = double(hits5) / n;
  r.pr_at_20 = double(hits20) / n;
  double auc = 0;
  for (double v : r.sr_curve) auc += v;
  r.sr_auc = auc / kSrPoints;
  double miou = 0;
  for (double o : overlap) miou += o;
  r.mean_iou = miou / n;
  return r;
}

}  // namespace

double precision_rate(const std::vector<BBox>& results, const std::vector<BBox>& gts, double threshold) {
  check(results.size() == gts.size() && !results.empty(), "precision_rate: length mismatch");
  int hits = 0;
  for (size_t i = 0; i < results.size(); ++i)
    if (center_distance(results[i], gts[i]) <= threshold) ++hits;
  return double(hits) / results.size();
}

double success_rate_auc(const std::vector<BBox>& results, const std::vector<BBox>& gts) {
  check(results.size() == gts.size() && !results.empty(), "success_rate_auc: length mismatch");
  double auc = 0;
  for (int t = 0; t < kSrPoints; ++t) {
    const double thr = t * 0.05;
    int hits = 0;
    for (size_t i = 0; i < results.size(); ++i)
      if (iou(results[i], gts[i]) > thr) ++hits;
    auc += double(hits) / results.size();
  }
  return auc / kSrPoints;
}

MetricReport compute_metrics(const std::vector<BBox>& results, const std::vector<BBox>& gts) {
  check(results.size() == gts.size() && !results.empty(), "compute_metrics: length mismatch");
  std::vector<double> dist(results.size()), overlap(results.size());
  for (size_t i = 0; i < results.size(); ++i) {
    dist[i] = center_distance(results[i], gts[i]);
    overlap[i] = iou(results[i], gts[i]);
  }
  return metrics_from_scores(dist, overlap);
}

MetricReport compute_max_metrics(const std::vector<BBox>& results, const std::vector<BBox>& gts_rgb,
                                 const std::vector<BBox>& gts_thermal) {
  check(results.size() == gts_rgb.size() && results.size() == gts_thermal.size() && !results.empty(),
        "compute_max_metrics: length mismatch");
  std::vector<double> dist(results.size()), overlap(results.size());
  for (size_t i = 0; i < results.size(); ++i) {
    dist[i] = std::min(center_distance(results[i], gts_rgb[i]), center_distance(results[i], gts_thermal[i]));
    overlap[i] = std::max(iou(results[i], gts_rgb[i]), iou(results[i], gts_thermal[i]));
  }
  return metrics_from_scores(dist, overlap);
}

void write_metric_report(const MetricReport& report, const std::string& dir, const std::string& prefix) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / (prefix + "pr_curve.csv"));
    f << "threshold_px,precision\n";
    for (size_t t = 0; t < report.pr_curve.size(); ++t) f << t << "," << report.pr_curve[t] << "\n";
  }
  {
    std::ofstream f(fs::path(dir) / (prefix + "sr_curve.csv"));
    f << "overlap_threshold,success\n";
    for (size_t t = 0; t < report.sr_curve.size(); ++t) f << t * 0.05 << "," << report.sr_curve[t] << "\n";
  }
  std::ofstream f(fs::path(dir) / (prefix + "summary.txt"));
  f << report.pr_at_5 << "," << report.pr_at_20 << "," << report.sr_auc << "\n";
}

}  // namespace manet
