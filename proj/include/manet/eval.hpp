#pragma once

#include <string>
#include <vector>

#include "manet/bbox.hpp"

namespace manet {

// Tracking metrics: precision rate over center-error thresholds and success
// rate over IoU thresholds, with the per-frame-best variants for datasets
// carrying one ground truth per modality.

struct MetricReport {
  std::vector<double> pr_curve;  // thresholds 0..50 px, step 1 (51 points)
  std::vector<double> sr_curve;  // thresholds 0..1, step 0.05 (21 points)
  double pr_at_5 = 0;
  double pr_at_20 = 0;
  double sr_auc = 0;  // mean of sr_curve
  double mean_iou = 0;
};

double precision_rate(const std::vector<BBox>& results, const std::vector<BBox>& gts, double threshold);
double success_rate_auc(const std::vector<BBox>& results, const std::vector<BBox>& gts);

MetricReport compute_metrics(const std::vector<BBox>& results, const std::vector<BBox>& gts);

// Per frame, takes the smaller center distance / larger IoU over the two
// ground-truth streams before thresholding.
MetricReport compute_max_metrics(const std::vector<BBox>& results, const std::vector<BBox>& gts_rgb,
                                 const std::vector<BBox>& gts_thermal);

// CSV with one curve point per line plus a one-line summary "PR@5,PR@20,SR".
void write_metric_report(const MetricReport& report, const std::string& dir, const std::string& prefix = "");

}  // namespace manet
