#ifndef DARE_EVAL_HPP
#define DARE_EVAL_HPP

#include "dare/image.hpp"
#include "dare/reslice.hpp"
#include "dare/volume.hpp"

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dare {

/// A similarity metric has no defined value on its input (constant image, empty mask, ...).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Zero-mean normalized cross-correlation over the pixels where mask is set.
template <typename DerivedA, typename DerivedB>
double ncc(const Eigen::ArrayBase<DerivedA>& a, const Eigen::ArrayBase<DerivedB>& b, const Mask& mask)
{
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != mask.rows() || a.cols() != mask.cols())
    throw std::invalid_argument("ncc: image and mask dimensions differ");
  const Eigen::Index n = mask.count();
  if (n < 2)
    throw UndefinedMetric("ncc needs at least 2 mutually valid pixels");
  const Eigen::ArrayXXd ad = a.template cast<double>();
  const Eigen::ArrayXXd bd = b.template cast<double>();
  const Eigen::ArrayXXd m = mask.cast<double>();
  const double mean_a = (ad * m).sum() / n;
  const double mean_b = (bd * m).sum() / n;
  const Eigen::ArrayXXd za = (ad - mean_a) * m;
  const Eigen::ArrayXXd zb = (bd - mean_b) * m;
  const double saa = za.square().sum();
  const double sbb = zb.square().sum();
  if (!(saa > 0.0) || !(sbb > 0.0))
    throw UndefinedMetric("ncc is undefined for a constant image");
  return (za * zb).sum() / std::sqrt(saa * sbb);
}

struct SsimParams {
  int window = 7;
  double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  double c2 = (0.03 * 255.0) * (0.03 * 255.0);
};

/// Mean SSIM over every uniform window lying entirely inside the mask.
/// Local statistics use population (1/N) moments.
template <typename DerivedA, typename DerivedB>
double ssim(const Eigen::ArrayBase<DerivedA>& a, const Eigen::ArrayBase<DerivedB>& b, const Mask& mask,
            const SsimParams& params = {})
{
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != mask.rows() || a.cols() != mask.cols())
    throw std::invalid_argument("ssim: image and mask dimensions differ");
  if (params.window < 1 || params.window % 2 == 0)
    throw std::invalid_argument("ssim window must be odd and positive");
  const Eigen::Index win = params.window;
  const Eigen::Index rows = a.rows(), cols = a.cols();
  if (rows < win || cols < win)
    throw UndefinedMetric("ssim: image smaller than the window");

  // Summed-area tables padded with a leading zero row/column.
  auto integral = [&](const Eigen::ArrayXXd& x) {
    Eigen::ArrayXXd s = Eigen::ArrayXXd::Zero(rows + 1, cols + 1);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        s(r + 1, c + 1) = x(r, c) + s(r, c + 1) + s(r + 1, c) - s(r, c);
    return s;
  };
  const Eigen::ArrayXXd ad = a.template cast<double>();
  const Eigen::ArrayXXd bd = b.template cast<double>();
  const Eigen::ArrayXXd sa = integral(ad), sb = integral(bd);
  const Eigen::ArrayXXd saa = integral(ad.square()), sbb = integral(bd.square()), sab = integral(ad * bd);
  const Eigen::ArrayXXd sm = integral(mask.cast<double>());
  auto box = [&](const Eigen::ArrayXXd& s, Eigen::Index r, Eigen::Index c) {
    return s(r + win, c + win) - s(r, c + win) - s(r + win, c) + s(r, c);
  };

  const double n = static_cast<double>(win * win);
  double total = 0.0;
  std::size_t windows = 0;
  for (Eigen::Index r = 0; r + win <= rows; ++r)
    for (Eigen::Index c = 0; c + win <= cols; ++c) {
      if (box(sm, r, c) != n)
        continue;
      const double mu_a = box(sa, r, c) / n, mu_b = box(sb, r, c) / n;
      const double var_a = box(saa, r, c) / n - mu_a * mu_a;
      const double var_b = box(sbb, r, c) / n - mu_b * mu_b;
      const double cov = box(sab, r, c) / n - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + params.c1) * (2.0 * cov + params.c2)) /
               ((mu_a * mu_a + mu_b * mu_b + params.c1) * (var_a + var_b + params.c2));
      ++windows;
    }
  if (windows == 0)
    throw UndefinedMetric("ssim: no complete window inside the mask");
  return total / static_cast<double>(windows);
}

struct WilcoxonResult {
  double p = 1.0;       // two-sided
  double w_plus = 0.0;  // sum of ranks of positive differences
  std::size_t n = 0;    // non-zero differences used
  bool exact = false;
};

/// Paired signed-rank test. Zeros are dropped, ties get mid-ranks. Exact null
/// distribution for n <= 25, normal approximation with tie correction above.
/// Throws std::invalid_argument with fewer than 5 non-zero differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs);

/// Linear-interpolated quantile (q in [0, 1]) of unsorted values.
double quantile(std::vector<double> values, double q);

struct Distribution {
  double median = 0.0, q1 = 0.0, q3 = 0.0;
  static Distribution of(const std::vector<double>& values);
};

struct SimilarityResult {
  double ncc = 0.0;
  double ssim = 0.0;
  std::size_t valid_pixel_count = 0;
};

/// NCC and SSIM of `image` against `reference` over `mask`.
SimilarityResult compare(const GrayImage& image, const GrayImage& reference, const Mask& mask,
                         const SsimParams& params = {});

struct PairRecord {
  std::string id;
  SimilarityResult a, b;
  double latency_a_ms = 0.0, latency_b_ms = 0.0;
};

struct ComparisonReport {
  std::string label_a = "DARE", label_b = "baseline";
  std::vector<PairRecord> pairs;
  std::vector<std::string> skipped;  // pairs whose metrics were undefined
  Distribution ncc_a, ncc_b, ssim_a, ssim_b;
  std::optional<WilcoxonResult> wilcoxon_ncc, wilcoxon_ssim;  // empty: no detectable difference
  Distribution latency_a, latency_b;
};

/// Paired comparison of method A and method B against the same references. Metrics
/// use the intersection of all three coverage masks. Throws on length mismatch.
ComparisonReport run_comparison(std::span<const ResliceImage> a, std::span<const ResliceImage> b,
                                std::span<const ResliceImage> ground_truth, std::span<const std::string> ids = {},
                                const SsimParams& params = {});

/// Writes metrics.csv (per pair), summary.txt and summary.json (deterministic), plus
/// latency.csv with per-pair timings.
void write_report(const ComparisonReport& report, const std::filesystem::path& dir);

struct LatencyStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  std::vector<double> samples_ms;
};

/// Times reslice over every plane `repetitions` times after one untimed warm-up pass.
LatencyStats time_reslice(const DirectionalVolume& v, std::span<const ReslicePlane> planes, const ResliceConfig& cfg,
                          int repetitions = 1);

}  // namespace dare

#endif  // DARE_EVAL_HPP
