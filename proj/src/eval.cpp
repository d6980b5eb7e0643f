#include "dare/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

namespace dare {

WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs)
{
  std::vector<double> d;
  for (double x : diffs) {
    if (!std::isfinite(x))
      throw std::invalid_argument("wilcoxon: non-finite difference");
    if (x != 0.0)
      d.push_back(x);
  }
  const std::size_t n = d.size();
  if (n < 5)
    throw std::invalid_argument("wilcoxon needs at least 5 non-zero differences, got " + std::to_string(n));

  // Doubled mid-ranks keep tied ranks integral.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]]))
      ++j;
    const long r2 = static_cast<long>(i + j + 2);  // 2 * mean of ranks i+1 .. j+1
    for (std::size_t k = i; k <= j; ++k)
      rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  long w2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0.0)
      w2 += rank2[i];
  }

  WilcoxonResult res;
  res.n = n;
  res.w_plus = 0.5 * static_cast<double>(w2);
  if (n <= 25) {
    // counts[s] = number of sign patterns whose doubled positive-rank sum is s.
    std::vector<double> counts(static_cast<std::size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    long reach = 0;
    for (long r : rank2) {
      for (long s = reach; s >= 0; --s)
        if (counts[static_cast<std::size_t>(s)] != 0.0)
          counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      reach += r;
    }
    double le = 0.0, ge = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s <= w2)
        le += counts[static_cast<std::size_t>(s)];
      if (s >= w2)
        ge += counts[static_cast<std::size_t>(s)];
    }
    const double patterns = std::ldexp(1.0, static_cast<int>(n));
    res.p = std::min(1.0, 2.0 * std::min(le / patterns, ge / patterns));
    res.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (res.w_plus - mean) / std::sqrt(var);
    res.p = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  }
  return res;
}

double quantile(std::vector<double> values, double q)
{
  if (values.empty())
    throw std::invalid_argument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Distribution Distribution::of(const std::vector<double>& values)
{
  if (values.empty())
    return {};
  return {quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75)};
}

SimilarityResult compare(const GrayImage& image, const GrayImage& reference, const Mask& mask,
                         const SsimParams& params)
{
  SimilarityResult r;
  r.valid_pixel_count = static_cast<std::size_t>(mask.count());
  if (r.valid_pixel_count == 0)
    throw UndefinedMetric("no mutually covered pixels");
  r.ncc = ncc(image, reference, mask);
  r.ssim = ssim(image, reference, mask, params);
  return r;
}

ComparisonReport run_comparison(std::span<const ResliceImage> a, std::span<const ResliceImage> b,
                                std::span<const ResliceImage> ground_truth, std::span<const std::string> ids,
                                const SsimParams& params)
{
  if (a.size() != b.size() || a.size() != ground_truth.size())
    throw std::invalid_argument("run_comparison: image sets differ in length (" + std::to_string(a.size()) + ", " +
                                std::to_string(b.size()) + ", " + std::to_string(ground_truth.size()) + ")");
  if (!ids.empty() && ids.size() != a.size())
    throw std::invalid_argument("run_comparison: id list length differs from the image sets");
  if (a.empty())
    throw std::invalid_argument("run_comparison: no pairs");

  ComparisonReport rep;
  std::vector<double> ncc_a, ncc_b, ssim_a, ssim_b, lat_a, lat_b, dn, ds;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string id = ids.empty() ? std::to_string(i) : ids[i];
    const auto& gt = ground_truth[i];
    if (a[i].pixels.rows() != gt.pixels.rows() || a[i].pixels.cols() != gt.pixels.cols() ||
        b[i].pixels.rows() != gt.pixels.rows() || b[i].pixels.cols() != gt.pixels.cols())
      throw std::invalid_argument("run_comparison: pair " + id + " has mismatched image dimensions");
    const Mask mask = a[i].coverage && b[i].coverage && gt.coverage;
    PairRecord rec;
    rec.id = id;
    try {
      rec.a = compare(a[i].pixels, gt.pixels, mask, params);
      rec.b = compare(b[i].pixels, gt.pixels, mask, params);
    } catch (const UndefinedMetric&) {
      rep.skipped.push_back(id);
      continue;
    }
    rec.latency_a_ms = a[i].elapsed_ms;
    rec.latency_b_ms = b[i].elapsed_ms;
    ncc_a.push_back(rec.a.ncc);
    ncc_b.push_back(rec.b.ncc);
    ssim_a.push_back(rec.a.ssim);
    ssim_b.push_back(rec.b.ssim);
    lat_a.push_back(rec.latency_a_ms);
    lat_b.push_back(rec.latency_b_ms);
    dn.push_back(rec.a.ncc - rec.b.ncc);
    ds.push_back(rec.a.ssim - rec.b.ssim);
    rep.pairs.push_back(std::move(rec));
  }
  rep.ncc_a = Distribution::of(ncc_a);
  rep.ncc_b = Distribution::of(ncc_b);
  rep.ssim_a = Distribution::of(ssim_a);
  rep.ssim_b = Distribution::of(ssim_b);
  rep.latency_a = Distribution::of(lat_a);
  rep.latency_b = Distribution::of(lat_b);
  auto test = [](const std::vector<double>& diffs) -> std::optional<WilcoxonResult> {
    try {
      return wilcoxon_signed_rank(diffs);
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  };
  rep.wilcoxon_ncc = test(dn);
  rep.wilcoxon_ssim = test(ds);
  return rep;
}

namespace {

std::string fmt(double v, int digits = 6)
{
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_p(const std::optional<WilcoxonResult>& w)
{
  if (!w)
    return "no difference";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3e", w->p);
  return buf;
}

nlohmann::json dist_json(const Distribution& d)
{
  return {{"median", d.median}, {"q1", d.q1}, {"q3", d.q3}};
}

}  // namespace

void write_report(const ComparisonReport& rep, const std::filesystem::path& dir)
{
  std::filesystem::create_directories(dir);
  const std::string la = rep.label_a, lb = rep.label_b;

  std::ofstream csv(dir / "metrics.csv");
  csv << "id," << la << "_ncc," << la << "_ssim," << lb << "_ncc," << lb << "_ssim,valid_pixels\n";
  for (const auto& p : rep.pairs)
    csv << p.id << ',' << fmt(p.a.ncc, 9) << ',' << fmt(p.a.ssim, 9) << ',' << fmt(p.b.ncc, 9) << ','
        << fmt(p.b.ssim, 9) << ',' << p.a.valid_pixel_count << '\n';

  std::ofstream lat(dir / "latency.csv");
  lat << "id," << la << "_ms," << lb << "_ms\n";
  for (const auto& p : rep.pairs)
    lat << p.id << ',' << fmt(p.latency_a_ms, 3) << ',' << fmt(p.latency_b_ms, 3) << '\n';

  nlohmann::json j;
  j["pairs"] = rep.pairs.size();
  j["skipped"] = rep.skipped;
  j[la] = {{"ncc", dist_json(rep.ncc_a)}, {"ssim", dist_json(rep.ssim_a)}};
  j[lb] = {{"ncc", dist_json(rep.ncc_b)}, {"ssim", dist_json(rep.ssim_b)}};
  auto wj = [](const std::optional<WilcoxonResult>& w) -> nlohmann::json {
    if (!w)
      return "no difference";
    return {{"p", w->p}, {"w_plus", w->w_plus}, {"n", w->n}, {"exact", w->exact}};
  };
  j["wilcoxon"] = {{"ncc", wj(rep.wilcoxon_ncc)}, {"ssim", wj(rep.wilcoxon_ssim)}};
  std::ofstream(dir / "summary.json") << j.dump(2) << '\n';

  std::ofstream txt(dir / "summary.txt");
  txt << "pairs: " << rep.pairs.size() << " (skipped " << rep.skipped.size() << ")\n\n";
  txt << "metric  method      median     IQR\n";
  auto row = [&](const char* metric, const std::string& method, const Distribution& d) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-7s %-10s %8.4f   %.4f-%.4f\n", metric, method.c_str(), d.median, d.q1, d.q3);
    txt << buf;
  };
  row("NCC", la, rep.ncc_a);
  row("NCC", lb, rep.ncc_b);
  row("SSIM", la, rep.ssim_a);
  row("SSIM", lb, rep.ssim_b);
  txt << "\npaired Wilcoxon signed-rank (two-sided): NCC p = " << fmt_p(rep.wilcoxon_ncc)
      << ", SSIM p = " << fmt_p(rep.wilcoxon_ssim) << '\n';
}

LatencyStats time_reslice(const DirectionalVolume& v, std::span<const ReslicePlane> planes, const ResliceConfig& cfg,
                          int repetitions)
{
  if (planes.size() < 10)
    throw std::invalid_argument("time_reslice needs at least 10 planes");
  if (repetitions < 1)
    throw std::invalid_argument("time_reslice needs at least one repetition");
  for (const auto& p : planes)
    reslice(v, p, cfg);  // warm-up, untimed
  LatencyStats s;
  for (int r = 0; r < repetitions; ++r)
    for (const auto& p : planes)
      s.samples_ms.push_back(reslice(v, p, cfg).elapsed_ms);
  s.median_ms = quantile(s.samples_ms, 0.5);
  s.p95_ms = quantile(s.samples_ms, 0.95);
  return s;
}

}  // namespace dare
