#include "kforge/metrics.hpp"

#include "kforge/error.hpp"
#include "kforge/interp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace kforge {

namespace {

void same_shape(const MagnitudeImageSeries &a, const MagnitudeImageSeries &b, const char *what) {
  if (a.shape() != b.shape())
    throw ValidationError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  if (a.empty()) throw ValidationError(std::string(what) + ": empty input");
}

std::vector<double> gaussian_window(std::size_t n, double sigma) {
  std::vector<double> g(n);
  const double c = (double(n) - 1) / 2;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += g[i] = std::exp(-(double(i) - c) * (double(i) - c) / (2 * sigma * sigma));
  for (auto &v : g) v /= s;
  return g;
}

// Valid-mode separable filtering of an h x w image.
std::vector<double> filter_valid(const double *img, std::size_t h, std::size_t w, const std::vector<double> &g) {
  const std::size_t n = g.size(), oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += g[k] * img[y * w + x + k];
      tmp[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

} // namespace

double mse(const MagnitudeImageSeries &a, const MagnitudeImageSeries &b) {
  same_shape(a, b, "mse");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / double(a.size());
}

double psnr(const MagnitudeImageSeries &a, const MagnitudeImageSeries &b, std::optional<double> peak) {
  const double m = mse(a, b);
  const double pk = peak ? *peak : *std::max_element(b.begin(), b.end());
  if (m == 0) return kInfinite;
  return 10.0 * std::log10(pk * pk / m);
}

double ssim(const MagnitudeImageSeries &a, const MagnitudeImageSeries &b, const SsimOptions &opts) {
  same_shape(a, b, "ssim");
  const std::size_t T = a.dim(0), H = a.dim(1), W = a.dim(2), P = H * W;
  if (H < opts.window || W < opts.window)
    throw ValidationError("ssim: image " + std::to_string(H) + "x" + std::to_string(W) + " smaller than the " +
                          std::to_string(opts.window) + "x" + std::to_string(opts.window) + " window");
  double L = 0;
  if (opts.dynamic_range) {
    L = *opts.dynamic_range;
  } else {
    const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
    L = *hi - *lo;
  }
  if (!(L > 0)) throw ValidationError("ssim: zero dynamic range; pass an explicit range for constant references");
  const double c1 = (opts.k1 * L) * (opts.k1 * L), c2 = (opts.k2 * L) * (opts.k2 * L);
  const auto g = gaussian_window(opts.window, opts.sigma);

  double total = 0;
  std::vector<double> aa(P), bb(P), ab(P);
  for (std::size_t t = 0; t < T; ++t) {
    const double *pa = a.data() + t * P, *pb = b.data() + t * P;
    for (std::size_t i = 0; i < P; ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto ma = filter_valid(pa, H, W, g), mb = filter_valid(pb, H, W, g);
    const auto saa = filter_valid(aa.data(), H, W, g), sbb = filter_valid(bb.data(), H, W, g),
               sab = filter_valid(ab.data(), H, W, g);
    double frame = 0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i], cov = sab[i] - ma[i] * mb[i];
      frame += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) / ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    total += frame / double(ma.size());
  }
  return total / double(T);
}

double snr_estimate(const MagnitudeImageSeries &img, const Roi &signal, const Roi &noise) {
  const std::size_t T = img.dim(0), H = img.dim(1), W = img.dim(2);
  for (const Roi *r : {&signal, &noise}) {
    if (r->pixels() < 16) throw ValidationError("snr_estimate: ROI needs at least 16 pixels");
    if (r->y0 + r->h > H || r->x0 + r->w > W) throw ValidationError("snr_estimate: ROI outside image");
  }
  const bool overlap = signal.y0 < noise.y0 + noise.h && noise.y0 < signal.y0 + signal.h &&
                       signal.x0 < noise.x0 + noise.w && noise.x0 < signal.x0 + signal.w;
  if (overlap) throw ValidationError("snr_estimate: signal and noise ROIs overlap");

  double sum = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t y = signal.y0; y < signal.y0 + signal.h; ++y)
      for (std::size_t x = signal.x0; x < signal.x0 + signal.w; ++x, ++n) sum += img(t, y, x);
  const double mean_signal = sum / double(n);

  // two-pass sample variance of the noise ROI
  double nsum = 0;
  std::size_t m = 0;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t y = noise.y0; y < noise.y0 + noise.h; ++y)
      for (std::size_t x = noise.x0; x < noise.x0 + noise.w; ++x, ++m) nsum += img(t, y, x);
  const double nmean = nsum / double(m);
  double ss = 0;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t y = noise.y0; y < noise.y0 + noise.h; ++y)
      for (std::size_t x = noise.x0; x < noise.x0 + noise.w; ++x) {
        const double d = img(t, y, x) - nmean;
        ss += d * d;
      }
  const double sd = std::sqrt(ss / double(m - 1));
  if (sd == 0) return kInfinite;
  return 20.0 * std::log10(mean_signal / sd);
}

EdgeSharpness edge_sharpness(const MagnitudeImageSeries &series, const ProfileSpec &pr) {
  const std::size_t T = series.dim(0), H = series.dim(1), W = series.dim(2), P = H * W;
  require(T >= 1, "edge_sharpness: empty series");
  require(pr.samples >= 2, "edge_sharpness: profile needs at least 2 samples");
  require(pr.y0 != pr.y1 || pr.x0 != pr.x1, "edge_sharpness: profile endpoints coincide");
  auto inside = [&](double y, double x) { return y >= 0 && x >= 0 && y <= double(H - 1) && x <= double(W - 1); };
  require(inside(pr.y0, pr.x0) && inside(pr.y1, pr.x1), "edge_sharpness: profile leaves the image");

  EdgeSharpness es;
  std::vector<double> prof(pr.samples);
  const double n1 = double(pr.samples - 1);
  for (std::size_t t = 0; t < T; ++t) {
    const std::span<const double> frame(series.data() + t * P, P);
    for (std::size_t i = 0; i < pr.samples; ++i) {
      const double f = double(i) / n1;
      prof[i] = sample_bilinear(frame, H, W, pr.y0 + f * (pr.y1 - pr.y0), pr.x0 + f * (pr.x1 - pr.x0));
    }
    const auto [lo, hi] = std::minmax_element(prof.begin(), prof.end());
    const double span = *hi - *lo;
    double best = 0;
    if (span > 0) {
      for (std::size_t i = 0; i + 1 < pr.samples; ++i)
        best = std::max(best, std::abs(prof[i + 1] - prof[i]) / span);
    } else {
      ++es.flat_frames;
    }
    es.per_frame.push_back(best);
  }
  for (double v : es.per_frame) es.mean += v;
  es.mean /= double(T);
  for (double v : es.per_frame) es.std_t += (v - es.mean) * (v - es.mean);
  es.std_t = std::sqrt(es.std_t / double(T));
  return es;
}

Roi default_signal_roi(std::size_t h, std::size_t w) {
  const std::size_t bh = std::max<std::size_t>(4, h / 4), bw = std::max<std::size_t>(4, w / 4);
  return {h / 2 - bh / 2, w / 2 - bw / 2, bh, bw};
}

Roi default_noise_roi(std::size_t h, std::size_t w) {
  return {0, 0, std::max<std::size_t>(4, h / 8), std::max<std::size_t>(4, w / 8)};
}

ProfileSpec default_profile(std::size_t h, std::size_t w) {
  return {double(h / 2), 0.0, double(h / 2), double(w - 1), 128};
}

QualityReport evaluate_quality(const MagnitudeImageSeries &pred, const MagnitudeImageSeries &truth,
                               const MetricsConfig &cfg, std::string dataset, std::string method) {
  same_shape(pred, truth, "evaluate_quality");
  const std::size_t H = pred.dim(1), W = pred.dim(2);
  QualityReport q;
  q.dataset = std::move(dataset);
  q.method = std::move(method);
  q.mse = mse(pred, truth);
  q.psnr_db = psnr(pred, truth);
  q.ssim = ssim(pred, truth, cfg.ssim);
  q.snr_db = snr_estimate(pred, cfg.signal_roi.value_or(default_signal_roi(H, W)),
                          cfg.noise_roi.value_or(default_noise_roi(H, W)));
  const auto es = edge_sharpness(pred, cfg.profile.value_or(default_profile(H, W)));
  q.es_mean = es.mean;
  q.es_std_t = es.std_t;
  return q;
}

void write_quality_csv(std::ostream &os, const std::vector<QualityReport> &rows, bool header) {
  if (header) os << kQualityCsvHeader << '\n';
  for (const auto &r : rows)
    os << r.dataset << ',' << r.method << ',' << fmt(r.mse) << ',' << fmt(r.psnr_db) << ',' << fmt(r.ssim) << ','
       << fmt(r.snr_db) << ',' << fmt(r.es_mean) << ',' << fmt(r.es_std_t) << '\n';
}

std::vector<QualityReport> read_quality_csv(std::istream &is) {
  std::vector<QualityReport> rows;
  std::string line;
  if (!std::getline(is, line) || line != kQualityCsvHeader)
    throw ValidationError("quality csv: missing or unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw ValidationError("quality csv: expected 8 columns in '" + line + "'");
    QualityReport r;
    r.dataset = f[0];
    r.method = f[1];
    double *vals[] = {&r.mse, &r.psnr_db, &r.ssim, &r.snr_db, &r.es_mean, &r.es_std_t};
    for (std::size_t i = 0; i < 6; ++i) *vals[i] = std::stod(f[2 + i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace kforge
