#include "netpen/netfft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace netpen {

namespace {

constexpr double kHarmonicRatio = 0.25;
constexpr double kPartnerBand[2] = {0.7, 1.5};
constexpr double kPartnerCos = 0.34;  // within 20 degrees of perpendicular
constexpr double kPartnerRatio = 0.5;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int wrap_index(int k, int n) { return ((k % n) + n) % n; }

Eigen::ArrayXd periodic_hann(int n) {
  Eigen::ArrayXd w(n);
  for (int i = 0; i < n; ++i) w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Magnitude of the 2D DFT of a real, square, row-major array. Element (ky, kx).
Eigen::ArrayXXd dft_magnitude(const Eigen::ArrayXXd& x) {
  const int n = static_cast<int>(x.rows());
  thread_local Eigen::FFT<double> fft;
  ComplexMatrix F(n, n);
  std::vector<double> row_in(n);
  std::vector<std::complex<double>> buf_out(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) row_in[c] = x(r, c);
    fft.fwd(buf_out, row_in);
    for (int c = 0; c < n; ++c) F(r, c) = buf_out[c];
  }
  std::vector<std::complex<double>> col_in(n);
  Eigen::ArrayXXd mag(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) col_in[r] = F(r, c);
    fft.fwd(buf_out, col_in);
    for (int r = 0; r < n; ++r) mag(r, c) = std::sqrt(std::norm(buf_out[r]));
  }
  return mag;
}

// Strict maximum over the full 8-neighborhood, DC disk included, so leakage
// sloping away from DC never qualifies.
bool is_local_max(const Eigen::ArrayXXd& mag, int ky, int kx) {
  const int n = static_cast<int>(mag.rows());
  const double m = mag(wrap_index(ky, n), wrap_index(kx, n));
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if ((dx || dy) && mag(wrap_index(ky + dy, n), wrap_index(kx + dx, n)) >= m) return false;
  return true;
}

// Offset of the stationary point of a quadratic fitted to a 3x3 neighborhood
// of samples L(dy, dx), dx/dy in {-1, 0, 1}.
Eigen::Vector2d refine_peak(const Eigen::Matrix3d& L) {
  auto at = [&](int dx, int dy) { return L(dy + 1, dx + 1); };
  double sx = 0, sy = 0, sxy = 0, s1x = 0, s0x = 0, s1y = 0, s0y = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const double l = at(dx, dy);
      sx += dx * l;
      sy += dy * l;
      sxy += dx * dy * l;
      (dx != 0 ? s1x : s0x) += l;
      (dy != 0 ? s1y : s0y) += l;
    }
  const double b = sx / 6.0;
  const double c = sy / 6.0;
  const double e = sxy / 4.0;
  const double d = s1x / 6.0 - s0x / 3.0;
  const double g = s1y / 6.0 - s0y / 3.0;

  Eigen::Vector2d offset;
  const double det = 4.0 * d * g - e * e;
  if (d < 0 && det > 0) {
    Eigen::Matrix2d H;
    H << 2 * d, e, e, 2 * g;
    offset = H.ldlt().solve(Eigen::Vector2d(-b, -c));
  } else {
    // separable three-point parabola through the center row / column
    auto parabola = [](double lm, double l0, double lp) {
      const double den = lm - 2 * l0 + lp;
      return den < 0 ? 0.5 * (lm - lp) / den : 0.0;
    };
    offset << parabola(at(-1, 0), at(0, 0), at(1, 0)), parabola(at(0, -1), at(0, 0), at(0, 1));
  }
  return offset.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace

void FftConfig::validate() const {
  if (patch_size < 32 || !is_power_of_two(patch_size))
    throw Error(ErrorCode::InvalidArgument, "patch_size must be a power of two >= 32");
  if (patch_stride <= 0) throw Error(ErrorCode::InvalidArgument, "patch_stride must be positive");
  if (!(grid_cell > 0)) throw Error(ErrorCode::InvalidArgument, "grid_cell must be positive");
  if (!(min_period_px > 2 && min_period_px < max_period_px && max_period_px < patch_size / 2.0))
    throw Error(ErrorCode::InvalidArgument, "period band must satisfy 2 < min < max < patch/2");
  if (!(confidence_threshold >= 0))
    throw Error(ErrorCode::InvalidArgument, "confidence_threshold must be non-negative");
  if (dc_radius_bins < 0) throw Error(ErrorCode::InvalidArgument, "dc_radius_bins must be >= 0");
}

std::optional<PatchEstimate> estimate_patch_distance(const GrayImage& patch, const Camera& K,
                                                     const FftConfig& cfg) {
  cfg.validate();
  const int n = cfg.patch_size;
  if (patch.rows() != n || patch.cols() != n)
    throw Error(ErrorCode::BadPatchSize, "patch must be " + std::to_string(n) + " px square");

  thread_local Eigen::ArrayXXd window;
  if (window.rows() != n) {
    const Eigen::ArrayXd w = periodic_hann(n);
    window = (w.matrix() * w.matrix().transpose()).array();
  }
  Eigen::ArrayXXd x = patch.cast<double>();
  x -= x.mean();
  x *= window;
  const Eigen::ArrayXXd mag = dft_magnitude(x);

  const double rmin = std::max<double>(n / cfg.max_period_px, cfg.dc_radius_bins + 1e-9);
  const double rmax = n / cfg.min_period_px;
  const double rmin2 = rmin * rmin, rmax2 = rmax * rmax;

  std::vector<double> band;
  band.reserve(static_cast<std::size_t>(n) * n / 2);
  // Strongest in-band local maximum overall and among mostly vertical
  // frequency vectors. Half-plane only; the spectrum of a real patch is
  // conjugate-symmetric.
  struct Peak {
    double m = -1;
    int kx = 0, ky = 0;
  } best, best_vertical;
  for (int ky = 0; ky <= n / 2; ++ky) {
    for (int kx = -n / 2 + 1; kx < n / 2; ++kx) {
      if (ky == 0 && kx <= 0) continue;
      const double rho2 = double(kx) * kx + double(ky) * ky;
      if (rho2 < rmin2 || rho2 > rmax2) continue;
      const double m = mag(wrap_index(ky, n), wrap_index(kx, n));
      band.push_back(m);
      const bool vertical = ky > std::abs(kx);
      if ((m > best.m || (vertical && m > best_vertical.m)) && is_local_max(mag, ky, kx)) {
        if (m > best.m) best = {m, kx, ky};
        if (vertical && m > best_vertical.m) best_vertical = {m, kx, ky};
      }
    }
  }
  if (band.empty() || best.m <= 1e-6 * n * n) return std::nullopt;

  auto mid = band.begin() + band.size() / 2;
  std::nth_element(band.begin(), mid, band.end());
  const double median = std::max(*mid, 1e-12 * best.m);
  if (cfg.prefer_vertical && best_vertical.m / median >= cfg.confidence_threshold) best = best_vertical;
  // Thin twine puts nearly as much energy in the 2nd and 3rd harmonics as in
  // the fundamental; step down to a subharmonic that is itself a peak.
  for (const int div : {3, 2}) {
    const int cx = static_cast<int>(std::lround(double(best.kx) / div));
    const int cy = static_cast<int>(std::lround(double(best.ky) / div));
    Peak sub;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int kx = cx + dx, ky = cy + dy;
        const double rho2 = double(kx) * kx + double(ky) * ky;
        if (rho2 < rmin2 || rho2 > rmax2) continue;
        const double m = mag(wrap_index(ky, n), wrap_index(kx, n));
        if (m > sub.m && is_local_max(mag, ky, kx)) sub = {m, kx, ky};
      }
    if (sub.m >= kHarmonicRatio * best.m) {
      best = sub;
      break;
    }
  }
  const double peak = best.m;
  const int peak_kx = best.kx, peak_ky = best.ky;
  const double confidence = peak / median;
  if (confidence < cfg.confidence_threshold) return std::nullopt;

  // A mesh has two twine families. Require a peak for the crossing family,
  // roughly perpendicular and at a comparable frequency; edges of occluders
  // only produce one.
  const double rho0 = std::hypot(double(peak_kx), double(peak_ky));
  bool partner = false;
  for (int ky = 0; ky <= n / 2 && !partner; ++ky) {
    for (int kx = -n / 2 + 1; kx < n / 2; ++kx) {
      if (ky == 0 && kx <= 0) continue;
      const double rho = std::hypot(double(kx), double(ky));
      if (rho < kPartnerBand[0] * rho0 || rho > kPartnerBand[1] * rho0) continue;
      if (std::abs(kx * peak_kx + ky * peak_ky) > kPartnerCos * rho * rho0) continue;
      const double m = mag(wrap_index(ky, n), wrap_index(kx, n));
      if (m >= kPartnerRatio * cfg.confidence_threshold * median && is_local_max(mag, ky, kx)) {
        partner = true;
        break;
      }
    }
  }
  if (!partner) return std::nullopt;

  Eigen::Matrix3d L;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      L(dy + 1, dx + 1) =
          std::log(mag(wrap_index(peak_ky + dy, n), wrap_index(peak_kx + dx, n)) + 1e-12 * peak);
  const Eigen::Vector2d offset = refine_peak(L);
  const double kx = peak_kx + offset.x();
  const double ky = peak_ky + offset.y();
  const double rho = std::hypot(kx, ky);

  PatchEstimate est;
  est.period_px = n / rho;
  est.horizontal = std::abs(kx) >= std::abs(ky);
  const double f = est.horizontal ? K.fx : K.fy;
  est.depth = f * cfg.grid_cell / est.period_px;
  est.confidence = confidence;
  return est;
}

std::vector<SparseDepthPrior> extract_priors(const GrayImage& image, const Camera& K,
                                             const FftConfig& cfg) {
  cfg.validate();
  const int n = cfg.patch_size;
  if (image.rows() < n || image.cols() < n)
    throw Error(ErrorCode::ImageTooSmall, "image smaller than one patch");

  std::vector<SparseDepthPrior> priors;
  for (int y0 = 0; y0 + n <= image.rows(); y0 += cfg.patch_stride) {
    for (int x0 = 0; x0 + n <= image.cols(); x0 += cfg.patch_stride) {
      const GrayImage patch = image.block(y0, x0, n, n);
      const auto est = estimate_patch_distance(patch, K, cfg);
      if (!est) continue;
      const double u = x0 + n / 2;
      const double v = y0 + n / 2;
      if (!K.contains(u, v)) continue;
      priors.push_back({u, v, est->depth, est->confidence});
    }
  }
  return priors;
}

WeightedPoints priors_to_points(const std::vector<SparseDepthPrior>& priors, const Camera& K) {
  WeightedPoints out;
  out.points.reserve(priors.size());
  out.weights.reserve(priors.size());
  for (const auto& p : priors) {
    out.points.push_back(backproject(K, p.u, p.v, p.depth));
    out.weights.push_back(p.confidence);
  }
  return out;
}

}  // namespace netpen
