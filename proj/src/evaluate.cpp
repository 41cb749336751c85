#include "netpen/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "netpen/error.hpp"
#include "netpen/geometry.hpp"

namespace netpen {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Accum {
  double ss = 0;
  double max_abs = 0;
  int n = 0;

  void add(double e) {
    if (!std::isfinite(e)) return;
    ss += e * e;
    max_abs = std::max(max_abs, std::abs(e));
    ++n;
  }
  QuantityError result() const { return {n > 0 ? std::sqrt(ss / n) : 0.0, max_abs, n}; }
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

double robust_sigma(const std::vector<double>& errors) {
  std::vector<double> finite;
  for (double e : errors)
    if (std::isfinite(e)) finite.push_back(e);
  const double m = median(finite);
  for (double& e : finite) e = std::abs(e - m);
  return 1.4826 * median(finite);
}

int count_beyond(const std::vector<double>& errors, double limit) {
  return static_cast<int>(std::count_if(errors.begin(), errors.end(),
                                        [&](double e) { return std::isfinite(e) && std::abs(e) > limit; }));
}

// Moving average over finite entries only; NaN where the window has none.
std::vector<double> smooth_finite(std::span<const double> x, int window) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(x.size(), kNaN);
  for (int i = 0; i < n; ++i) {
    const int h = std::min({window / 2, i, n - 1 - i});
    double s = 0;
    int c = 0;
    for (int j = i - h; j <= i + h; ++j)
      if (std::isfinite(x[static_cast<std::size_t>(j)])) {
        s += x[static_cast<std::size_t>(j)];
        ++c;
      }
    if (c > 0) out[static_cast<std::size_t>(i)] = s / c;
  }
  return out;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os.precision(10);
  return os;
}

// Theta and psi estimates live in a pen frame whose angular origin is the
// first frame; shifting by the first truth angle makes them comparable.
double angular_offset(std::span<const FrameEstimate> est, std::span<const FrameTruth> truth) {
  for (std::size_t i = 0; i < est.size(); ++i)
    if (std::isfinite(est[i].theta)) return angle_diff(truth[i].theta, est[i].theta);
  return 0.0;
}

}  // namespace

std::vector<double> smooth(std::span<const double> series, int window) {
  if (window < 1 || window % 2 == 0) throw Error(ErrorCode::EvenWindow, "window must be odd and >= 1");
  if (static_cast<std::size_t>(window) > series.size())
    throw Error(ErrorCode::WindowTooLarge, "window longer than the series");
  const int n = static_cast<int>(series.size());
  std::vector<double> out(series.size());
  for (int i = 0; i < n; ++i) {
    const int h = std::min({window / 2, i, n - 1 - i});
    if (h == 0) {
      out[static_cast<std::size_t>(i)] = series[static_cast<std::size_t>(i)];
      continue;
    }
    double s = 0;
    for (int j = i - h; j <= i + h; ++j) s += series[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s / (2 * h + 1);
  }
  return out;
}

std::vector<double> align_to_initial(std::span<const double> angles) {
  std::vector<double> out(angles.size(), kNaN);
  double first = kNaN, prev = kNaN, acc = 0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double a = angles[i];
    if (!std::isfinite(a)) continue;
    if (!std::isfinite(first)) {
      first = prev = a;
      acc = 0;
    } else {
      acc += angle_diff(a, prev);
      prev = a;
    }
    out[i] = acc;
  }
  return out;
}

Metrics evaluate(std::span<const FrameEstimate> est, std::span<const FrameTruth> truth,
                 const EvalOptions& opt) {
  if (est.size() != truth.size())
    throw Error(ErrorCode::LengthMismatch, "estimate and truth series differ in length");
  for (std::size_t i = 0; i < est.size(); ++i)
    if (est[i].index != truth[i].index)
      throw Error(ErrorCode::LengthMismatch, "estimate and truth indices differ at " + std::to_string(i));

  Metrics m;
  m.frames = static_cast<int>(est.size());
  const double offset = angular_offset(est, truth);

  std::map<std::string, Accum> acc;
  const std::size_t nseg = opt.segment_bounds.empty() ? 1 : opt.segment_bounds.size();
  std::vector<Accum> seg(nseg), seg_fft(nseg);
  std::vector<double> seg_truth_sum(nseg, 0.0);
  std::vector<int> seg_n(nseg, 0);
  std::vector<double> dvl_err, echo_err;
  int radial_ok = 0;

  for (std::size_t i = 0; i < est.size(); ++i) {
    const auto& e = est[i];
    const auto& g = truth[i];
    acc["distance"].add(e.distance - g.distance);
    acc["distance_fft"].add(e.distance_fft - g.distance);
    acc["yaw_rel"].add(e.yaw_rel - g.yaw_rel);
    acc["pitch_rel"].add(e.pitch_rel - g.pitch_rel);
    acc["yaw_fft"].add(e.yaw_fft - g.yaw_rel);
    acc["dvl_distance"].add(e.dvl_distance - g.distance);
    acc["dvl_yaw"].add(e.dvl_yaw - g.yaw_rel);
    acc["echo_range"].add(e.echo_range - g.distance);
    acc["r"].add(e.r - g.r);
    acc["theta"].add(angle_diff(e.theta + offset, g.theta));
    acc["z"].add(e.z - g.z);
    acc["psi"].add(angle_diff(e.psi + offset, g.psi));
    dvl_err.push_back(e.dvl_distance - g.distance);
    echo_err.push_back(e.echo_range - g.distance);
    if (e.degraded) ++m.degraded_frames;

    std::size_t s = 0;
    while (s + 1 < nseg && g.t >= opt.segment_bounds[s] - 1e-9) ++s;
    seg[s].add(e.distance - g.distance);
    seg_fft[s].add(e.distance_fft - g.distance);
    seg_truth_sum[s] += g.distance;
    ++seg_n[s];

    const double radial = std::abs(e.r_pred - e.r_fit);
    if (std::isfinite(radial) && radial < opt.radial_threshold) {
      ++radial_ok;
    } else {
      ++m.radial_excursions;
      const bool near_change = std::any_of(opt.setpoint_changes.begin(), opt.setpoint_changes.end(),
                                           [&](double tc) { return std::abs(g.t - tc) <= opt.change_window; });
      if (!near_change) ++m.radial_excursions_off_schedule;
    }
  }
  for (const auto& [k, a] : acc) m.quantities[k] = a.result();
  for (std::size_t s = 0; s < nseg; ++s) {
    m.segment_distance.push_back(seg[s].result());
    m.segment_distance_fft.push_back(seg_fft[s].result());
    m.segment_commanded.push_back(seg_n[s] > 0 ? seg_truth_sum[s] / seg_n[s] : kNaN);
  }
  m.radial_within_fraction = est.empty() ? 0.0 : static_cast<double>(radial_ok) / est.size();

  std::vector<double> psi_est(est.size()), psi_imu(est.size()), t(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    psi_est[i] = est[i].psi;
    psi_imu[i] = est[i].imu_yaw;
    t[i] = est[i].t;
  }
  const auto a_est = align_to_initial(psi_est);
  const auto a_imu = align_to_initial(psi_imu);
  double st = 0, sr = 0, stt = 0, str = 0;
  int n = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double res = a_imu[i] - a_est[i];
    if (!std::isfinite(res)) continue;
    m.yaw_max_residual = std::max(m.yaw_max_residual, std::abs(res));
    st += t[i];
    sr += res;
    stt += t[i] * t[i];
    str += t[i] * res;
    ++n;
  }
  const double denom = n * stt - st * st;
  m.yaw_drift_rate = n > 1 && denom > 0 ? (n * str - st * sr) / denom : 0.0;

  m.dvl_sigma = opt.acoustic_sigma > 0 ? opt.acoustic_sigma : robust_sigma(dvl_err);
  m.echo_sigma = opt.acoustic_sigma > 0 ? opt.acoustic_sigma : robust_sigma(echo_err);
  m.dvl_outliers = count_beyond(dvl_err, 3.0 * m.dvl_sigma);
  m.echo_outliers = count_beyond(echo_err, 3.0 * m.echo_sigma);
  return m;
}

void write_plot_csvs(const std::filesystem::path& dir, std::span<const FrameEstimate> est,
                     std::span<const FrameTruth> truth, int window) {
  if (est.size() != truth.size())
    throw Error(ErrorCode::LengthMismatch, "estimate and truth series differ in length");
  if (window < 1 || window % 2 == 0) throw Error(ErrorCode::EvenWindow, "window must be odd and >= 1");
  if (static_cast<std::size_t>(window) > est.size() && !est.empty())
    throw Error(ErrorCode::WindowTooLarge, "window longer than the series");
  const std::size_t n = est.size();
  const double offset = angular_offset(est, truth);

  auto column = [&](auto getter) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = getter(i);
    return v;
  };
  const auto dist_s = smooth_finite(column([&](std::size_t i) { return est[i].distance; }), window);
  const auto fft_s = smooth_finite(column([&](std::size_t i) { return est[i].distance_fft; }), window);
  const auto yaw_s = smooth_finite(column([&](std::size_t i) { return est[i].yaw_rel; }), window);
  const auto pitch_s = smooth_finite(column([&](std::size_t i) { return est[i].pitch_rel; }), window);

  {
    auto os = open_csv(dir / "distances.csv");
    os << "t,truth,depthmap,depthmap_smoothed,fft,fft_smoothed,dvl,echo\n";
    for (std::size_t i = 0; i < n; ++i)
      os << est[i].t << ',' << truth[i].distance << ',' << est[i].distance << ',' << dist_s[i] << ','
         << est[i].distance_fft << ',' << fft_s[i] << ',' << est[i].dvl_distance << ','
         << est[i].echo_range << '\n';
  }
  {
    auto os = open_csv(dir / "relative_angles.csv");
    os << "t,yaw_truth_deg,yaw_deg,yaw_smoothed_deg,yaw_dvl_deg,pitch_truth_deg,pitch_deg,"
          "pitch_smoothed_deg,pitch_dvl_deg\n";
    for (std::size_t i = 0; i < n; ++i)
      os << est[i].t << ',' << rad2deg(truth[i].yaw_rel) << ',' << rad2deg(est[i].yaw_rel) << ','
         << rad2deg(yaw_s[i]) << ',' << rad2deg(est[i].dvl_yaw) << ',' << rad2deg(truth[i].pitch_rel)
         << ',' << rad2deg(est[i].pitch_rel) << ',' << rad2deg(pitch_s[i]) << ','
         << rad2deg(est[i].dvl_pitch) << '\n';
  }
  {
    auto os = open_csv(dir / "trajectory_topdown.csv");
    os << "t,x,y,x_truth,y_truth,degraded\n";
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p = cyl_to_cart(est[i].r, est[i].theta + offset);
      const Point2 q = cyl_to_cart(truth[i].r, truth[i].theta);
      os << est[i].t << ',' << p.x() << ',' << p.y() << ',' << q.x() << ',' << q.y() << ','
         << (est[i].degraded ? 1 : 0) << '\n';
    }
  }
  {
    auto os = open_csv(dir / "radial_error.csv");
    os << "t,r_integrated,r_fit,abs_error,r_truth\n";
    for (std::size_t i = 0; i < n; ++i)
      os << est[i].t << ',' << est[i].r_pred << ',' << est[i].r_fit << ','
         << std::abs(est[i].r_pred - est[i].r_fit) << ',' << truth[i].r << '\n';
  }
  {
    std::vector<double> psi(n), imu(n), tru(n);
    for (std::size_t i = 0; i < n; ++i) {
      psi[i] = est[i].psi;
      imu[i] = est[i].imu_yaw;
      tru[i] = truth[i].psi;
    }
    const auto a = align_to_initial(psi), b = align_to_initial(imu), c = align_to_initial(tru);
    auto os = open_csv(dir / "yaw_comparison.csv");
    os << "t,estimate_deg,imu_deg,truth_deg,imu_minus_estimate_deg\n";
    for (std::size_t i = 0; i < n; ++i)
      os << est[i].t << ',' << rad2deg(a[i]) << ',' << rad2deg(b[i]) << ',' << rad2deg(c[i]) << ','
         << rad2deg(b[i] - a[i]) << '\n';
  }
}

}  // namespace netpen
