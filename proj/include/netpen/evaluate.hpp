#pragma once

// Metric evaluation of a run against simulator truth, the sliding-window
// smoother used for plots, and plot-ready CSV emission.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace netpen {

/// Centered moving average. Near the ends the window shrinks symmetrically,
/// so element i averages indices [i - h, i + h] with h = min(w/2, i, n-1-i).
std::vector<double> smooth(std::span<const double> series, int window);

/// Estimated quantities of one frame. NaN marks an unavailable estimate.
struct FrameEstimate {
  int index = 0;
  double t = 0;
  int prior_count = 0;
  double distance = 0, yaw_rel = 0, pitch_rel = 0;              ///< dense depth relpose
  double distance_fft = 0, yaw_fft = 0, pitch_fft = 0;          ///< FFT points relpose
  double dvl_distance = 0, dvl_yaw = 0, dvl_pitch = 0;          ///< from the four beam ranges
  double echo_range = 0;
  double r = 0, theta = 0, z = 0, psi = 0;
  double r_pred = 0, r_fit = 0, fit_residual = 0;
  double imu_yaw = 0;
  bool degraded = false;
};

struct FrameTruth {
  int index = 0;
  double t = 0;
  double distance = 0, yaw_rel = 0, pitch_rel = 0;
  double r = 0, theta = 0, z = 0, psi = 0;
};

struct QuantityError {
  double rmse = 0;
  double max_abs = 0;
  int count = 0;  ///< frames with a finite estimate
};

struct EvalOptions {
  std::vector<double> setpoint_changes;  ///< s
  std::vector<double> segment_bounds;    ///< segment end times, ascending
  double radial_threshold = 0.1;         ///< m
  double change_window = 2.0;            ///< s
  /// Acoustic gross-outlier scale; <= 0 uses 1.4826 * MAD of the errors.
  double acoustic_sigma = 0.0;
};

struct Metrics {
  std::map<std::string, QuantityError> quantities;
  std::vector<QuantityError> segment_distance;      ///< dense depth distance per segment
  std::vector<QuantityError> segment_distance_fft;
  std::vector<double> segment_commanded;            ///< mean true distance per segment

  double radial_within_fraction = 0;  ///< frames with |r_pred - r_fit| below threshold
  int radial_excursions = 0;
  int radial_excursions_off_schedule = 0;

  double yaw_max_residual = 0;  ///< max |aligned imu - aligned estimate| [rad]
  double yaw_drift_rate = 0;    ///< slope of that residual [rad/s]

  double dvl_sigma = 0, echo_sigma = 0;
  int dvl_outliers = 0, echo_outliers = 0;
  int degraded_frames = 0;
  int frames = 0;
};

/// Throws LengthMismatch when the series differ in length or index.
Metrics evaluate(std::span<const FrameEstimate> est, std::span<const FrameTruth> truth,
                 const EvalOptions& options);

/// Unwrapped series minus its first value.
std::vector<double> align_to_initial(std::span<const double> angles);

/// distances.csv, relative_angles.csv, trajectory_topdown.csv,
/// radial_error.csv and yaw_comparison.csv.
void write_plot_csvs(const std::filesystem::path& dir, std::span<const FrameEstimate> est,
                     std::span<const FrameTruth> truth, int smoothing_window);

}  // namespace netpen
