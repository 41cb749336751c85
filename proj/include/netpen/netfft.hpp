#pragma once

// Patch-wise spectral distance estimation to a net with a known mesh pitch.
//
// A square mesh seen by a pinhole camera produces a periodic texture whose
// pixel period p relates to depth along the optical axis by z = f * L / p,
// where L is the physical mesh pitch. Each patch is Hann-windowed, its 2D DFT
// magnitude searched for the strongest peak inside a plausible period band,
// and the peak refined to sub-bin accuracy.

#include <optional>
#include <vector>

#include "netpen/geometry.hpp"
#include "netpen/image.hpp"

namespace netpen {

struct FftConfig {
  int patch_size = 128;
  int patch_stride = 128;
  double grid_cell = 0.02;
  double min_period_px = 4.0;
  double max_period_px = 40.0;
  double confidence_threshold = 8.0;
  int dc_radius_bins = 3;
  /// Use the peak of the horizontal twines (frequency along image y) whenever
  /// it passes the threshold. With zero roll and pitch its period is free of
  /// yaw foreshortening; otherwise the strongest peak is used.
  bool prefer_vertical = true;

  /// Throws ErrorCode::InvalidArgument on violated invariants.
  void validate() const;
};

struct SparseDepthPrior {
  double u = 0;
  double v = 0;
  double depth = 0;
  double confidence = 0;

  bool operator==(const SparseDepthPrior&) const = default;
};

struct PatchEstimate {
  double depth = 0;
  double confidence = 0;
  double period_px = 0;
  bool horizontal = true;  ///< peak frequency vector mostly along image x
};

/// Depth of a single square patch, or nothing when the spectral peak is too
/// weak (occlusion, blur, no net in view).
std::optional<PatchEstimate> estimate_patch_distance(const GrayImage& patch, const Camera& K,
                                                     const FftConfig& cfg);

/// Tiles the image at cfg.patch_stride and returns one prior per accepted
/// patch, centered at (x0 + patch/2, y0 + patch/2), in row-major patch order.
std::vector<SparseDepthPrior> extract_priors(const GrayImage& image, const Camera& K,
                                             const FftConfig& cfg);

struct WeightedPoints {
  std::vector<Point3> points;
  std::vector<double> weights;
};

/// Backprojects priors into camera-frame points; confidences become weights.
WeightedPoints priors_to_points(const std::vector<SparseDepthPrior>& priors, const Camera& K);

}  // namespace netpen
