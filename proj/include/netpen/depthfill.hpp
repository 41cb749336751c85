#pragma once

// Sparse-prior to dense metric depth completion.
//
// DepthCompleter is the extension point for any completion model; the
// built-in strategies are closed-form and deterministic.

#include <filesystem>
#include <memory>
#include <span>

#include "netpen/geometry.hpp"
#include "netpen/image.hpp"
#include "netpen/netfft.hpp"

namespace netpen {

enum class CompletionKind { QuadraticSurface, InverseDistanceWeighting, ConstantMean };

struct CompletionStrategy {
  CompletionKind kind = CompletionKind::QuadraticSurface;
  double idw_power = 2.0;  ///< in [1, 4]
  int idw_neighbors = 0;   ///< 0 uses every prior

  void validate() const;
};

class DepthCompleter {
public:
  virtual ~DepthCompleter() = default;
  virtual DepthImage complete(int width, int height, std::span<const SparseDepthPrior> priors,
                              const Camera& K) const = 0;
};

std::unique_ptr<DepthCompleter> make_completer(const CompletionStrategy& strategy);

/// QuadraticSurface fits inverse depth as a quadratic in normalized image
/// coordinates (x/z, y/z), which represents planes exactly; it falls back to
/// inverse-distance weighting with fewer than six priors. Every output pixel
/// is valid.
DepthImage complete_depth(int width, int height, std::span<const SparseDepthPrior> priors,
                          const Camera& K, const CompletionStrategy& strategy = {});

/// RMS difference over pixels valid in both images.
double depth_rmse(const DepthImage& a, const DepthImage& b);

// Raster format: 8-byte header {char[4] "NPDF", u16 width, u16 height} then
// width*height little-endian float32 values, row-major. The validity mask is
// written to "<path>.mask": header {"NPDM", u16, u16} then row-major bits,
// least-significant bit first.
void write_depth_raster(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_depth_raster(const std::filesystem::path& path);

/// 16-bit grayscale PNG of depth in millimeters, 0 where invalid.
void write_depth_png_mm(const std::filesystem::path& path, const DepthImage& depth);

}  // namespace netpen
