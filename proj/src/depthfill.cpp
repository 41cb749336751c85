#include "netpen/depthfill.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "netpen/binary_io.hpp"
#include "netpen/image_io.hpp"
#include "netpen/relpose.hpp"

namespace netpen {

namespace {

void require_priors(std::span<const SparseDepthPrior> priors) {
  if (priors.empty()) throw Error(ErrorCode::NoPriors, "depth completion needs at least one prior");
  for (const auto& p : priors)
    if (!(p.depth > 0) || !std::isfinite(p.depth))
      throw Error(ErrorCode::NonPositiveDepth, "prior depth must be positive");
}

class ConstantMeanCompleter final : public DepthCompleter {
public:
  DepthImage complete(int width, int height, std::span<const SparseDepthPrior> priors,
                      const Camera&) const override {
    require_priors(priors);
    double num = 0, den = 0;
    for (const auto& p : priors) {
      num += p.confidence * p.depth;
      den += p.confidence;
    }
    double mean = 0;
    if (den > 0) {
      mean = num / den;
    } else {
      for (const auto& p : priors) mean += p.depth;
      mean /= static_cast<double>(priors.size());
    }
    DepthImage out(width, height);
    out.values.setConstant(mean);
    out.valid.setConstant(true);
    return out;
  }
};

class IdwCompleter final : public DepthCompleter {
public:
  IdwCompleter(double power, int neighbors) : power_(power), neighbors_(neighbors) {}

  DepthImage complete(int width, int height, std::span<const SparseDepthPrior> priors,
                      const Camera&) const override {
    require_priors(priors);
    DepthImage out(width, height);
    const std::size_t k =
        neighbors_ > 0 ? std::min<std::size_t>(static_cast<std::size_t>(neighbors_), priors.size())
                       : priors.size();
    std::vector<std::pair<double, double>> d2z(priors.size());  // (squared distance, depth)
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        for (std::size_t i = 0; i < priors.size(); ++i) {
          const double du = u - priors[i].u;
          const double dv = v - priors[i].v;
          d2z[i] = {du * du + dv * dv, priors[i].depth};
        }
        if (k < priors.size())
          std::partial_sort(d2z.begin(), d2z.begin() + static_cast<std::ptrdiff_t>(k), d2z.end());
        double num = 0, den = 0, exact_sum = 0;
        int exact = 0;
        for (std::size_t i = 0; i < k; ++i) {
          if (d2z[i].first == 0) {
            exact_sum += d2z[i].second;
            ++exact;
            continue;
          }
          const double w = std::pow(d2z[i].first, -0.5 * power_);
          num += w * d2z[i].second;
          den += w;
        }
        out.values(v, u) = exact > 0 ? exact_sum / exact : num / den;
      }
    }
    out.valid.setConstant(true);
    return out;
  }

private:
  double power_;
  int neighbors_;
};

class QuadraticSurfaceCompleter final : public DepthCompleter {
public:
  explicit QuadraticSurfaceCompleter(IdwCompleter fallback) : fallback_(fallback) {}

  DepthImage complete(int width, int height, std::span<const SparseDepthPrior> priors,
                      const Camera& K) const override {
    require_priors(priors);
    if (priors.size() < 6) return fallback_.complete(width, height, priors, K);

    // Inverse depth is affine in (x/z, y/z) for any plane, so a quadratic in
    // those coordinates contains the plane exactly and adds curvature.
    std::vector<Point3> samples;
    std::vector<double> weights;
    samples.reserve(priors.size());
    for (const auto& p : priors) {
      const Point3 ray = pixel_ray(K, p.u, p.v);
      samples.emplace_back(ray.x(), ray.y(), 1.0 / p.depth);
      weights.push_back(p.confidence);
    }
    const bool any_weight = std::any_of(weights.begin(), weights.end(), [](double w) { return w > 0; });
    const QuadFit fit = fit_quadratic(samples, any_weight ? std::span<const double>(weights)
                                                          : std::span<const double>());

    DepthImage out(width, height);
    for (int v = 0; v < height; ++v) {
      const double yn = (v - K.cy) / K.fy;
      for (int u = 0; u < width; ++u) {
        const double xn = (u - K.cx) / K.fx;
        const double inv = fit(xn, yn);
        if (!(inv > 0)) return fallback_.complete(width, height, priors, K);
        out.values(v, u) = 1.0 / inv;
      }
    }
    out.valid.setConstant(true);
    return out;
  }

private:
  IdwCompleter fallback_;
};

constexpr char kDepthMagic[4] = {'N', 'P', 'D', 'F'};
constexpr char kMaskMagic[4] = {'N', 'P', 'D', 'M'};

void read_header(std::istream& is, const char (&magic)[4], const std::filesystem::path& path,
                 int& width, int& height) {
  char m[4];
  is.read(m, 4);
  if (!is || std::memcmp(m, magic, 4) != 0)
    throw Error(ErrorCode::IoError, "bad magic in " + path.string());
  width = get_le<std::uint16_t>(is);
  height = get_le<std::uint16_t>(is);
  if (!is) throw Error(ErrorCode::IoError, "truncated header in " + path.string());
}

std::filesystem::path mask_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".mask");
}

}  // namespace

void CompletionStrategy::validate() const {
  if (!(idw_power >= 1 && idw_power <= 4))
    throw Error(ErrorCode::InvalidArgument, "idw_power must lie in [1, 4]");
  if (idw_neighbors < 0) throw Error(ErrorCode::InvalidArgument, "idw_neighbors must be >= 0");
}

std::unique_ptr<DepthCompleter> make_completer(const CompletionStrategy& strategy) {
  strategy.validate();
  IdwCompleter idw(strategy.idw_power, strategy.idw_neighbors);
  switch (strategy.kind) {
    case CompletionKind::QuadraticSurface: return std::make_unique<QuadraticSurfaceCompleter>(idw);
    case CompletionKind::InverseDistanceWeighting: return std::make_unique<IdwCompleter>(idw);
    case CompletionKind::ConstantMean: return std::make_unique<ConstantMeanCompleter>();
  }
  throw Error(ErrorCode::InvalidArgument, "unknown completion strategy");
}

DepthImage complete_depth(int width, int height, std::span<const SparseDepthPrior> priors,
                          const Camera& K, const CompletionStrategy& strategy) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "empty output size");
  return make_completer(strategy)->complete(width, height, priors, K);
}

double depth_rmse(const DepthImage& a, const DepthImage& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(ErrorCode::DimensionMismatch, "depth images differ in size");
  const auto both = a.valid && b.valid;
  const auto n = both.count();
  if (n == 0) throw Error(ErrorCode::NoOverlap, "no pixel valid in both images");
  const double ss = both.select((a.values - b.values).square(), 0.0).sum();
  return std::sqrt(ss / static_cast<double>(n));
}

void write_depth_raster(const std::filesystem::path& path, const DepthImage& depth) {
  if (depth.width() > 0xFFFF || depth.height() > 0xFFFF)
    throw Error(ErrorCode::InvalidArgument, "depth raster too large for header");
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    os.write(kDepthMagic, 4);
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(depth.width()));
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(depth.height()));
    for (int v = 0; v < depth.height(); ++v)
      for (int u = 0; u < depth.width(); ++u)
        put_le<float>(os, depth.valid(v, u) ? static_cast<float>(depth.values(v, u)) : 0.0f);
    if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }
  const auto mpath = mask_path(path);
  std::ofstream os(mpath, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + mpath.string());
  os.write(kMaskMagic, 4);
  put_le<std::uint16_t>(os, static_cast<std::uint16_t>(depth.width()));
  put_le<std::uint16_t>(os, static_cast<std::uint16_t>(depth.height()));
  const std::size_t n = static_cast<std::size_t>(depth.width()) * depth.height();
  std::vector<unsigned char> bits((n + 7) / 8, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (depth.valid.data()[i]) bits[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
  os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + mpath.string());
}

DepthImage read_depth_raster(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  int w = 0, h = 0;
  read_header(is, kDepthMagic, path, w, h);
  DepthImage out(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) out.values(v, u) = get_le<float>(is);
  if (!is) throw Error(ErrorCode::IoError, "truncated raster " + path.string());

  const auto mpath = mask_path(path);
  std::ifstream ms(mpath, std::ios::binary);
  if (!ms) throw Error(ErrorCode::IoError, "cannot read " + mpath.string());
  int mw = 0, mh = 0;
  read_header(ms, kMaskMagic, mpath, mw, mh);
  if (mw != w || mh != h) throw Error(ErrorCode::DimensionMismatch, "mask size mismatch " + mpath.string());
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<unsigned char> bits((n + 7) / 8);
  ms.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!ms) throw Error(ErrorCode::IoError, "truncated mask " + mpath.string());
  for (std::size_t i = 0; i < n; ++i) out.valid.data()[i] = (bits[i / 8] >> (i % 8)) & 1u;
  return out;
}

void write_depth_png_mm(const std::filesystem::path& path, const DepthImage& depth) {
  std::vector<std::uint16_t> mm(static_cast<std::size_t>(depth.width()) * depth.height(), 0);
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u)
      if (depth.valid(v, u))
        mm[static_cast<std::size_t>(v) * depth.width() + u] = static_cast<std::uint16_t>(
            std::clamp(std::lround(depth.values(v, u) * 1000.0), 0l, 65535l));
  write_png16(path, depth.width(), depth.height(), mm);
}

}  // namespace netpen
