#pragma once

// Mapping products: RGB point clouds stacked on the estimated net cylinder
// and a multi-resolution log-odds occupancy octree.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "netpen/geometry.hpp"
#include "netpen/globalpose.hpp"
#include "netpen/image.hpp"

namespace netpen {

struct ColoredPoint {
  Point3 position = Point3::Zero();  ///< pen frame
  Rgb color{};
  std::uint32_t frame_id = 0;
};

struct ColoredPointCloud {
  std::vector<ColoredPoint> points;

  std::size_t size() const { return points.size(); }
  void append(const ColoredPointCloud& other) {
    points.insert(points.end(), other.points.begin(), other.points.end());
  }
};

/// Casts every stride-th pixel ray from the camera pose and keeps its nearest
/// forward intersection with the pen cylinder of radius R.
ColoredPointCloud project_to_cylinder(const RgbImage& image, const GlobalPose& pose,
                                      const Camera& K, double R, int stride,
                                      std::uint32_t frame_id = 0);

struct InverseSensorModel {
  double hit_logodds = 0.85;
  double miss_logodds = -0.4;
  double max_ray_range = 8.0;

  void validate() const;
};

inline constexpr double kLogOddsMin = -4.0;
inline constexpr double kLogOddsMax = 4.0;

/// Integer voxel coordinate at some tree level.
struct VoxelKey {
  std::int32_t x = 0, y = 0, z = 0;

  bool operator==(const VoxelKey&) const = default;
  VoxelKey parent(int levels = 1) const { return {x >> levels, y >> levels, z >> levels}; }
};

struct LeafData {
  double logodds = 0;
  std::uint32_t observations = 0;
  std::uint32_t hits = 0;
};

/// Log-odds occupancy octree over an axis-aligned pen-frame volume.
///
/// Leaves live at level 0. A node at level k covers a block of 2^k leaves per
/// axis and stores the maximum over its block, counting unobserved leaves at
/// the prior value 0. Storage is a hashed (linear) octree, one table per level.
///
/// Const members may run concurrently; inserts need exclusive access.
class OccupancyMap {
public:
  OccupancyMap(const Point3& min_corner, const Point3& max_corner, double resolution);

  /// Volume covering a pen of the given radius and depth with a margin.
  static OccupancyMap for_pen(double pen_radius, double pen_depth, double resolution = 0.05);

  double resolution() const { return resolution_; }
  int tree_depth() const { return depth_; }
  const Point3& min_corner() const { return min_; }
  const Point3& max_corner() const { return max_; }

  bool contains(const Point3& p) const;
  VoxelKey key_of(const Point3& p) const;
  Point3 center_of(const VoxelKey& leaf) const;

  /// Level 0 is the leaf; level k the max over the enclosing 2^k block.
  double query(const Point3& p, int level = 0) const;
  double node_value(const VoxelKey& key, int level) const;
  const LeafData* leaf(const VoxelKey& key) const;
  std::size_t leaf_count() const { return leaves_.size(); }

  void insert_depth_image(const GlobalPose& pose, const DepthImage& depth, const Camera& K,
                          const InverseSensorModel& model, int ray_stride);

  /// Rays from origin to each endpoint, integrated as one scan: every voxel is
  /// updated at most once, and a voxel both hit and traversed counts as hit.
  void insert_rays(const Point3& origin, std::span<const Point3> endpoints,
                   const InverseSensorModel& model);

  void for_each_leaf(const std::function<void(const VoxelKey&, const LeafData&)>& fn) const;

  /// Leaf centers with log-odds > 0 observed at least min_observations times.
  std::vector<Point3> occupied_leaf_centers(std::uint32_t min_observations = 3) const;

  /// Exhaustive parent == max(children) check over every stored node.
  bool aggregates_consistent() const;

  void save(const std::filesystem::path& path) const;
  static OccupancyMap load(const std::filesystem::path& path);

private:
  static std::uint64_t pack(const VoxelKey& k) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x)) << 42) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y)) << 21) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.z));
  }
  static VoxelKey unpack(std::uint64_t p) {
    constexpr std::uint64_t mask = (1u << 21) - 1;
    return {static_cast<std::int32_t>((p >> 42) & mask), static_cast<std::int32_t>((p >> 21) & mask),
            static_cast<std::int32_t>(p & mask)};
  }
  bool key_in_volume(const VoxelKey& k) const;
  double child_max(const VoxelKey& parent_key, int parent_level) const;
  void refresh_aggregates(std::vector<std::uint64_t> touched_leaves);
  void trace(const Point3& from, const Point3& to, std::vector<std::uint64_t>& out) const;

  Point3 min_;
  Point3 max_;
  double resolution_;
  int depth_;
  VoxelKey leaf_extent_;  ///< leaves per axis inside the volume
  std::unordered_map<std::uint64_t, LeafData> leaves_;
  std::vector<std::unordered_map<std::uint64_t, double>> levels_;  ///< index k-1 for level k
};

enum class PlyFormat { Ascii, BinaryLittleEndian };

void write_ply(const std::filesystem::path& path, const ColoredPointCloud& cloud,
               PlyFormat format = PlyFormat::BinaryLittleEndian);
ColoredPointCloud read_ply(const std::filesystem::path& path);

/// Occupied leaf centers colored by depth.
ColoredPointCloud map_surface_cloud(const OccupancyMap& map, std::uint32_t min_observations = 3);

}  // namespace netpen
