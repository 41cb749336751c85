#include "netpen/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "netpen/binary_io.hpp"

namespace netpen {

ColoredPointCloud project_to_cylinder(const RgbImage& image, const GlobalPose& pose,
                                      const Camera& K, double R, int stride,
                                      std::uint32_t frame_id) {
  if (!(pose.r < R)) throw Error(ErrorCode::PoseOutsidePen, "pose radius outside the cylinder");
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (image.width != K.width || image.height != K.height)
    throw Error(ErrorCode::DimensionMismatch, "image does not match intrinsics");

  const Eigen::Isometry3d T = pen_from_camera(pose);
  const Point3 origin = T.translation();
  ColoredPointCloud cloud;
  for (int v = 0; v < image.height; v += stride) {
    for (int u = 0; u < image.width; u += stride) {
      const Point3 dir = T.linear() * pixel_ray<double>(K, u, v);
      const auto t = intersect_cylinder<double>(origin, dir, R);
      if (!t) continue;
      cloud.points.push_back({origin + *t * dir, image.at(u, v), frame_id});
    }
  }
  return cloud;
}

void InverseSensorModel::validate() const {
  if (!(hit_logodds > 0 && miss_logodds < 0))
    throw Error(ErrorCode::InvalidArgument, "sensor model needs hit > 0 > miss");
  if (!(max_ray_range > 0)) throw Error(ErrorCode::InvalidArgument, "max_ray_range must be positive");
}

OccupancyMap::OccupancyMap(const Point3& min_corner, const Point3& max_corner, double resolution)
    : min_(min_corner), max_(max_corner), resolution_(resolution) {
  if (!(resolution > 0)) throw Error(ErrorCode::InvalidArgument, "resolution must be positive");
  if (!(max_corner.array() > min_corner.array()).all())
    throw Error(ErrorCode::InvalidArgument, "empty map volume");
  const Eigen::Vector3d cells = ((max_ - min_) / resolution_).array().ceil();
  if (cells.maxCoeff() > double(1 << 20))
    throw Error(ErrorCode::InvalidArgument, "map volume too large for resolution");
  leaf_extent_ = {static_cast<std::int32_t>(cells.x()), static_cast<std::int32_t>(cells.y()),
                  static_cast<std::int32_t>(cells.z())};
  depth_ = 1;
  while ((1 << depth_) < cells.maxCoeff()) ++depth_;
  levels_.resize(static_cast<std::size_t>(depth_));
}

OccupancyMap OccupancyMap::for_pen(double pen_radius, double pen_depth, double resolution) {
  const double margin = 1.0;
  const double h = pen_radius + margin;
  return OccupancyMap(Point3(-h, -h, -margin), Point3(h, h, pen_depth + margin), resolution);
}

bool OccupancyMap::contains(const Point3& p) const {
  return (p.array() >= min_.array()).all() && (p.array() <= max_.array()).all();
}

bool OccupancyMap::key_in_volume(const VoxelKey& k) const {
  return k.x >= 0 && k.y >= 0 && k.z >= 0 && k.x < leaf_extent_.x && k.y < leaf_extent_.y &&
         k.z < leaf_extent_.z;
}

VoxelKey OccupancyMap::key_of(const Point3& p) const {
  const Eigen::Vector3d g = ((p - min_) / resolution_).array().floor();
  return {std::clamp(static_cast<std::int32_t>(g.x()), 0, leaf_extent_.x - 1),
          std::clamp(static_cast<std::int32_t>(g.y()), 0, leaf_extent_.y - 1),
          std::clamp(static_cast<std::int32_t>(g.z()), 0, leaf_extent_.z - 1)};
}

Point3 OccupancyMap::center_of(const VoxelKey& k) const {
  return min_ + resolution_ * Point3(k.x + 0.5, k.y + 0.5, k.z + 0.5);
}

const LeafData* OccupancyMap::leaf(const VoxelKey& key) const {
  const auto it = leaves_.find(pack(key));
  return it == leaves_.end() ? nullptr : &it->second;
}

double OccupancyMap::node_value(const VoxelKey& key, int level) const {
  if (level == 0) {
    const auto* l = leaf(key);
    return l ? l->logodds : 0.0;
  }
  const auto& table = levels_[static_cast<std::size_t>(level - 1)];
  const auto it = table.find(pack(key));
  return it == table.end() ? 0.0 : it->second;
}

double OccupancyMap::query(const Point3& p, int level) const {
  if (!contains(p)) throw Error(ErrorCode::OutOfVolume, "query point outside map volume");
  if (level < 0 || level > depth_)
    throw Error(ErrorCode::InvalidArgument, "level must lie in [0, tree depth]");
  return node_value(key_of(p).parent(level), level);
}

double OccupancyMap::child_max(const VoxelKey& parent_key, int parent_level) const {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 8; ++i) {
    const VoxelKey c{2 * parent_key.x + (i & 1), 2 * parent_key.y + ((i >> 1) & 1),
                     2 * parent_key.z + ((i >> 2) & 1)};
    m = std::max(m, node_value(c, parent_level - 1));
  }
  return m;
}

void OccupancyMap::refresh_aggregates(std::vector<std::uint64_t> touched) {
  for (int level = 1; level <= depth_; ++level) {
    for (auto& k : touched) k = pack(unpack(k).parent());
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    auto& table = levels_[static_cast<std::size_t>(level - 1)];
    for (const auto k : touched) table[k] = child_max(unpack(k), level);
  }
}

void OccupancyMap::trace(const Point3& from, const Point3& to, std::vector<std::uint64_t>& out) const {
  const Eigen::Vector3d a = (from - min_) / resolution_;
  const Eigen::Vector3d b = (to - min_) / resolution_;
  const Eigen::Vector3d d = b - a;
  Eigen::Vector3i cur = a.array().floor().cast<int>();
  const Eigen::Vector3i end = b.array().floor().cast<int>();
  Eigen::Vector3i step;
  Eigen::Vector3d t_max, t_delta;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (d[i] > 0) {
      step[i] = 1;
      t_max[i] = (cur[i] + 1 - a[i]) / d[i];
      t_delta[i] = 1 / d[i];
    } else if (d[i] < 0) {
      step[i] = -1;
      t_max[i] = (a[i] - cur[i]) / -d[i];
      t_delta[i] = -1 / d[i];
    } else {
      step[i] = 0;
      t_max[i] = inf;
      t_delta[i] = inf;
    }
  }
  const int max_steps = (end - cur).cwiseAbs().sum() + 3;
  for (int s = 0; s < max_steps && cur != end; ++s) {
    const VoxelKey k{cur.x(), cur.y(), cur.z()};
    if (key_in_volume(k)) out.push_back(pack(k));
    int axis = 0;
    t_max.minCoeff(&axis);
    if (t_max[axis] > 1.0) break;
    cur[axis] += step[axis];
    t_max[axis] += t_delta[axis];
  }
}

void OccupancyMap::insert_rays(const Point3& origin, std::span<const Point3> endpoints,
                               const InverseSensorModel& model) {
  model.validate();
  if (endpoints.empty()) return;

  std::vector<std::uint64_t> hits;
  std::vector<std::uint64_t> misses;
  hits.reserve(endpoints.size());
  for (const auto& e : endpoints) {
    const Point3 ray = e - origin;
    const double len = ray.norm();
    if (len > model.max_ray_range) {
      const Point3 cut = origin + ray * (model.max_ray_range / len);
      trace(origin, cut, misses);
      if (contains(cut)) misses.push_back(pack(key_of(cut)));
      continue;
    }
    trace(origin, e, misses);
    if (contains(e)) hits.push_back(pack(key_of(e)));
  }
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  std::sort(misses.begin(), misses.end());
  misses.erase(std::unique(misses.begin(), misses.end()), misses.end());
  std::vector<std::uint64_t> free_only;
  free_only.reserve(misses.size());
  std::set_difference(misses.begin(), misses.end(), hits.begin(), hits.end(),
                      std::back_inserter(free_only));

  auto apply = [&](std::uint64_t k, double delta, bool hit) {
    LeafData& leaf = leaves_[k];
    leaf.logodds = std::clamp(leaf.logodds + delta, kLogOddsMin, kLogOddsMax);
    ++leaf.observations;
    if (hit) ++leaf.hits;
  };
  for (const auto k : free_only) apply(k, model.miss_logodds, false);
  for (const auto k : hits) apply(k, model.hit_logodds, true);

  std::vector<std::uint64_t> touched = std::move(free_only);
  touched.insert(touched.end(), hits.begin(), hits.end());
  refresh_aggregates(std::move(touched));
}

void OccupancyMap::insert_depth_image(const GlobalPose& pose, const DepthImage& depth,
                                      const Camera& K, const InverseSensorModel& model,
                                      int ray_stride) {
  if (depth.width() != K.width || depth.height() != K.height)
    throw Error(ErrorCode::DimensionMismatch, "depth image does not match intrinsics");
  if (ray_stride < 1) throw Error(ErrorCode::InvalidArgument, "ray_stride must be >= 1");
  const Eigen::Isometry3d T = pen_from_camera(pose);
  std::vector<Point3> endpoints;
  for (int v = 0; v < depth.height(); v += ray_stride)
    for (int u = 0; u < depth.width(); u += ray_stride)
      if (depth.valid(v, u)) endpoints.push_back(T * backproject<double>(K, u, v, depth.values(v, u)));
  insert_rays(T.translation(), endpoints, model);
}

void OccupancyMap::for_each_leaf(const std::function<void(const VoxelKey&, const LeafData&)>& fn) const {
  for (const auto& [k, v] : leaves_) fn(unpack(k), v);
}

std::vector<Point3> OccupancyMap::occupied_leaf_centers(std::uint32_t min_observations) const {
  std::vector<std::pair<std::uint64_t, Point3>> keyed;
  for (const auto& [k, v] : leaves_)
    if (v.logodds > 0 && v.observations >= min_observations) keyed.emplace_back(k, center_of(unpack(k)));
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Point3> out;
  out.reserve(keyed.size());
  for (auto& [k, p] : keyed) out.push_back(p);
  return out;
}

bool OccupancyMap::aggregates_consistent() const {
  for (int level = 1; level <= depth_; ++level) {
    const auto& table = levels_[static_cast<std::size_t>(level - 1)];
    for (const auto& [k, v] : table)
      if (v != child_max(unpack(k), level)) return false;
  }
  // every stored leaf must be represented by its ancestors
  for (const auto& [k, v] : leaves_) {
    VoxelKey key = unpack(k);
    for (int level = 1; level <= depth_; ++level) {
      key = key.parent();
      if (!levels_[static_cast<std::size_t>(level - 1)].contains(pack(key))) return false;
    }
  }
  return true;
}

// Map dump, little-endian:
//   char[8] "NPOCTMAP", u32 version (1), f64 resolution,
//   f64 min x,y,z, f64 max x,y,z, u32 tree depth, u64 leaf count,
//   then per leaf (sorted by key): i32 x, i32 y, i32 z, f64 logodds,
//   u32 observations, u32 hits.
namespace {
constexpr char kMapMagic[8] = {'N', 'P', 'O', 'C', 'T', 'M', 'A', 'P'};
constexpr std::uint32_t kMapVersion = 1;
}  // namespace

void OccupancyMap::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os.write(kMapMagic, 8);
  put_le<std::uint32_t>(os, kMapVersion);
  put_le<double>(os, resolution_);
  for (int i = 0; i < 3; ++i) put_le<double>(os, min_[i]);
  for (int i = 0; i < 3; ++i) put_le<double>(os, max_[i]);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(depth_));
  put_le<std::uint64_t>(os, leaves_.size());
  std::vector<std::uint64_t> keys;
  keys.reserve(leaves_.size());
  for (const auto& [k, v] : leaves_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (const auto k : keys) {
    const VoxelKey key = unpack(k);
    const LeafData& l = leaves_.at(k);
    put_le<std::int32_t>(os, key.x);
    put_le<std::int32_t>(os, key.y);
    put_le<std::int32_t>(os, key.z);
    put_le<double>(os, l.logodds);
    put_le<std::uint32_t>(os, l.observations);
    put_le<std::uint32_t>(os, l.hits);
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

OccupancyMap OccupancyMap::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMapMagic, 8) != 0)
    throw Error(ErrorCode::IoError, "not a map dump: " + path.string());
  const auto version = get_le<std::uint32_t>(is);
  if (version != kMapVersion)
    throw Error(ErrorCode::IoError, "unsupported map version " + std::to_string(version) + " in " + path.string());
  const double res = get_le<double>(is);
  Point3 lo, hi;
  for (int i = 0; i < 3; ++i) lo[i] = get_le<double>(is);
  for (int i = 0; i < 3; ++i) hi[i] = get_le<double>(is);
  const auto depth = get_le<std::uint32_t>(is);
  const auto count = get_le<std::uint64_t>(is);
  if (!is) throw Error(ErrorCode::IoError, "truncated map header in " + path.string());

  OccupancyMap map(lo, hi, res);
  if (static_cast<int>(depth) != map.depth_)
    throw Error(ErrorCode::IoError, "inconsistent tree depth in " + path.string());
  std::vector<std::uint64_t> keys;
  keys.reserve(count);
  map.leaves_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    VoxelKey k;
    k.x = get_le<std::int32_t>(is);
    k.y = get_le<std::int32_t>(is);
    k.z = get_le<std::int32_t>(is);
    LeafData l;
    l.logodds = get_le<double>(is);
    l.observations = get_le<std::uint32_t>(is);
    l.hits = get_le<std::uint32_t>(is);
    if (!is) throw Error(ErrorCode::IoError, "truncated map records in " + path.string());
    if (!map.key_in_volume(k)) throw Error(ErrorCode::IoError, "leaf outside volume in " + path.string());
    map.leaves_[pack(k)] = l;
    keys.push_back(pack(k));
  }
  map.refresh_aggregates(std::move(keys));
  return map;
}

void write_ply(const std::filesystem::path& path, const ColoredPointCloud& cloud, PlyFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << "ply\n"
     << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
     << "element vertex " << cloud.size() << "\n"
     << "property double x\nproperty double y\nproperty double z\n"
     << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
     << "end_header\n";
  if (format == PlyFormat::Ascii) {
    os << std::setprecision(17);
    for (const auto& p : cloud.points)
      os << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' '
         << int(p.color[0]) << ' ' << int(p.color[1]) << ' ' << int(p.color[2]) << '\n';
  } else {
    for (const auto& p : cloud.points) {
      for (int i = 0; i < 3; ++i) put_le<double>(os, p.position[i]);
      os.write(reinterpret_cast<const char*>(p.color.data()), 3);
    }
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

ColoredPointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  auto fail = [&](const std::string& why) { return Error(ErrorCode::IoError, why + " in " + path.string()); };

  std::string line;
  std::getline(is, line);
  if (line != "ply") throw fail("missing ply magic");
  bool binary = false;
  std::size_t count = 0;
  std::vector<std::pair<std::string, std::string>> props;  // (type, name)
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw fail("unsupported PLY format " + fmt);
    } else if (word == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw fail("unexpected element " + name);
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      props.emplace_back(type, name);
    } else if (word == "end_header") {
      break;
    }
  }
  const std::vector<std::string> names = {"x", "y", "z", "red", "green", "blue"};
  if (props.size() != names.size()) throw fail("unexpected vertex properties");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (props[i].second != names[i]) throw fail("unexpected property " + props[i].second);
    const bool pos = i < 3;
    if (pos && props[i].first != "double" && props[i].first != "float")
      throw fail("unsupported coordinate type " + props[i].first);
    if (!pos && props[i].first != "uchar") throw fail("unsupported color type " + props[i].first);
  }

  ColoredPointCloud cloud;
  cloud.points.resize(count);
  for (auto& p : cloud.points) {
    if (binary) {
      for (int i = 0; i < 3; ++i)
        p.position[i] = props[static_cast<std::size_t>(i)].first == "double" ? get_le<double>(is)
                                                                            : get_le<float>(is);
      is.read(reinterpret_cast<char*>(p.color.data()), 3);
    } else {
      int r, g, b;
      is >> p.position.x() >> p.position.y() >> p.position.z() >> r >> g >> b;
      p.color = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    }
    if (!is) throw fail("truncated vertex data");
  }
  return cloud;
}

ColoredPointCloud map_surface_cloud(const OccupancyMap& map, std::uint32_t min_observations) {
  const auto centers = map.occupied_leaf_centers(min_observations);
  ColoredPointCloud cloud;
  if (centers.empty()) return cloud;
  double zmin = centers.front().z(), zmax = zmin;
  for (const auto& c : centers) {
    zmin = std::min(zmin, c.z());
    zmax = std::max(zmax, c.z());
  }
  const double span = std::max(zmax - zmin, 1e-9);
  for (const auto& c : centers) {
    const double s = (c.z() - zmin) / span;
    // blue (shallow) to red (deep)
    const Rgb color{static_cast<std::uint8_t>(255 * s), static_cast<std::uint8_t>(255 * (1 - std::abs(2 * s - 1))),
                    static_cast<std::uint8_t>(255 * (1 - s))};
    cloud.points.push_back({c, color, 0});
  }
  return cloud;
}

}  // namespace netpen
