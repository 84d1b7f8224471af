#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "viewpcl/detail/parallel.hpp"
#include "viewpcl/errors.hpp"
#include "viewpcl/geometry.hpp"
#include "viewpcl/probability.hpp"

namespace viewpcl {

namespace detail {

// Little-endian binary primitives. Rasters and caches are bit-exact files.

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t get_u64(std::istream& is) {
  const std::uint64_t lo = get_u32(is);
  const std::uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

constexpr char kRasterMagic[8] = {'V', 'P', 'C', 'L', 'R', 'A', 'S', 'T'};
constexpr char kCacheMagic[8] = {'V', 'P', 'C', 'L', 'O', 'V', 'L', 'C'};
constexpr std::uint32_t kDtypeF32 = 0;
constexpr std::uint32_t kDtypeU16 = 1;

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MissingFile("cannot open for writing: " + path.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFile("missing file: " + path.string());
  return is;
}

inline void read_raster_header(std::istream& is, const std::string& name,
                               std::uint32_t expected_dtype, std::uint32_t& channels,
                               std::uint32_t& height, std::uint32_t& width) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kRasterMagic, 8) != 0)
    throw ValidationError("bad raster magic in " + name);
  const std::uint32_t dtype = get_u32(is);
  channels = get_u32(is);
  height = get_u32(is);
  width = get_u32(is);
  if (dtype != expected_dtype)
    throw ValidationError("unexpected raster dtype in " + name);
}

}  // namespace detail

/// float32 raster, channel-interleaved (all channels of a pixel contiguous).
inline void save_raster_f32(const std::filesystem::path& path, int width, int height,
                            int channels, const std::vector<float>& data) {
  auto os = detail::open_out(path);
  os.write(detail::kRasterMagic, 8);
  detail::put_u32(os, detail::kDtypeF32);
  detail::put_u32(os, static_cast<std::uint32_t>(channels));
  detail::put_u32(os, static_cast<std::uint32_t>(height));
  detail::put_u32(os, static_cast<std::uint32_t>(width));
  for (const float v : data) detail::put_f32(os, v);
}

inline std::vector<float> load_raster_f32(const std::filesystem::path& path, int width,
                                          int height, int channels) {
  auto is = detail::open_in(path);
  std::uint32_t ch, h, w;
  detail::read_raster_header(is, path.string(), detail::kDtypeF32, ch, h, w);
  if (static_cast<int>(ch) != channels || static_cast<int>(h) != height ||
      static_cast<int>(w) != width)
    throw DimensionMismatch("raster " + path.string() + " is " + std::to_string(w) + "x" +
                            std::to_string(h) + "x" + std::to_string(ch) + ", expected " +
                            std::to_string(width) + "x" + std::to_string(height) + "x" +
                            std::to_string(channels));
  std::vector<float> data(static_cast<std::size_t>(width) * height * channels);
  for (float& v : data) v = detail::get_f32(is);
  if (!is) throw ValidationError("truncated raster " + path.string());
  return data;
}

inline void save_raster_u16(const std::filesystem::path& path, int width, int height,
                            const std::vector<std::uint16_t>& data) {
  auto os = detail::open_out(path);
  os.write(detail::kRasterMagic, 8);
  detail::put_u32(os, detail::kDtypeU16);
  detail::put_u32(os, 1);
  detail::put_u32(os, static_cast<std::uint32_t>(height));
  detail::put_u32(os, static_cast<std::uint32_t>(width));
  for (const std::uint16_t v : data) detail::put_u16(os, v);
}

inline std::vector<std::uint16_t> load_raster_u16(const std::filesystem::path& path,
                                                  int width, int height) {
  auto is = detail::open_in(path);
  std::uint32_t ch, h, w;
  detail::read_raster_header(is, path.string(), detail::kDtypeU16, ch, h, w);
  if (ch != 1 || static_cast<int>(h) != height || static_cast<int>(w) != width)
    throw DimensionMismatch("raster " + path.string() + " has unexpected dimensions");
  std::vector<std::uint16_t> data(static_cast<std::size_t>(width) * height);
  for (std::uint16_t& v : data) v = detail::get_u16(is);
  if (!is) throw ValidationError("truncated raster " + path.string());
  return data;
}

/// Superpixel label raster; a partition with ids contiguous from 0.
struct SuperpixelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> labels;  // row-major
  std::vector<std::size_t> counts;    // per id

  int num_superpixels() const { return static_cast<int>(counts.size()); }
  int label_at(PixelCoord p) const {
    return labels[static_cast<std::size_t>(p.row) * width + p.col];
  }
  std::vector<PixelCoord> pixels_of(int id) const {
    std::vector<PixelCoord> out;
    out.reserve(counts[static_cast<std::size_t>(id)]);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if (labels[static_cast<std::size_t>(r) * width + c] == id)
          out.push_back({r, c});
    return out;
  }

  void recount() {
    counts.clear();
    for (const std::uint16_t id : labels) {
      if (id >= counts.size()) counts.resize(id + 1, 0);
      ++counts[id];
    }
  }
};

inline void validate_partition(const SuperpixelMap& sp, const std::string& ctx) {
  if (static_cast<std::size_t>(sp.width) * sp.height != sp.labels.size())
    throw DimensionMismatch("superpixel raster size mismatch (" + ctx + ")");
  for (std::size_t id = 0; id < sp.counts.size(); ++id)
    if (sp.counts[id] == 0)
      throw ValidationError("superpixel ids not contiguous: id " + std::to_string(id) +
                            " unused (" + ctx + ")");
  if (sp.counts.empty()) throw ValidationError("empty superpixel map (" + ctx + ")");
}

/// Partitions the image into S rectangular cells on the rows x cols grid whose
/// shape is closest (in log ratio) to the image aspect; remainder pixels are
/// absorbed by the last row/column of cells.
inline SuperpixelMap grid_superpixels(int width, int height, int count) {
  if (count < 1 || static_cast<long long>(count) > static_cast<long long>(width) * height)
    throw InvalidCount("grid_superpixels: count must be in [1, width*height]");
  int best_rows = -1, best_cols = -1;
  double best_score = 0.0;
  const double target = std::log(static_cast<double>(width) / height);
  for (int rows = 1; rows <= count; ++rows) {
    if (count % rows != 0) continue;
    const int cols = count / rows;
    if (rows > height || cols > width) continue;
    const double score = std::abs(std::log(static_cast<double>(cols) / rows) - target);
    if (best_rows < 0 || score < best_score) {
      best_rows = rows;
      best_cols = cols;
      best_score = score;
    }
  }
  if (best_rows < 0)
    throw InvalidCount("grid_superpixels: no feasible rows x cols factorization");

  SuperpixelMap sp;
  sp.width = width;
  sp.height = height;
  sp.labels.resize(static_cast<std::size_t>(width) * height);
  const int cell_h = height / best_rows;
  const int cell_w = width / best_cols;
  for (int r = 0; r < height; ++r) {
    const int gr = std::min(r / cell_h, best_rows - 1);
    for (int c = 0; c < width; ++c) {
      const int gc = std::min(c / cell_w, best_cols - 1);
      sp.labels[static_cast<std::size_t>(r) * width + c] =
          static_cast<std::uint16_t>(gr * best_cols + gc);
    }
  }
  sp.recount();
  return sp;
}

/// In-memory scene bundle: posed views with depth, MC probability samples and
/// (optionally) superpixel maps, all sharing one class count.
struct SceneBundle {
  int num_classes = 0;
  int mc_samples = 0;
  std::vector<ViewRecord> views;
  std::vector<std::vector<ClassProbabilityMap>> prob_samples;  // [view][sample]
  std::vector<std::optional<SuperpixelMap>> superpixels;       // [view]

  std::size_t total_pixels() const {
    std::size_t n = 0;
    for (const auto& v : views) n += v.pixel_count();
    return n;
  }
  int view_index(int view_id) const {
    for (std::size_t i = 0; i < views.size(); ++i)
      if (views[i].view_id == view_id) return static_cast<int>(i);
    throw ValidationError("unknown view id " + std::to_string(view_id));
  }
};

inline void validate_bundle(const SceneBundle& bundle) {
  if (bundle.num_classes < 1) throw ValidationError("num_classes must be >= 1");
  if (bundle.mc_samples < 1) throw ValidationError("mc_samples must be >= 1");
  if (bundle.views.empty()) throw ValidationError("bundle has no views");
  if (bundle.prob_samples.size() != bundle.views.size() ||
      bundle.superpixels.size() != bundle.views.size())
    throw ValidationError("per-view array sizes do not match view count");

  for (std::size_t vi = 0; vi < bundle.views.size(); ++vi) {
    const ViewRecord& view = bundle.views[vi];
    const std::string ctx = "view " + std::to_string(view.view_id);
    if (view.width < 1 || view.height < 1) throw ValidationError("bad dimensions, " + ctx);
    validate_intrinsics(view.intrinsics, ctx);
    validate_pose(view.pose, ctx);
    if (view.depth.size() != view.pixel_count())
      throw DimensionMismatch("depth raster size mismatch, " + ctx);
    for (const float d : view.depth)
      if (!std::isfinite(d) || d < 0)
        throw ValidationError("depth values must be finite and >= 0, " + ctx);

    if (bundle.prob_samples[vi].size() != static_cast<std::size_t>(bundle.mc_samples))
      throw ValidationError("expected " + std::to_string(bundle.mc_samples) +
                            " probability samples, " + ctx);
    for (std::size_t s = 0; s < bundle.prob_samples[vi].size(); ++s) {
      const ClassProbabilityMap& map = bundle.prob_samples[vi][s];
      if (map.width != view.width || map.height != view.height ||
          map.num_classes != bundle.num_classes)
        throw DimensionMismatch("probability raster dimensions mismatch, " + ctx +
                                " sample " + std::to_string(s));
      for (int r = 0; r < map.height; ++r) {
        for (int c = 0; c < map.width; ++c) {
          double sum = 0.0;
          for (const float p : map.at({r, c})) {
            if (!(p >= 0.0f))
              throw ValidationError("negative class probability at " + ctx + " sample " +
                                    std::to_string(s) + " pixel (" + std::to_string(r) +
                                    "," + std::to_string(c) + ")");
            sum += p;
          }
          if (std::abs(sum - 1.0) > 1e-5)
            throw ValidationError("class probabilities sum to " + std::to_string(sum) +
                                  " at " + ctx + " sample " + std::to_string(s) +
                                  " pixel (" + std::to_string(r) + "," +
                                  std::to_string(c) + ")");
        }
      }
    }

    if (bundle.superpixels[vi]) {
      const SuperpixelMap& sp = *bundle.superpixels[vi];
      if (sp.width != view.width || sp.height != view.height)
        throw DimensionMismatch("superpixel raster dimensions mismatch, " + ctx);
      validate_partition(sp, ctx);
    }
  }
}

inline void save_bundle(const SceneBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "viewpcl-bundle";
  manifest["version"] = 1;
  manifest["num_classes"] = bundle.num_classes;
  manifest["mc_samples"] = bundle.mc_samples;
  manifest["views"] = nlohmann::json::array();

  for (std::size_t vi = 0; vi < bundle.views.size(); ++vi) {
    const ViewRecord& view = bundle.views[vi];
    const std::string id = std::to_string(view.view_id);
    nlohmann::json jv;
    jv["id"] = view.view_id;
    jv["width"] = view.width;
    jv["height"] = view.height;
    jv["intrinsics"] = {{"fx", view.intrinsics.fx},
                        {"fy", view.intrinsics.fy},
                        {"cx", view.intrinsics.cx},
                        {"cy", view.intrinsics.cy}};
    // 4x4 camera-to-world, row-major
    std::vector<double> pose(16, 0.0);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose[static_cast<std::size_t>(r) * 4 + c] = view.pose.rotation(r, c);
      pose[static_cast<std::size_t>(r) * 4 + 3] = view.pose.translation(r);
    }
    pose[15] = 1.0;
    jv["pose"] = pose;

    jv["depth"] = "depth_" + id + ".vpr";
    save_raster_f32(dir / ("depth_" + id + ".vpr"), view.width, view.height, 1, view.depth);

    jv["probs"] = nlohmann::json::array();
    for (std::size_t s = 0; s < bundle.prob_samples[vi].size(); ++s) {
      const std::string name = "probs_" + id + "_" + std::to_string(s) + ".vpr";
      jv["probs"].push_back(name);
      save_raster_f32(dir / name, view.width, view.height, bundle.num_classes,
                      bundle.prob_samples[vi][s].probs);
    }

    if (bundle.superpixels[vi]) {
      const std::string name = "superpixels_" + id + ".vpr";
      jv["superpixels"] = name;
      save_raster_u16(dir / name, view.width, view.height, bundle.superpixels[vi]->labels);
    }
    manifest["views"].push_back(jv);
  }

  std::ofstream os(dir / "manifest.json");
  if (!os) throw MissingFile("cannot write manifest under " + dir.string());
  os << manifest.dump(2) << "\n";
}

/// Loads and fully validates a bundle directory.
inline SceneBundle load_bundle(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw MissingFile("missing manifest: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("cannot parse " + manifest_path.string() + ": " + e.what());
  }

  SceneBundle bundle;
  try {
    if (manifest.at("format").get<std::string>() != "viewpcl-bundle")
      throw ManifestError("not a viewpcl bundle manifest");
    bundle.num_classes = manifest.at("num_classes").get<int>();
    bundle.mc_samples = manifest.at("mc_samples").get<int>();

    for (const auto& jv : manifest.at("views")) {
      ViewRecord view;
      view.view_id = jv.at("id").get<int>();
      view.width = jv.at("width").get<int>();
      view.height = jv.at("height").get<int>();
      const auto& jk = jv.at("intrinsics");
      view.intrinsics = {jk.at("fx").get<double>(), jk.at("fy").get<double>(),
                         jk.at("cx").get<double>(), jk.at("cy").get<double>()};
      const auto pose = jv.at("pose").get<std::vector<double>>();
      if (pose.size() != 16)
        throw ManifestError("pose of view " + std::to_string(view.view_id) +
                            " must have 16 entries");
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) view.pose.rotation(r, c) = pose[static_cast<std::size_t>(r) * 4 + c];
        view.pose.translation(r) = pose[static_cast<std::size_t>(r) * 4 + 3];
      }
      view.depth = load_raster_f32(dir / jv.at("depth").get<std::string>(), view.width,
                                   view.height, 1);

      std::vector<ClassProbabilityMap> samples;
      for (const auto& name : jv.at("probs")) {
        ClassProbabilityMap map;
        map.view_id = view.view_id;
        map.num_classes = bundle.num_classes;
        map.width = view.width;
        map.height = view.height;
        map.probs = load_raster_f32(dir / name.get<std::string>(), view.width,
                                    view.height, bundle.num_classes);
        samples.push_back(std::move(map));
      }

      std::optional<SuperpixelMap> sp;
      if (jv.contains("superpixels") && !jv.at("superpixels").is_null()) {
        SuperpixelMap m;
        m.width = view.width;
        m.height = view.height;
        m.labels = load_raster_u16(dir / jv.at("superpixels").get<std::string>(),
                                   view.width, view.height);
        m.recount();
        sp = std::move(m);
      }

      bundle.views.push_back(std::move(view));
      bundle.prob_samples.push_back(std::move(samples));
      bundle.superpixels.push_back(std::move(sp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  validate_bundle(bundle);
  return bundle;
}

/// Depth-consistent correspondences for every ordered (source, target) pair.
/// Computed once per bundle; rounds and scores reuse it.
struct ViewPairCorrespondences {
  int source_view = 0;
  int target_view = 0;
  std::vector<PixelCorrespondence> correspondences;
};

struct GeometryContext {
  double depth_tolerance = 0.0;
  std::vector<ViewPairCorrespondences> pairs;  // sorted by (target, source)
};

inline GeometryContext build_geometry_context(const std::vector<ViewRecord>& views,
                                              double depth_tolerance) {
  GeometryContext ctx;
  ctx.depth_tolerance = depth_tolerance;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (target, source)
  for (std::size_t t = 0; t < views.size(); ++t)
    for (std::size_t s = 0; s < views.size(); ++s)
      if (s != t) pairs.emplace_back(t, s);
  ctx.pairs.resize(pairs.size());
  detail::parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [t, s] = pairs[k];
    ctx.pairs[k] = {views[s].view_id, views[t].view_id,
                    cross_project(views[s], views[t], depth_tolerance)};
  });
  return ctx;
}

/// Precomputed overlap regions keyed by (view, superpixel). The key of the
/// cache is the geometry parameter pair; entries are a pure function of the
/// bundle and that key.
struct OverlapCache {
  double depth_tolerance = 0.0;
  double min_relative_size = 0.0;
  std::map<SuperpixelKey, std::vector<OverlapRegion>> regions;
};

inline OverlapCache overlap_cache_from_context(const SceneBundle& bundle,
                                               const GeometryContext& ctx,
                                               double min_relative_size) {
  OverlapCache cache;
  cache.depth_tolerance = ctx.depth_tolerance;
  cache.min_relative_size = min_relative_size;

  for (std::size_t vi = 0; vi < bundle.views.size(); ++vi) {
    const ViewRecord& view = bundle.views[vi];
    if (!bundle.superpixels[vi])
      throw ValidationError("view " + std::to_string(view.view_id) +
                            " has no superpixel map");
    const SuperpixelMap& sp = *bundle.superpixels[vi];
    for (const ViewPairCorrespondences& pair : ctx.pairs) {
      if (pair.target_view != view.view_id) continue;
      // Bucket this pair's correspondences by target superpixel.
      std::vector<OverlapRegion> buckets(sp.num_superpixels());
      for (const PixelCorrespondence& c : pair.correspondences)
        buckets[static_cast<std::size_t>(sp.label_at(c.target_pixel))]
            .correspondences.push_back(c);
      for (int id = 0; id < sp.num_superpixels(); ++id) {
        OverlapRegion& region = buckets[static_cast<std::size_t>(id)];
        region.target_view = view.view_id;
        region.source_view = pair.source_view;
        region.superpixel_id = id;
        region.relative_size = static_cast<double>(region.correspondences.size()) /
                               static_cast<double>(sp.counts[static_cast<std::size_t>(id)]);
        if (region.relative_size >= min_relative_size)
          cache.regions[{view.view_id, id}].push_back(std::move(region));
      }
    }
  }
  return cache;
}

inline void save_overlap_cache(const OverlapCache& cache,
                               const std::filesystem::path& path) {
  auto os = detail::open_out(path);
  os.write(detail::kCacheMagic, 8);
  detail::put_u32(os, 1);  // version
  detail::put_f64(os, cache.depth_tolerance);
  detail::put_f64(os, cache.min_relative_size);
  detail::put_u64(os, cache.regions.size());
  for (const auto& [key, regions] : cache.regions) {
    detail::put_u32(os, static_cast<std::uint32_t>(key.view_id));
    detail::put_u32(os, static_cast<std::uint32_t>(key.superpixel_id));
    detail::put_u32(os, static_cast<std::uint32_t>(regions.size()));
    for (const OverlapRegion& region : regions) {
      detail::put_u32(os, static_cast<std::uint32_t>(region.source_view));
      detail::put_f64(os, region.relative_size);
      detail::put_u64(os, region.correspondences.size());
      for (const PixelCorrespondence& c : region.correspondences) {
        detail::put_u32(os, static_cast<std::uint32_t>(c.target_pixel.row));
        detail::put_u32(os, static_cast<std::uint32_t>(c.target_pixel.col));
        detail::put_u32(os, static_cast<std::uint32_t>(c.source_pixel.row));
        detail::put_u32(os, static_cast<std::uint32_t>(c.source_pixel.col));
      }
    }
  }
}

inline std::optional<OverlapCache> load_overlap_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCacheMagic, 8) != 0) return std::nullopt;
  if (detail::get_u32(is) != 1) return std::nullopt;
  OverlapCache cache;
  cache.depth_tolerance = detail::get_f64(is);
  cache.min_relative_size = detail::get_f64(is);
  const std::uint64_t num_keys = detail::get_u64(is);
  for (std::uint64_t k = 0; k < num_keys; ++k) {
    SuperpixelKey key;
    key.view_id = static_cast<int>(detail::get_u32(is));
    key.superpixel_id = static_cast<int>(detail::get_u32(is));
    const std::uint32_t num_regions = detail::get_u32(is);
    std::vector<OverlapRegion> regions(num_regions);
    for (std::uint32_t r = 0; r < num_regions; ++r) {
      OverlapRegion& region = regions[r];
      region.target_view = key.view_id;
      region.superpixel_id = key.superpixel_id;
      region.source_view = static_cast<int>(detail::get_u32(is));
      region.relative_size = detail::get_f64(is);
      const std::uint64_t ncorr = detail::get_u64(is);
      region.correspondences.resize(ncorr);
      for (std::uint64_t c = 0; c < ncorr; ++c) {
        PixelCorrespondence& pc = region.correspondences[c];
        pc.target_pixel.row = static_cast<int>(detail::get_u32(is));
        pc.target_pixel.col = static_cast<int>(detail::get_u32(is));
        pc.source_pixel.row = static_cast<int>(detail::get_u32(is));
        pc.source_pixel.col = static_cast<int>(detail::get_u32(is));
      }
    }
    if (!is) return std::nullopt;
    cache.regions.emplace(key, std::move(regions));
  }
  return cache;
}

/// Computes (or reuses, when a cache file with the same key exists) the
/// overlap regions of every superpixel of every view.
inline OverlapCache precompute_overlaps(const SceneBundle& bundle, double depth_tolerance,
                                        double min_relative_size,
                                        const std::filesystem::path& cache_path = {}) {
  if (!cache_path.empty()) {
    if (auto cached = load_overlap_cache(cache_path)) {
      if (cached->depth_tolerance == depth_tolerance &&
          cached->min_relative_size == min_relative_size)
        return std::move(*cached);
    }
  }
  const GeometryContext ctx = build_geometry_context(bundle.views, depth_tolerance);
  OverlapCache cache = overlap_cache_from_context(bundle, ctx, min_relative_size);
  if (!cache_path.empty()) save_overlap_cache(cache, cache_path);
  return cache;
}

}  // namespace viewpcl
