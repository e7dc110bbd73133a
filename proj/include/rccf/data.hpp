#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rccf/geometry.hpp"
#include "rccf/random.hpp"
#include "rccf/tensor.hpp"

namespace rccf {

// ---------------------------------------------------------------------------
// scenes
// ---------------------------------------------------------------------------

enum class ShapeKind { kCircle = 0, kSquare = 1, kTriangle = 2 };

inline const char* kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::kCircle: return "circle";
    case ShapeKind::kSquare: return "square";
    case ShapeKind::kTriangle: return "triangle";
  }
  return "?";
}

struct PaletteEntry {
  const char* name;
  int r, g, b;
};

inline constexpr PaletteEntry kPalette[6] = {
    {"red", 220, 50, 47},    {"green", 64, 160, 43},   {"blue", 38, 139, 210},
    {"yellow", 228, 208, 10}, {"magenta", 211, 54, 130}, {"cyan", 42, 161, 152}};

inline constexpr int kBackground[3] = {40, 40, 40};

struct SceneObject {
  ShapeKind kind = ShapeKind::kCircle;
  int color = 0;       // palette index
  int size_class = 0;  // 0 small, 1 large
  double cx = 0, cy = 0;
  double extent = 0;  // bounding square side, pixels
};

struct Scene {
  std::vector<SceneObject> objects;
  int height = 0, width = 0;
  std::uint64_t seed = 0;
};

struct GeneratorConfig {
  int image_size = 64;
  int min_objects = 2;
  int max_objects = 5;
  bool templates_attribute = true;
  bool templates_size = true;
  bool templates_location = true;
  bool templates_relation = true;
  double small_min = 8.0, small_max = 12.0;
  double large_min = 16.0, large_max = 24.0;
  double max_pair_iou = 0.1;
  double location_margin = 3.0;
  int rejection_budget = 200;

  std::string echo() const {
    std::ostringstream os;
    os << "image_size=" << image_size << "\nmin_objects=" << min_objects
       << "\nmax_objects=" << max_objects << "\ntemplates_attribute=" << templates_attribute
       << "\ntemplates_size=" << templates_size << "\ntemplates_location=" << templates_location
       << "\ntemplates_relation=" << templates_relation << "\nsmall_min=" << small_min
       << "\nsmall_max=" << small_max << "\nlarge_min=" << large_min << "\nlarge_max=" << large_max
       << "\nmax_pair_iou=" << max_pair_iou << "\nlocation_margin=" << location_margin << "\n";
    return os.str();
  }
};

/// Pixel-center coverage test for one object; pixel (x, y) has center
/// (x + 0.5, y + 0.5).
inline bool object_covers(const SceneObject& o, double px, double py) {
  const double half = o.extent / 2.0;
  switch (o.kind) {
    case ShapeKind::kCircle: {
      const double dx = px - o.cx, dy = py - o.cy;
      return dx * dx + dy * dy <= half * half;
    }
    case ShapeKind::kSquare:
      return std::fabs(px - o.cx) <= half && std::fabs(py - o.cy) <= half;
    case ShapeKind::kTriangle: {
      // upward isoceles triangle inscribed in the bounding square
      const double ax = o.cx, ay = o.cy - half;
      const double bx = o.cx - half, by = o.cy + half;
      const double cx = o.cx + half, cy = o.cy + half;
      auto side = [](double x1, double y1, double x2, double y2, double x, double y) {
        return (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
      };
      const double s1 = side(ax, ay, bx, by, px, py);
      const double s2 = side(bx, by, cx, cy, px, py);
      const double s3 = side(cx, cy, ax, ay, px, py);
      const bool has_neg = s1 < 0 || s2 < 0 || s3 < 0;
      const bool has_pos = s1 > 0 || s2 > 0 || s3 > 0;
      return !(has_neg && has_pos);
    }
  }
  return false;
}

/// Tight bounds of the object's own rasterized pixels (paint order ignored).
/// Pixel (x, y) occupies [x, x+1) x [y, y+1).
inline Box object_raster_bounds(const Scene& scene, int index) {
  const SceneObject& o = scene.objects[index];
  int min_x = scene.width, min_y = scene.height, max_x = -1, max_y = -1;
  const int x0 = std::max(0, static_cast<int>(o.cx - o.extent) - 1);
  const int x1 = std::min(scene.width - 1, static_cast<int>(o.cx + o.extent) + 1);
  const int y0 = std::max(0, static_cast<int>(o.cy - o.extent) - 1);
  const int y1 = std::min(scene.height - 1, static_cast<int>(o.cy + o.extent) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (object_covers(o, x + 0.5, y + 0.5)) {
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
  if (max_x < 0) throw std::logic_error("object_raster_bounds: object rasterized to nothing");
  return {static_cast<double>(min_x), static_cast<double>(min_y), static_cast<double>(max_x + 1),
          static_cast<double>(max_y + 1)};
}

/// Rasterizes the scene over the background color, objects painted in order.
/// All emitted values are exact multiples of 1/255, so one write/read cycle
/// through 8-bit files is lossless.
inline Tensor render_scene(const Scene& scene) {
  Tensor img({3, scene.height, scene.width});
  for (int c = 0; c < 3; ++c) {
    const double bg = kBackground[c] / 255.0;
    for (int y = 0; y < scene.height; ++y)
      for (int x = 0; x < scene.width; ++x) img.at(c, y, x) = bg;
  }
  for (const SceneObject& o : scene.objects) {
    const PaletteEntry& col = kPalette[o.color];
    const double rgb[3] = {col.r / 255.0, col.g / 255.0, col.b / 255.0};
    const int x0 = std::max(0, static_cast<int>(o.cx - o.extent) - 1);
    const int x1 = std::min(scene.width - 1, static_cast<int>(o.cx + o.extent) + 1);
    const int y0 = std::max(0, static_cast<int>(o.cy - o.extent) - 1);
    const int y1 = std::min(scene.height - 1, static_cast<int>(o.cy + o.extent) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (object_covers(o, x + 0.5, y + 0.5))
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = rgb[c];
  }
  return img;
}

// ---------------------------------------------------------------------------
// referring expressions
// ---------------------------------------------------------------------------

struct Utterance {
  std::string text;
  int referent = -1;
};

/// Every expression our template families can truthfully and uniquely ground
/// in this scene, in a deterministic order. Location and relation templates
/// demand a clean margin between candidates so the supervision is unambiguous.
inline std::vector<Utterance> enumerate_expressions(const Scene& scene,
                                                    const GeneratorConfig& cfg) {
  std::vector<Utterance> out;
  const auto& objs = scene.objects;
  const int n = static_cast<int>(objs.size());

  if (cfg.templates_attribute) {
    for (int i = 0; i < n; ++i) {
      int same = 0;
      for (int j = 0; j < n; ++j)
        if (objs[j].kind == objs[i].kind && objs[j].color == objs[i].color) ++same;
      if (same == 1)
        out.push_back({std::string(kPalette[objs[i].color].name) + " " + kind_name(objs[i].kind), i});
    }
  }

  if (cfg.templates_size) {
    for (int i = 0; i < n; ++i) {
      int same = 0;
      for (int j = 0; j < n; ++j)
        if (objs[j].kind == objs[i].kind && objs[j].color == objs[i].color &&
            objs[j].size_class == objs[i].size_class)
          ++same;
      if (same == 1)
        out.push_back({std::string(objs[i].size_class ? "large" : "small") + " " +
                           kPalette[objs[i].color].name + " " + kind_name(objs[i].kind),
                       i});
    }
  }

  if (cfg.templates_location) {
    static const char* dir_words[4] = {"leftmost", "rightmost", "topmost", "bottommost"};
    for (int kind = 0; kind < 3; ++kind) {
      std::vector<int> members;
      for (int i = 0; i < n; ++i)
        if (static_cast<int>(objs[i].kind) == kind) members.push_back(i);
      if (members.empty()) continue;
      for (int dir = 0; dir < 4; ++dir) {
        auto key = [&](int i) {
          switch (dir) {
            case 0: return objs[i].cx;
            case 1: return -objs[i].cx;
            case 2: return objs[i].cy;
            default: return -objs[i].cy;
          }
        };
        int best = members[0];
        for (int i : members)
          if (key(i) < key(best)) best = i;
        bool clean = true;
        for (int i : members)
          if (i != best && key(i) < key(best) + cfg.location_margin) clean = false;
        if (clean)
          out.push_back({std::string(dir_words[dir]) + " " + kind_name(static_cast<ShapeKind>(kind)),
                         best});
      }
    }
  }

  if (cfg.templates_relation) {
    for (int ka = 0; ka < 3; ++ka) {
      for (int kb = 0; kb < 3; ++kb) {
        if (ka == kb) continue;
        std::vector<int> landmarks;
        for (int i = 0; i < n; ++i)
          if (static_cast<int>(objs[i].kind) == kb) landmarks.push_back(i);
        if (landmarks.size() != 1) continue;
        const SceneObject& lm = objs[landmarks[0]];
        for (int rel = 0; rel < 2; ++rel) {  // 0 left of, 1 right of
          int satisfier = -1;
          bool clean = true;
          for (int i = 0; i < n; ++i) {
            if (static_cast<int>(objs[i].kind) != ka) continue;
            const double dx = rel == 0 ? lm.cx - objs[i].cx : objs[i].cx - lm.cx;
            if (dx >= cfg.location_margin) {
              if (satisfier >= 0) clean = false;
              satisfier = i;
            } else if (dx > -cfg.location_margin) {
              clean = false;  // too close to the landmark to call
            }
          }
          if (clean && satisfier >= 0)
            out.push_back({std::string(kind_name(static_cast<ShapeKind>(ka))) +
                               (rel == 0 ? " left of the " : " right of the ") +
                               kind_name(static_cast<ShapeKind>(kb)),
                           satisfier});
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------

struct Sample {
  Tensor image;  // 3xHxW in [0,1]
  std::string expression;
  GroundTruthBox target;
};

namespace detail {

inline std::optional<Scene> try_place_scene(std::uint64_t seed, const GeneratorConfig& cfg,
                                            Rng& rng) {
  Scene scene;
  scene.width = scene.height = cfg.image_size;
  scene.seed = seed;
  const int count = cfg.min_objects + rng.uniform_int(cfg.max_objects - cfg.min_objects + 1);
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
      SceneObject o;
      o.kind = static_cast<ShapeKind>(rng.uniform_int(3));
      o.color = rng.uniform_int(6);
      o.size_class = rng.uniform_int(2);
      o.extent = o.size_class ? rng.uniform(cfg.large_min, cfg.large_max)
                              : rng.uniform(cfg.small_min, cfg.small_max);
      const double half = o.extent / 2.0;
      if (cfg.image_size - 2.0 * (half + 1.0) <= 0.0) continue;
      o.cx = rng.uniform(half + 1.0, cfg.image_size - half - 1.0);
      o.cy = rng.uniform(half + 1.0, cfg.image_size - half - 1.0);
      const Box nominal{o.cx - half, o.cy - half, o.cx + half, o.cy + half};
      bool ok = true;
      for (const SceneObject& other : scene.objects) {
        const double oh = other.extent / 2.0;
        const Box ob{other.cx - oh, other.cy - oh, other.cx + oh, other.cy + oh};
        if (iou(nominal, ob) > cfg.max_pair_iou) ok = false;
      }
      if (ok) {
        scene.objects.push_back(o);
        placed = true;
      }
    }
    if (!placed) return std::nullopt;
  }
  return scene;
}

}  // namespace detail

/// Scene placement with the rejection loop for non-overlap; throws with the
/// seed echoed once the budget runs out.
inline Scene generate_scene(std::uint64_t seed, const GeneratorConfig& cfg) {
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x5851f42d4c957f2dULL);
  for (int attempt = 0; attempt < cfg.rejection_budget; ++attempt) {
    auto scene = detail::try_place_scene(seed, cfg, rng);
    if (scene && !enumerate_expressions(*scene, cfg).empty()) return *scene;
  }
  throw std::runtime_error("generate_scene: rejection budget exhausted for seed " +
                           std::to_string(seed));
}

struct SampleDebug {
  Sample sample;
  Scene scene;
  int referent = -1;
};

inline SampleDebug generate_sample_debug(std::uint64_t seed, const GeneratorConfig& cfg) {
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x5851f42d4c957f2dULL);
  for (int attempt = 0; attempt < cfg.rejection_budget; ++attempt) {
    auto scene = detail::try_place_scene(seed, cfg, rng);
    if (!scene) continue;
    auto utterances = enumerate_expressions(*scene, cfg);
    if (utterances.empty()) continue;
    const Utterance& u = utterances[rng.uniform_int(static_cast<int>(utterances.size()))];
    SampleDebug d;
    d.scene = *scene;
    d.referent = u.referent;
    d.sample.image = render_scene(*scene);
    d.sample.expression = u.text;
    d.sample.target = GroundTruthBox::from_box(object_raster_bounds(*scene, u.referent));
    return d;
  }
  throw std::runtime_error("generate_sample: rejection budget exhausted for seed " +
                           std::to_string(seed));
}

inline Sample generate_sample(std::uint64_t seed, const GeneratorConfig& cfg) {
  return generate_sample_debug(seed, cfg).sample;
}

/// One scene with two expressions that ground to different objects; used by
/// the language-dependence evaluation.
struct ContrastPair {
  Tensor image;
  std::string expression_a, expression_b;
  GroundTruthBox target_a, target_b;
};

inline std::optional<ContrastPair> generate_contrast_pair(std::uint64_t seed,
                                                          const GeneratorConfig& cfg) {
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x5851f42d4c957f2dULL);
  for (int attempt = 0; attempt < cfg.rejection_budget; ++attempt) {
    auto scene = detail::try_place_scene(seed, cfg, rng);
    if (!scene) continue;
    auto utterances = enumerate_expressions(*scene, cfg);
    if (utterances.size() < 2) continue;
    for (std::size_t j = 1; j < utterances.size(); ++j) {
      if (utterances[j].referent == utterances[0].referent) continue;
      ContrastPair p;
      p.image = render_scene(*scene);
      p.expression_a = utterances[0].text;
      p.expression_b = utterances[j].text;
      p.target_a = GroundTruthBox::from_box(object_raster_bounds(*scene, utterances[0].referent));
      p.target_b = GroundTruthBox::from_box(object_raster_bounds(*scene, utterances[j].referent));
      return p;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// binary PPM (P6) image files
// ---------------------------------------------------------------------------

inline std::vector<unsigned char> quantize_image(const Tensor& img) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw std::invalid_argument("quantize_image: expected 3xHxW, got " + shape_str(img.shape()));
  const int h = img.dim(1), w = img.dim(2);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(3) * h * w);
  std::size_t p = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        bytes[p++] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  return bytes;
}

inline Tensor image_from_bytes(const std::vector<unsigned char>& bytes, int h, int w) {
  Tensor img({3, h, w});
  std::size_t p = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = bytes[p++] / 255.0;
  return img;
}

inline void write_ppm(const std::string& path, const Tensor& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_ppm: cannot open " + path);
  os << "P6\n" << img.dim(2) << " " << img.dim(1) << "\n255\n";
  const auto bytes = quantize_image(img);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write_ppm: write failure on " + path);
}

/// 8-bit grayscale P5 file from a rank-2 map with values in [0,1]
/// (values scaled by 255, row-major).
inline void write_pgm(const std::string& path, const Tensor& map) {
  if (map.rank() != 2)
    throw std::invalid_argument("write_pgm: expected HxW map, got " + shape_str(map.shape()));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
  os << "P5\n" << map.dim(1) << " " << map.dim(0) << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(map.size()));
  for (int i = 0; i < map.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(map.v(i), 0.0, 1.0) * 255.0));
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write_pgm: write failure on " + path);
}

inline Tensor read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_ppm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
    throw std::runtime_error("read_ppm: unsupported header in " + path);
  is.get();  // single whitespace after maxval
  std::vector<unsigned char> bytes(static_cast<std::size_t>(3) * h * w);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw std::runtime_error("read_ppm: truncated pixel data in " + path);
  return image_from_bytes(bytes, h, w);
}

// ---------------------------------------------------------------------------
// dataset directory
// ---------------------------------------------------------------------------

struct DatasetRecord {
  std::string image_file;  // relative path, images/NNNNNN.ppm
  std::string expression;
  Box box;
  std::string split;
};

struct Dataset {
  int image_size = 0;
  std::vector<DatasetRecord> records;
  std::vector<std::vector<unsigned char>> pixels;  // one quantized image per record

  Tensor image(int i) const { return image_from_bytes(pixels[i], image_size, image_size); }

  std::vector<int> split_indices(const std::string& split) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(records.size()); ++i)
      if (records[i].split == split) out.push_back(i);
    return out;
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

/// Writes images/NNNNNN.ppm, annotations.txt (tab-separated: file, expression,
/// "x1 y1 x2 y2"), splits.txt (file, split) and a generator-config echo.
inline void write_dataset(const std::string& dir,
                          const std::vector<std::pair<Sample, std::string>>& samples,
                          const GeneratorConfig& cfg, std::uint64_t base_seed) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  std::ofstream ann(fs::path(dir) / "annotations.txt", std::ios::trunc);
  std::ofstream spl(fs::path(dir) / "splits.txt", std::ios::trunc);
  if (!ann || !spl) throw std::runtime_error("write_dataset: cannot write into " + dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.ppm", i);
    const std::string rel = std::string("images/") + name;
    write_ppm((fs::path(dir) / rel).string(), samples[i].first.image);
    const Box b = samples[i].first.target.to_box();
    ann << rel << '\t' << samples[i].first.expression << '\t' << format_double(b.x1) << ' '
        << format_double(b.y1) << ' ' << format_double(b.x2) << ' ' << format_double(b.y2) << '\n';
    spl << rel << '\t' << samples[i].second << '\n';
  }
  std::ofstream echo(fs::path(dir) / "gen_config.txt", std::ios::trunc);
  echo << cfg.echo() << "base_seed=" << base_seed << "\ncount=" << samples.size() << "\n";
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream ann(fs::path(dir) / "annotations.txt");
  if (!ann) throw std::runtime_error("load_dataset: missing annotations.txt in " + dir);

  std::unordered_map<std::string, std::string> split_of;
  {
    std::ifstream spl(fs::path(dir) / "splits.txt");
    std::string line;
    int lineno = 0;
    while (std::getline(spl, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("splits.txt:" + std::to_string(lineno) + ": expected <file>\\t<split>");
      split_of[line.substr(0, tab)] = line.substr(tab + 1);
    }
  }

  Dataset ds;
  std::string line;
  int lineno = 0;
  while (std::getline(ann, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
      throw std::runtime_error("annotations.txt:" + std::to_string(lineno) +
                               ": expected 3 tab-separated fields");
    DatasetRecord rec;
    rec.image_file = line.substr(0, t1);
    rec.expression = line.substr(t1 + 1, t2 - t1 - 1);
    std::istringstream coords(line.substr(t2 + 1));
    std::string extra;
    if (!(coords >> rec.box.x1 >> rec.box.y1 >> rec.box.x2 >> rec.box.y2) || (coords >> extra))
      throw std::runtime_error("annotations.txt:" + std::to_string(lineno) +
                               ": expected 4 box coordinates");
    auto it = split_of.find(rec.image_file);
    rec.split = it == split_of.end() ? "train" : it->second;

    Tensor img = read_ppm((fs::path(dir) / rec.image_file).string());
    if (img.dim(1) != img.dim(2))
      throw std::runtime_error("load_dataset: non-square image " + rec.image_file);
    if (ds.image_size == 0) ds.image_size = img.dim(1);
    if (ds.image_size != img.dim(1))
      throw std::runtime_error("load_dataset: inconsistent image sizes in " + dir);
    ds.pixels.push_back(quantize_image(img));
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw std::runtime_error("load_dataset: no records in " + dir);
  return ds;
}

}  // namespace rccf
