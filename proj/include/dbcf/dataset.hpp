#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dbcf/array2d.hpp"
#include "dbcf/errors.hpp"
#include "dbcf/geometry.hpp"
#include "dbcf/rng.hpp"

namespace dbcf {

/// A grayscale image with the annotated target center (and box, when known).
struct LabeledImage {
  Plane image;
  Point2 center;
  std::optional<BBox> bbox;
};

struct Sequence {
  std::string name;
  std::vector<Plane> frames;
  std::vector<BBox> groundtruth;
};

// ---------------------------------------------------------------------------
// PGM (P5) round trip. Images live in [0, 1] and quantize to 8 bits on disk.

inline void write_pgm(const std::filesystem::path& path, const Plane& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm: cannot open " + path.string());
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  std::vector<unsigned char> row(image.cols());
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      const double v = std::clamp(image(r, c), 0.0, 1.0);
      row[c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw IoError("write_pgm: short write to " + path.string());
}

inline Plane read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_pgm: cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5")
    throw FormatError("read_pgm: " + path.string() + " is not a P5 PGM");
  auto next_int = [&](const char* what) {
    // Skip whitespace and '#' comment lines.
    int ch = in.get();
    while (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t' || ch == '#') {
      if (ch == '#')
        while (ch != '\n' && ch != EOF) ch = in.get();
      ch = in.get();
    }
    std::string tok;
    while (ch != EOF && !std::isspace(ch)) {
      tok.push_back(static_cast<char>(ch));
      ch = in.get();
    }
    try {
      return std::stoi(tok);
    } catch (...) {
      throw FormatError(std::string("read_pgm: bad ") + what + " in " +
                        path.string());
    }
  };
  const int cols = next_int("width");
  const int rows = next_int("height");
  const int maxval = next_int("maxval");
  if (cols <= 0 || rows <= 0 || maxval != 255)
    throw FormatError("read_pgm: unsupported header in " + path.string());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw FormatError("read_pgm: truncated pixel data in " + path.string());
  Plane image(rows, cols);
  for (std::size_t i = 0; i < bytes.size(); ++i) image[i] = bytes[i] / 255.0;
  return image;
}

// ---------------------------------------------------------------------------
// Groundtruth text: one comma-separated `x,y,w,h` line per frame, x = column.

inline std::string format_groundtruth_line(const BBox& box) {
  std::ostringstream out;
  out << box.col << "," << box.row << "," << box.width << "," << box.height;
  return out.str();
}

inline BBox parse_groundtruth_line(const std::string& line, int line_number) {
  std::istringstream in(line);
  double vals[4];
  char sep = ',';
  for (int i = 0; i < 4; ++i) {
    if (!(in >> vals[i]) || (i < 3 && !(in >> sep)) || (i < 3 && sep != ','))
      throw FormatError("groundtruth line " + std::to_string(line_number) +
                        " is not `x,y,w,h`: \"" + line + "\"");
  }
  return BBox{vals[1], vals[0], vals[3], vals[2]};
}

/// Load a sequence directory: ordered .pgm frames plus groundtruth.txt.
inline Sequence load_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw IoError("load_sequence: " + dir.string() + " is not a directory");
  std::vector<fs::path> frame_files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      frame_files.push_back(entry.path());
  std::sort(frame_files.begin(), frame_files.end());

  const fs::path gt_path = dir / "groundtruth.txt";
  std::ifstream gt(gt_path);
  if (!gt) throw IoError("load_sequence: missing " + gt_path.string());
  std::vector<BBox> boxes;
  std::string line;
  int line_number = 0;
  while (std::getline(gt, line)) {
    ++line_number;
    if (line.empty()) continue;
    boxes.push_back(parse_groundtruth_line(line, line_number));
  }
  if (boxes.size() != frame_files.size())
    throw FormatError("load_sequence: " + std::to_string(frame_files.size()) +
                      " frames but " + std::to_string(boxes.size()) +
                      " groundtruth lines in " + gt_path.string());

  Sequence seq;
  seq.name = dir.filename().string();
  for (const fs::path& p : frame_files) seq.frames.push_back(read_pgm(p));
  seq.groundtruth = std::move(boxes);
  return seq;
}

inline void save_sequence(const std::filesystem::path& dir, const Sequence& seq) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream gt(dir / "groundtruth.txt");
  if (!gt) throw IoError("save_sequence: cannot write groundtruth in " + dir.string());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05zu.pgm", i);
    write_pgm(dir / name, seq.frames[i]);
    gt << format_groundtruth_line(seq.groundtruth[i]) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Synthetic benchmark generation. Everything is a pure function of
// (config, seed): reruns produce byte-identical data.

namespace detail {

/// Smooth value noise: bilinear interpolation of a coarse random lattice.
inline Plane value_noise(int rows, int cols, int lattice_step, Rng& rng) {
  const int lr = rows / lattice_step + 2;
  const int lc = cols / lattice_step + 2;
  Plane lattice(lr, lc);
  for (double& v : lattice) v = rng.uniform();
  Plane out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const double fr = static_cast<double>(r) / lattice_step;
    const int r0 = static_cast<int>(fr);
    const double tr = fr - r0;
    for (int c = 0; c < cols; ++c) {
      const double fc = static_cast<double>(c) / lattice_step;
      const int c0 = static_cast<int>(fc);
      const double tc = fc - c0;
      out(r, c) = (1 - tr) * ((1 - tc) * lattice(r0, c0) + tc * lattice(r0, c0 + 1)) +
                  tr * ((1 - tc) * lattice(r0 + 1, c0) + tc * lattice(r0 + 1, c0 + 1));
    }
  }
  return out;
}

/// The shared target pattern: high-contrast oriented gratings inside a soft
/// circular mask, so HOG sees stable structure and intensity filters see a
/// distinctive blob.
inline Plane make_target_texture(int size, Rng& rng) {
  Plane tex(size, size);
  const double phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double angle = rng.uniform(0.0, std::numbers::pi);
  const double freq1 = rng.uniform(2.5, 3.5);
  const double freq2 = rng.uniform(4.5, 6.0);
  const double cx = (size - 1) / 2.0;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double u = (r - cx) / size, v = (c - cx) / size;
      const double a = u * std::cos(angle) + v * std::sin(angle);
      const double b = -u * std::sin(angle) + v * std::cos(angle);
      double val = 0.5 +
                   0.28 * std::sin(2.0 * std::numbers::pi * freq1 * a + phase1) +
                   0.22 * std::sin(2.0 * std::numbers::pi * freq2 * b + phase2);
      const double radius = std::sqrt(u * u + v * v);
      const double mask = std::clamp((0.5 - radius) / 0.12, 0.0, 1.0);
      tex(r, c) = std::clamp(val, 0.02, 0.98) * mask;
    }
  }
  return tex;
}

/// Alpha-stamp the target onto a background, centered at `center`.
inline void stamp_target(Plane& image, const Plane& tex, const Point2& center) {
  const int size = tex.rows();
  const int r0 = static_cast<int>(std::lround(center.row)) - size / 2;
  const int c0 = static_cast<int>(std::lround(center.col)) - size / 2;
  const double cx = (size - 1) / 2.0;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const int ir = r0 + r, ic = c0 + c;
      if (ir < 0 || ir >= image.rows() || ic < 0 || ic >= image.cols()) continue;
      const double u = (r - cx) / size, v = (c - cx) / size;
      const double radius = std::sqrt(u * u + v * v);
      const double alpha = std::clamp((0.5 - radius) / 0.12, 0.0, 1.0);
      image(ir, ic) = (1.0 - alpha) * image(ir, ic) + alpha * tex(r, c);
    }
  }
}

/// Scatter soft elliptical blobs and hard bars; both carry gradients so
/// clutter genuinely competes with the target under HOG.
inline void add_clutter(Plane& image, double density, Rng& rng) {
  const double area = static_cast<double>(image.rows()) * image.cols();
  const int blobs = static_cast<int>(density * area / 2500.0);
  for (int i = 0; i < blobs; ++i) {
    const double cr = rng.uniform(0.0, image.rows() - 1.0);
    const double cc = rng.uniform(0.0, image.cols() - 1.0);
    const double ar = rng.uniform(3.0, 14.0);
    const double ac = rng.uniform(3.0, 14.0);
    const double gain = rng.uniform(-0.45, 0.45);
    const bool hard = rng.uniform() < 0.4;
    const int rr = static_cast<int>(2.5 * ar), rc = static_cast<int>(2.5 * ac);
    for (int r = std::max(0, static_cast<int>(cr) - rr);
         r <= std::min(image.rows() - 1, static_cast<int>(cr) + rr); ++r)
      for (int c = std::max(0, static_cast<int>(cc) - rc);
           c <= std::min(image.cols() - 1, static_cast<int>(cc) + rc); ++c) {
        const double dr = (r - cr) / ar, dc = (c - cc) / ac;
        const double d2 = dr * dr + dc * dc;
        const double w = hard ? (d2 <= 1.0 ? 1.0 : 0.0) : std::exp(-d2);
        image(r, c) = std::clamp(image(r, c) + gain * w, 0.0, 1.0);
      }
  }
}

}  // namespace detail

struct DetectionSynthConfig {
  int count = 268;        // total images (flips included when enabled)
  int rows = 180;         // in the paper's 150..200 crop range
  int cols = 180;
  int target_size = 60;   // matches the default filter window
  double clutter_density = 0.5;
  double illumination_jitter = 0.15;  // per-image gain/offset range
  bool include_flips = true;          // second half mirrors the first
};

inline LabeledImage flip_horizontal(const LabeledImage& labeled);

/// Deterministic detection benchmark: one shared target texture per seed,
/// stamped at a random interior center over cluttered background with
/// per-image illumination gain/offset.
inline std::vector<LabeledImage> synth_detection_set(
    const DetectionSynthConfig& cfg, std::uint64_t seed) {
  if (cfg.count < 1) throw ArgumentError("synth_detection_set: count must be >= 1");
  if (cfg.rows < cfg.target_size + 20 || cfg.cols < cfg.target_size + 20)
    throw ArgumentError("synth_detection_set: image too small for the target");
  Rng texture_rng(derive_seed(seed, 0));
  const Plane texture = detail::make_target_texture(cfg.target_size, texture_rng);

  const int base_count = cfg.include_flips ? (cfg.count + 1) / 2 : cfg.count;
  std::vector<LabeledImage> out;
  out.reserve(cfg.count);
  const double margin = cfg.target_size / 2.0 + 8.0;
  for (int i = 0; i < base_count; ++i) {
    Rng rng(derive_seed(seed, 1 + i));
    Plane image = detail::value_noise(cfg.rows, cfg.cols, 24, rng);
    for (double& v : image) v = 0.25 + 0.35 * v;
    detail::add_clutter(image, cfg.clutter_density, rng);
    const Point2 center{rng.uniform(margin, cfg.rows - 1 - margin),
                        rng.uniform(margin, cfg.cols - 1 - margin)};
    detail::stamp_target(image, texture, center);
    if (cfg.illumination_jitter > 0.0) {
      const double gain = 1.0 + rng.uniform(-cfg.illumination_jitter,
                                            cfg.illumination_jitter);
      const double offset = rng.uniform(-cfg.illumination_jitter / 2.0,
                                        cfg.illumination_jitter / 2.0);
      for (double& v : image) v = std::clamp(gain * v + offset, 0.0, 1.0);
    }
    LabeledImage item{std::move(image), center,
                      BBox::centered(center, cfg.target_size, cfg.target_size)};
    out.push_back(std::move(item));
  }
  if (cfg.include_flips) {
    const int flips = cfg.count - base_count;
    for (int i = 0; i < flips; ++i) out.push_back(flip_horizontal(out[i]));
  }
  return out;
}

struct NoiseBurst {
  int first_frame = -1;  // inclusive; negative disables
  int last_frame = -1;   // inclusive
  double sigma = 0.0;
};

struct OcclusionWindow {
  int first_frame = -1;  // inclusive; negative disables
  int last_frame = -1;   // inclusive
};

struct SequenceSynthConfig {
  int length = 100;
  int rows = 480;
  int cols = 640;
  int target_size = 60;
  double velocity = 1.0;       // pixels per frame along a random heading
  double jitter = 0.3;         // per-frame Gaussian wobble, pixels
  double clutter_density = 0.25;
  NoiseBurst noise;
  OcclusionWindow occlusion;
};

/// Deterministic tracking sequence: constant-velocity target with jitter,
/// bouncing off a safety margin, optional frame-noise burst and occluder.
inline Sequence synth_sequence(const SequenceSynthConfig& cfg, std::uint64_t seed) {
  if (cfg.length < 1) throw ArgumentError("synth_sequence: length must be >= 1");
  Rng rng(derive_seed(seed, 0));
  Rng texture_rng(derive_seed(seed, 1));
  const Plane texture = detail::make_target_texture(cfg.target_size, texture_rng);
  Plane background = detail::value_noise(cfg.rows, cfg.cols, 32, rng);
  for (double& v : background) v = 0.25 + 0.35 * v;
  detail::add_clutter(background, cfg.clutter_density, rng);

  const double margin = 1.5 * cfg.target_size / 2.0 + 12.0;
  Point2 pos{rng.uniform(margin, cfg.rows - 1 - margin),
             rng.uniform(margin, cfg.cols - 1 - margin)};
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double vr = cfg.velocity * std::sin(heading);
  double vc = cfg.velocity * std::cos(heading);

  Sequence seq;
  seq.name = "synth";
  for (int f = 0; f < cfg.length; ++f) {
    Plane frame = background;
    detail::stamp_target(frame, texture, pos);
    if (cfg.occlusion.first_frame >= 0 && f >= cfg.occlusion.first_frame &&
        f <= cfg.occlusion.last_frame) {
      const int half = cfg.target_size / 2 + 2;
      for (int r = std::max(0, static_cast<int>(pos.row) - half);
           r <= std::min(cfg.rows - 1, static_cast<int>(pos.row) + half); ++r)
        for (int c = std::max(0, static_cast<int>(pos.col) - half);
             c <= std::min(cfg.cols - 1, static_cast<int>(pos.col) + half); ++c)
          frame(r, c) = 0.5;
    }
    if (cfg.noise.first_frame >= 0 && f >= cfg.noise.first_frame &&
        f <= cfg.noise.last_frame && cfg.noise.sigma > 0.0) {
      Rng noise_rng(derive_seed(seed, 1000 + f));
      for (double& v : frame) v += cfg.noise.sigma * noise_rng.gaussian();
    }
    seq.frames.push_back(std::move(frame));
    seq.groundtruth.push_back(
        BBox::centered(pos, cfg.target_size, cfg.target_size));

    pos.row += vr + cfg.jitter * rng.gaussian();
    pos.col += vc + cfg.jitter * rng.gaussian();
    if (pos.row < margin) { pos.row = margin; vr = std::abs(vr); }
    if (pos.row > cfg.rows - 1 - margin) { pos.row = cfg.rows - 1 - margin; vr = -std::abs(vr); }
    if (pos.col < margin) { pos.col = margin; vc = std::abs(vc); }
    if (pos.col > cfg.cols - 1 - margin) { pos.col = cfg.cols - 1 - margin; vc = -std::abs(vc); }
  }
  return seq;
}

/// i.i.d. zero-mean Gaussian noise in normalized intensity units.
inline Plane add_gaussian_noise(const Plane& image, double sigma_n,
                                std::uint64_t seed) {
  if (sigma_n < 0.0) throw ArgumentError("add_gaussian_noise: sigma must be >= 0");
  if (sigma_n == 0.0) return image;
  Rng rng(seed);
  Plane out = image;
  for (double& v : out) v += sigma_n * rng.gaussian();
  return out;
}

inline LabeledImage flip_horizontal(const LabeledImage& labeled) {
  const Plane& src = labeled.image;
  Plane out(src.rows(), src.cols());
  for (int r = 0; r < src.rows(); ++r)
    for (int c = 0; c < src.cols(); ++c) out(r, c) = src(r, src.cols() - 1 - c);
  LabeledImage flipped;
  flipped.image = std::move(out);
  flipped.center = {labeled.center.row, src.cols() - 1 - labeled.center.col};
  if (labeled.bbox) {
    // Pixel-index mirroring (c -> W-1-c), so the box center tracks the
    // flipped point center exactly.
    const BBox& b = *labeled.bbox;
    flipped.bbox =
        BBox{b.row, src.cols() - 1 - b.col - b.width, b.height, b.width};
  }
  return flipped;
}

/// Rotate by `rotation_deg` and scale by `scale` about the image center,
/// with bilinear sampling and replicated edges. The annotated center moves
/// under the same map; leaving the image is an error.
inline LabeledImage affine_perturb(const LabeledImage& labeled,
                                   double rotation_deg, double scale) {
  if (scale <= 0.0) throw ArgumentError("affine_perturb: scale must be positive");
  const Plane& src = labeled.image;
  const double theta = rotation_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double cr = (src.rows() - 1) / 2.0, cc = (src.cols() - 1) / 2.0;

  Plane out(src.rows(), src.cols());
  // Inverse map: destination -> source.
  const double inv = 1.0 / scale;
  for (int r = 0; r < src.rows(); ++r) {
    for (int c = 0; c < src.cols(); ++c) {
      const double dr = r - cr, dc = c - cc;
      const double sr = cr + inv * (cos_t * dr + sin_t * dc);
      const double sc = cc + inv * (-sin_t * dr + cos_t * dc);
      const double fr = std::clamp(sr, 0.0, src.rows() - 1.0);
      const double fc = std::clamp(sc, 0.0, src.cols() - 1.0);
      const int r0 = std::min(static_cast<int>(fr), src.rows() - 2);
      const int c0 = std::min(static_cast<int>(fc), src.cols() - 2);
      const double tr = fr - r0, tc = fc - c0;
      out(r, c) = (1 - tr) * ((1 - tc) * src(r0, c0) + tc * src(r0, c0 + 1)) +
                  tr * ((1 - tc) * src(r0 + 1, c0) + tc * src(r0 + 1, c0 + 1));
    }
  }
  const double dr = labeled.center.row - cr, dc = labeled.center.col - cc;
  const Point2 center{cr + scale * (cos_t * dr - sin_t * dc),
                      cc + scale * (sin_t * dr + cos_t * dc)};
  if (center.row < 0 || center.row > src.rows() - 1 || center.col < 0 ||
      center.col > src.cols() - 1)
    throw ArgumentError("affine_perturb: transformed center leaves the image");
  LabeledImage result;
  result.image = std::move(out);
  result.center = center;
  if (labeled.bbox)
    result.bbox = BBox::centered(center, labeled.bbox->height * scale,
                                 labeled.bbox->width * scale);
  return result;
}

// ---------------------------------------------------------------------------
// Detection-set persistence and the dataset manifest.

inline void save_detection_set(const std::filesystem::path& dir,
                               const std::vector<LabeledImage>& items) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream gt(dir / "groundtruth.txt");
  if (!gt) throw IoError("save_detection_set: cannot write groundtruth in " +
                         dir.string());
  for (std::size_t i = 0; i < items.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05zu.pgm", i);
    write_pgm(dir / name, items[i].image);
    const BBox box = items[i].bbox ? *items[i].bbox
                                   : BBox::centered(items[i].center, 1, 1);
    gt << format_groundtruth_line(box) << "\n";
  }
}

inline std::vector<LabeledImage> load_detection_set(
    const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw IoError("load_detection_set: " + dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::ifstream gt(dir / "groundtruth.txt");
  if (!gt) throw IoError("load_detection_set: missing groundtruth.txt in " +
                         dir.string());
  std::vector<BBox> boxes;
  std::string line;
  int line_number = 0;
  while (std::getline(gt, line)) {
    ++line_number;
    if (line.empty()) continue;
    boxes.push_back(parse_groundtruth_line(line, line_number));
  }
  if (boxes.size() != files.size())
    throw FormatError("load_detection_set: " + std::to_string(files.size()) +
                      " images but " + std::to_string(boxes.size()) +
                      " groundtruth lines in " + dir.string());
  std::vector<LabeledImage> items;
  items.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    LabeledImage item;
    item.image = read_pgm(files[i]);
    item.bbox = boxes[i];
    item.center = boxes[i].center();
    items.push_back(std::move(item));
  }
  return items;
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<std::string>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("write_manifest: cannot open " + path.string());
  for (const std::string& e : entries) out << e << "\n";
}

inline std::vector<std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_manifest: cannot open " + path.string());
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) entries.push_back(line);
  return entries;
}

}  // namespace dbcf
