#include "mgcn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "mgcn/errors.hpp"
#include "mgcn/rng.hpp"

namespace mgcn {

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'G', 'C', 'N', 'A', 'G', 'L', '1'};

std::map<std::string, std::string> read_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open header file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, value;
    if (ls >> key >> value) kv[key] = value;
  }
  return kv;
}

int header_int(const std::map<std::string, std::string>& kv, const std::string& key,
               const std::string& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("header " + path + " is missing key '" + key + "'");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw DataError("header " + path + ": key '" + key + "' is not an integer");
  }
}

std::string header_str(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::string& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("header " + path + " is missing key '" + key + "'");
  return it->second;
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file: " + path);
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<size_t>(size));
  if (size > 0) in.read(bytes.data(), size);
  if (!in) throw DataError("failed reading data file: " + path);
  return bytes;
}

void write_file(const std::string& path, const char* bytes, size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(bytes, static_cast<std::streamsize>(size));
  if (!out) throw DataError("failed writing: " + path);
}

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

int GroundTruth::n_classes() const {
  int c = 0;
  for (int v : labels) c = std::max(c, v);
  return c;
}

HyperspectralImage load_hsi(const std::string& data_path, const std::string& header_path) {
  auto kv = read_header(header_path);
  HyperspectralImage img;
  img.height = header_int(kv, "height", header_path);
  img.width = header_int(kv, "width", header_path);
  img.bands = header_int(kv, "bands", header_path);
  if (img.height < 1 || img.width < 1 || img.bands < 1) {
    throw DataError("header " + header_path + " declares a degenerate cube");
  }
  const std::string dtype = header_str(kv, "dtype", header_path);
  if (dtype != "float32") throw DataError("cube dtype must be float32, got " + dtype);
  const std::string order = header_str(kv, "order", header_path);
  if (order != "bip") throw DataError("cube order must be bip, got " + order);

  const size_t count = static_cast<size_t>(img.height) * img.width * img.bands;
  const auto bytes = read_file(data_path);
  if (bytes.size() != count * 4) {
    throw DataError("cube size mismatch for " + data_path + ": expected " +
                    std::to_string(count * 4) + " bytes, got " + std::to_string(bytes.size()));
  }
  img.values.resize(count);
  for (size_t i = 0; i < count; ++i) {
    float f;
    std::memcpy(&f, bytes.data() + i * 4, 4);
    img.values[i] = static_cast<double>(f);
    if (!std::isfinite(img.values[i])) {
      throw DataError("cube " + data_path + " contains a non-finite value at index " +
                      std::to_string(i));
    }
  }
  return img;
}

void save_hsi(const HyperspectralImage& img, const std::string& data_path,
              const std::string& header_path) {
  std::vector<char> bytes(img.values.size() * 4);
  for (size_t i = 0; i < img.values.size(); ++i) {
    const float f = static_cast<float>(img.values[i]);
    std::memcpy(bytes.data() + i * 4, &f, 4);
  }
  write_file(data_path, bytes.data(), bytes.size());

  std::ostringstream hdr;
  hdr << "height " << img.height << "\n"
      << "width " << img.width << "\n"
      << "bands " << img.bands << "\n"
      << "dtype float32\n"
      << "order bip\n";
  const std::string s = hdr.str();
  write_file(header_path, s.data(), s.size());
}

void save_u16_map(const std::vector<int>& map, int height, int width,
                  const std::string& data_path, const std::string& header_path) {
  if (map.size() != static_cast<size_t>(height) * width) {
    throw ShapeError("map size does not match declared dimensions");
  }
  std::vector<char> bytes(map.size() * 2);
  for (size_t i = 0; i < map.size(); ++i) {
    if (map[i] < 0 || map[i] > 65535) {
      throw DataError("map value " + std::to_string(map[i]) + " does not fit uint16");
    }
    const uint16_t v = static_cast<uint16_t>(map[i]);
    std::memcpy(bytes.data() + i * 2, &v, 2);
  }
  write_file(data_path, bytes.data(), bytes.size());

  std::ostringstream hdr;
  hdr << "height " << height << "\n"
      << "width " << width << "\n"
      << "bands 1\n"
      << "dtype uint16\n"
      << "order bip\n";
  const std::string s = hdr.str();
  write_file(header_path, s.data(), s.size());
}

GroundTruth load_labels(const std::string& data_path, const std::string& header_path) {
  auto kv = read_header(header_path);
  GroundTruth gt;
  gt.height = header_int(kv, "height", header_path);
  gt.width = header_int(kv, "width", header_path);
  const std::string dtype = header_str(kv, "dtype", header_path);
  if (dtype != "uint16") throw DataError("label dtype must be uint16, got " + dtype);

  const size_t count = static_cast<size_t>(gt.height) * gt.width;
  const auto bytes = read_file(data_path);
  if (bytes.size() != count * 2) {
    throw DataError("label size mismatch for " + data_path + ": expected " +
                    std::to_string(count * 2) + " bytes, got " + std::to_string(bytes.size()));
  }
  gt.labels.resize(count);
  for (size_t i = 0; i < count; ++i) {
    uint16_t v;
    std::memcpy(&v, bytes.data() + i * 2, 2);
    gt.labels[i] = v;
  }

  // class ids must form a contiguous 1..C range
  const int c = gt.n_classes();
  std::vector<bool> seen(static_cast<size_t>(c) + 1, false);
  for (int v : gt.labels) seen[v] = true;
  for (int k = 1; k <= c; ++k) {
    if (!seen[k]) {
      throw DataError("label map " + data_path + " skips class id " + std::to_string(k));
    }
  }
  return gt;
}

void save_labels(const GroundTruth& gt, const std::string& data_path,
                 const std::string& header_path) {
  save_u16_map(gt.labels, gt.height, gt.width, data_path, header_path);
}

ClassLayout parse_layout(const std::string& name) {
  if (name == "blocks") return ClassLayout::kBlocks;
  if (name == "stripes") return ClassLayout::kStripes;
  if (name == "split_pairs") return ClassLayout::kSplitPairs;
  throw ConfigError("unknown class layout '" + name + "' (blocks|stripes|split_pairs)");
}

std::string layout_name(ClassLayout layout) {
  switch (layout) {
    case ClassLayout::kBlocks: return "blocks";
    case ClassLayout::kStripes: return "stripes";
    case ClassLayout::kSplitPairs: return "split_pairs";
  }
  return "?";
}

namespace {

// Assigns a class id in 1..C to every pixel according to the layout.
std::vector<int> layout_classes(int height, int width, int n_classes, ClassLayout layout) {
  std::vector<int> cls(static_cast<size_t>(height) * width, 0);
  auto stripe_of = [](int coord, int extent, int n_stripes) {
    int s = coord * n_stripes / extent;
    return std::min(s, n_stripes - 1);
  };
  switch (layout) {
    case ClassLayout::kStripes: {
      for (int r = 0; r < height; ++r) {
        const int c = stripe_of(r, height, n_classes) + 1;
        for (int x = 0; x < width; ++x) cls[static_cast<size_t>(r) * width + x] = c;
      }
      break;
    }
    case ClassLayout::kBlocks: {
      const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_classes))));
      for (int r = 0; r < height; ++r) {
        for (int x = 0; x < width; ++x) {
          const int cell = stripe_of(r, height, grid) * grid + stripe_of(x, width, grid);
          cls[static_cast<size_t>(r) * width + x] = cell % n_classes + 1;
        }
      }
      break;
    }
    case ClassLayout::kSplitPairs: {
      // 2*C vertical stripes; class k occupies stripes k and k+C, so every
      // class appears in two blocks roughly half the image apart.
      const int n_stripes = 2 * n_classes;
      for (int r = 0; r < height; ++r) {
        for (int x = 0; x < width; ++x) {
          const int s = stripe_of(x, width, n_stripes);
          cls[static_cast<size_t>(r) * width + x] = s % n_classes + 1;
        }
      }
      break;
    }
  }
  return cls;
}

}  // namespace

SynthScene synth_hsi(int height, int width, int bands, int n_classes, ClassLayout layout,
                     double noise_sigma, uint64_t seed) {
  if (n_classes < 2) throw ConfigError("synth_hsi: need at least 2 classes");
  if (height < 1 || width < 1 || bands < 1) throw ConfigError("synth_hsi: degenerate dimensions");
  if (noise_sigma < 0.0) throw ConfigError("synth_hsi: noise_sigma must be non-negative");

  std::vector<int> cls = layout_classes(height, width, n_classes, layout);
  std::vector<int> counts(static_cast<size_t>(n_classes) + 1, 0);
  for (int c : cls) ++counts[c];
  for (int k = 1; k <= n_classes; ++k) {
    if (counts[k] < 60) {
      throw ConfigError("synth_hsi: layout gives class " + std::to_string(k) + " only " +
                        std::to_string(counts[k]) + " pixels (need >= 60)");
    }
  }

  const double min_dist = 3.0 * noise_sigma * std::sqrt(static_cast<double>(bands));
  if (min_dist > 2.0) {
    // unit vectors are at most distance 2 apart
    throw ConfigError("synth_hsi: noise_sigma too large for unit-norm class means");
  }

  Rng rng = make_rng(seed);
  Matrix means(n_classes, bands);
  const int max_attempts = 10000;
  for (int k = 0; k < n_classes; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
      std::vector<double> v(bands);
      double norm = 0.0;
      for (double& x : v) {
        x = normal(rng);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (double& x : v) x = quantize_f32(x / norm);
      bool ok = true;
      for (int p = 0; p < k && ok; ++p) {
        double d2 = 0.0;
        for (int b = 0; b < bands; ++b) {
          const double d = means(p, b) - v[b];
          d2 += d * d;
        }
        if (std::sqrt(d2) < min_dist) ok = false;
      }
      if (ok) {
        for (int b = 0; b < bands; ++b) means(k, b) = v[b];
        placed = true;
      }
    }
    if (!placed) {
      throw ConfigError("synth_hsi: could not place " + std::to_string(n_classes) +
                        " class means at pairwise distance " + std::to_string(min_dist));
    }
  }

  SynthScene scene;
  scene.class_means = means;
  scene.truth.height = height;
  scene.truth.width = width;
  scene.truth.labels = cls;
  scene.image.height = height;
  scene.image.width = width;
  scene.image.bands = bands;
  scene.image.values.resize(static_cast<size_t>(height) * width * bands);
  size_t idx = 0;
  for (int r = 0; r < height; ++r) {
    for (int x = 0; x < width; ++x) {
      const int k = cls[static_cast<size_t>(r) * width + x] - 1;
      for (int b = 0; b < bands; ++b) {
        double v = means(k, b);
        if (noise_sigma > 0.0) v += noise_sigma * normal(rng);
        scene.image.values[idx++] = quantize_f32(v);
      }
    }
  }
  return scene;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream out;
  out.write(kCheckpointMagic, 8);
  auto put_u32 = [&out](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_u64 = [&out](uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  put_u32(ckpt.version);
  put_u64(ckpt.iterations);
  put_u32(static_cast<uint32_t>(ckpt.config_json.size()));
  out.write(ckpt.config_json.data(), static_cast<std::streamsize>(ckpt.config_json.size()));
  put_u32(static_cast<uint32_t>(ckpt.params.size()));
  for (const auto& [name, m] : ckpt.params) {
    put_u32(static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(static_cast<uint32_t>(m.rows()));
    put_u32(static_cast<uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  const std::string bytes = out.str();
  write_file(path, bytes.data(), bytes.size());
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto bytes = read_file(path);
  size_t pos = 0;
  auto need = [&](size_t n) {
    if (pos + n > bytes.size()) {
      throw DataError("checkpoint " + path + " is truncated (at byte " + std::to_string(pos) +
                      ")");
    }
  };
  auto get_u32 = [&]() {
    need(4);
    uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };
  auto get_u64 = [&]() {
    need(8);
    uint64_t v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  };

  need(8);
  if (std::memcmp(bytes.data(), kCheckpointMagic, 7) != 0) {
    throw DataError("file " + path + " is not a checkpoint (bad magic)");
  }
  if (bytes[7] != kCheckpointMagic[7]) {
    throw DataError("checkpoint " + path + " has unsupported format version tag '" +
                    std::string(1, bytes[7]) + "'");
  }
  pos = 8;

  Checkpoint ckpt;
  ckpt.version = get_u32();
  if (ckpt.version != 1) {
    throw DataError("checkpoint " + path + " has unsupported version " +
                    std::to_string(ckpt.version));
  }
  ckpt.iterations = get_u64();
  const uint32_t json_len = get_u32();
  need(json_len);
  ckpt.config_json.assign(bytes.data() + pos, json_len);
  pos += json_len;

  const uint32_t n = get_u32();
  ckpt.params.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t name_len = get_u32();
    need(name_len);
    std::string name(bytes.data() + pos, name_len);
    pos += name_len;
    const uint32_t rows = get_u32();
    const uint32_t cols = get_u32();
    const size_t count = static_cast<size_t>(rows) * cols;
    need(count * sizeof(double));
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    std::memcpy(m.data(), bytes.data() + pos, count * sizeof(double));
    pos += count * sizeof(double);
    ckpt.params.emplace_back(std::move(name), std::move(m));
  }
  if (pos != bytes.size()) {
    throw DataError("checkpoint " + path + " has " + std::to_string(bytes.size() - pos) +
                    " trailing bytes");
  }
  return ckpt;
}

}  // namespace mgcn
