#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mgcn/matrix.hpp"

namespace mgcn {

// H x W x B reflectance cube, band-interleaved by pixel. Stored on disk as
// little-endian float32 with a plain-text header sidecar; promoted to double
// in memory.
struct HyperspectralImage {
  int height = 0;
  int width = 0;
  int bands = 0;
  std::vector<double> values;  // ((r*width)+c)*bands + b

  double at(int r, int c, int b) const {
    return values[(static_cast<size_t>(r) * width + c) * bands + b];
  }
  double& at(int r, int c, int b) {
    return values[(static_cast<size_t>(r) * width + c) * bands + b];
  }
  size_t n_pixels() const { return static_cast<size_t>(height) * width; }
};

// H x W label map; 0 = unlabeled, 1..C = class ids (contiguous).
struct GroundTruth {
  int height = 0;
  int width = 0;
  std::vector<int> labels;  // row-major

  int at(int r, int c) const { return labels[static_cast<size_t>(r) * width + c]; }
  int n_classes() const;
};

HyperspectralImage load_hsi(const std::string& data_path, const std::string& header_path);
void save_hsi(const HyperspectralImage& img, const std::string& data_path,
              const std::string& header_path);

GroundTruth load_labels(const std::string& data_path, const std::string& header_path);
void save_labels(const GroundTruth& gt, const std::string& data_path,
                 const std::string& header_path);

// Raw uint16 map writer shared with the segmentation export.
void save_u16_map(const std::vector<int>& map, int height, int width,
                  const std::string& data_path, const std::string& header_path);

enum class ClassLayout { kBlocks, kStripes, kSplitPairs };

ClassLayout parse_layout(const std::string& name);
std::string layout_name(ClassLayout layout);

struct SynthScene {
  HyperspectralImage image;
  GroundTruth truth;
  Matrix class_means;  // n_classes x bands, unit-norm rows
};

// Desk-scale synthetic scene: each class gets a random unit-norm mean
// spectrum (pairwise distance >= 3*noise_sigma*sqrt(bands)) and pixels are
// the class mean plus i.i.d. Gaussian noise. kSplitPairs places each class
// in two spatially distant stripes. Pure function of its arguments; all
// values are float32-exact so a save/load round trip is lossless.
SynthScene synth_hsi(int height, int width, int bands, int n_classes, ClassLayout layout,
                     double noise_sigma, uint64_t seed);

struct Checkpoint {
  uint32_t version = 1;
  std::string config_json;
  uint64_t iterations = 0;
  std::vector<std::pair<std::string, Matrix>> params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mgcn
