#pragma once

#include <string>
#include <vector>

#include "mgcn/data_io.hpp"
#include "mgcn/matrix.hpp"
#include "mgcn/neighborhoods.hpp"

namespace mgcn {

struct SegmentationMap {
  int height = 0;
  int width = 0;
  int n_regions = 0;
  std::vector<int> region_of;  // row-major, ids 0..n_regions-1

  int at(int r, int c) const { return region_of[static_cast<size_t>(r) * width + c]; }
};

// Region-level view of the cube: one node per region with its mean spectrum.
struct RegionGraph {
  Matrix features;   // n x B, mean spectrum of each region
  Matrix centroids;  // n x 2, mean (row, col) in pixel coordinates
  std::vector<int> sizes;
  std::vector<std::vector<int>> adjacency;  // sorted neighbor lists, no self

  int n() const { return features.rows(); }
  bool adjacent(int i, int j) const;
};

// SLIC over the full spectral vectors, run on a per-band standardized copy of
// the cube. Centers start on a regular grid perturbed to the lowest-gradient
// pixel in a 3x3 window; assignment is restricted to a 2S x 2S window per
// center with d = ||spectral diff|| + (compactness/S) * ||spatial offset||,
// ties going to the lowest center id. A connectivity pass merges orphan
// fragments into the adjacent region with the nearest mean spectrum, so every
// returned region is 4-connected. Fully deterministic.
SegmentationMap slic_segment(const HyperspectralImage& image, int n_target_regions,
                             double compactness, int max_iters);

RegionGraph region_features(const HyperspectralImage& image, const SegmentationMap& seg);

// N_s(i): all nodes within graph distance s of i, plus i itself.
NeighborhoodSets hop_neighborhoods(const std::vector<std::vector<int>>& base_adjacency, int hops);

// Majority ground-truth label per region; ties break to the lowest class id,
// regions with no labeled pixel get 0.
std::vector<int> region_majority_labels(const SegmentationMap& seg, const GroundTruth& gt);

// Region ids as uint16 in the ground-truth raw format.
void save_segmentation(const SegmentationMap& seg, const std::string& data_path,
                       const std::string& header_path);

}  // namespace mgcn
