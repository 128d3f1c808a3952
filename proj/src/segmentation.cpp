#include "mgcn/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "mgcn/errors.hpp"

namespace mgcn {

namespace {

// Per-band standardized copy used for all SLIC distances.
std::vector<double> standardize(const HyperspectralImage& img) {
  const size_t np = img.n_pixels();
  const int bands = img.bands;
  std::vector<double> mean(bands, 0.0), sd(bands, 0.0);
  for (size_t p = 0; p < np; ++p) {
    for (int b = 0; b < bands; ++b) mean[b] += img.values[p * bands + b];
  }
  for (int b = 0; b < bands; ++b) mean[b] /= static_cast<double>(np);
  for (size_t p = 0; p < np; ++p) {
    for (int b = 0; b < bands; ++b) {
      const double d = img.values[p * bands + b] - mean[b];
      sd[b] += d * d;
    }
  }
  for (int b = 0; b < bands; ++b) sd[b] = std::max(std::sqrt(sd[b] / np), 1e-12);

  std::vector<double> out(np * bands);
  for (size_t p = 0; p < np; ++p) {
    for (int b = 0; b < bands; ++b) {
      out[p * bands + b] = (img.values[p * bands + b] - mean[b]) / sd[b];
    }
  }
  return out;
}

double spectral_dist2(const std::vector<double>& cube, int bands, size_t p, size_t q) {
  double acc = 0.0;
  for (int b = 0; b < bands; ++b) {
    const double d = cube[p * bands + b] - cube[q * bands + b];
    acc += d * d;
  }
  return acc;
}

struct Center {
  std::vector<double> spectrum;
  double row = 0.0;
  double col = 0.0;
};

// Grid layout whose cell count comes closest to the target.
std::pair<int, int> grid_shape(int height, int width, int n_target) {
  const double s = std::sqrt(static_cast<double>(height) * width / n_target);
  int ny = std::max(1, static_cast<int>(std::lround(height / s)));
  int nx = std::max(1, static_cast<int>(std::lround(width / s)));
  int best_ny = ny, best_nx = nx;
  long best_err = std::labs(static_cast<long>(ny) * nx - n_target);
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int cy = ny + dy, cx = nx + dx;
      if (cy < 1 || cx < 1 || cy > height || cx > width) continue;
      const long err = std::labs(static_cast<long>(cy) * cx - n_target);
      if (err < best_err) {
        best_err = err;
        best_ny = cy;
        best_nx = cx;
      }
    }
  }
  return {best_ny, best_nx};
}

}  // namespace

bool RegionGraph::adjacent(int i, int j) const {
  const auto& a = adjacency[i];
  return std::binary_search(a.begin(), a.end(), j);
}

SegmentationMap slic_segment(const HyperspectralImage& image, int n_target_regions,
                             double compactness, int max_iters) {
  const int h = image.height, w = image.width, bands = image.bands;
  const long n_pixels = static_cast<long>(h) * w;
  if (n_target_regions < 1 || n_target_regions > n_pixels) {
    throw ConfigError("slic_segment: region target " + std::to_string(n_target_regions) +
                      " outside [1, " + std::to_string(n_pixels) + "]");
  }
  if (compactness <= 0.0) throw ConfigError("slic_segment: compactness must be positive");
  if (max_iters < 1) throw ConfigError("slic_segment: max_iters must be at least 1");

  const std::vector<double> cube = standardize(image);
  auto pix = [w](int r, int c) { return static_cast<size_t>(r) * w + c; };

  // spectral gradient for the 3x3 perturbation of grid centers
  auto gradient = [&](int r, int c) {
    const int r0 = std::max(r - 1, 0), r1 = std::min(r + 1, h - 1);
    const int c0 = std::max(c - 1, 0), c1 = std::min(c + 1, w - 1);
    return std::sqrt(spectral_dist2(cube, bands, pix(r, c0), pix(r, c1))) +
           std::sqrt(spectral_dist2(cube, bands, pix(r0, c), pix(r1, c)));
  };

  auto [ny, nx] = grid_shape(h, w, n_target_regions);
  std::vector<Center> centers;
  centers.reserve(static_cast<size_t>(ny) * nx);
  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      int r = std::min(static_cast<int>((gy + 0.5) * h / ny), h - 1);
      int c = std::min(static_cast<int>((gx + 0.5) * w / nx), w - 1);
      int best_r = r, best_c = c;
      double best_g = gradient(r, c);
      for (int rr = std::max(r - 1, 0); rr <= std::min(r + 1, h - 1); ++rr) {
        for (int cc = std::max(c - 1, 0); cc <= std::min(c + 1, w - 1); ++cc) {
          const double g = gradient(rr, cc);
          if (g < best_g) {
            best_g = g;
            best_r = rr;
            best_c = cc;
          }
        }
      }
      Center ctr;
      ctr.row = best_r;
      ctr.col = best_c;
      ctr.spectrum.assign(cube.begin() + static_cast<long>(pix(best_r, best_c)) * bands,
                          cube.begin() + static_cast<long>(pix(best_r, best_c) + 1) * bands);
      centers.push_back(std::move(ctr));
    }
  }
  const int k = static_cast<int>(centers.size());

  const double spacing = std::sqrt(static_cast<double>(n_pixels) / n_target_regions);
  const int win = std::max(1, static_cast<int>(std::ceil(spacing)));
  const double spatial_weight = compactness / spacing;

  // start from the pixel's grid cell so every pixel always has a label
  std::vector<int> label(n_pixels);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int gy = std::min(r * ny / h, ny - 1);
      const int gx = std::min(c * nx / w, nx - 1);
      label[pix(r, c)] = gy * nx + gx;
    }
  }

  std::vector<double> best_d(n_pixels);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::fill(best_d.begin(), best_d.end(), std::numeric_limits<double>::infinity());
    std::vector<int> next = label;

    // claim pass: centers visited in id order, strict improvement only,
    // so equal distances resolve to the lowest center id
    for (int cid = 0; cid < k; ++cid) {
      const Center& ctr = centers[cid];
      const int r0 = std::max(static_cast<int>(ctr.row) - win, 0);
      const int r1 = std::min(static_cast<int>(ctr.row) + win, h - 1);
      const int c0 = std::max(static_cast<int>(ctr.col) - win, 0);
      const int c1 = std::min(static_cast<int>(ctr.col) + win, w - 1);
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          const size_t p = pix(r, c);
          double spec = 0.0;
          for (int b = 0; b < bands; ++b) {
            const double d = cube[p * bands + b] - ctr.spectrum[b];
            spec += d * d;
          }
          const double dr = r - ctr.row, dc = c - ctr.col;
          const double d = std::sqrt(spec) + spatial_weight * std::sqrt(dr * dr + dc * dc);
          if (d < best_d[p]) {
            best_d[p] = d;
            next[p] = cid;
          }
        }
      }
    }

    bool changed = false;
    for (long p = 0; p < n_pixels; ++p) {
      if (next[p] != label[p]) {
        changed = true;
        break;
      }
    }
    label.swap(next);
    if (!changed) break;

    // center update
    std::vector<std::vector<double>> acc(k, std::vector<double>(bands + 3, 0.0));
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        auto& a = acc[label[pix(r, c)]];
        const size_t p = pix(r, c);
        for (int b = 0; b < bands; ++b) a[b] += cube[p * bands + b];
        a[bands] += r;
        a[bands + 1] += c;
        a[bands + 2] += 1.0;
      }
    }
    for (int cid = 0; cid < k; ++cid) {
      const double count = acc[cid][bands + 2];
      if (count == 0.0) continue;  // empty cluster keeps its previous center
      for (int b = 0; b < bands; ++b) centers[cid].spectrum[b] = acc[cid][b] / count;
      centers[cid].row = acc[cid][bands] / count;
      centers[cid].col = acc[cid][bands + 1] / count;
    }
  }

  // --- connectivity enforcement ---------------------------------------
  // 4-connected components of the label map; the largest component of each
  // cluster id keeps it, the rest are orphans merged into the adjacent
  // kept region with the nearest mean spectrum.
  std::vector<int> comp(n_pixels, -1);
  struct Component {
    int cluster = 0;
    long size = 0;
    std::vector<double> mean;
    std::vector<long> pixels;
  };
  std::vector<Component> comps;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const long start = static_cast<long>(pix(r, c));
      if (comp[start] >= 0) continue;
      const int cid = static_cast<int>(comps.size());
      Component cm;
      cm.cluster = label[start];
      cm.mean.assign(bands, 0.0);
      std::queue<long> q;
      q.push(start);
      comp[start] = cid;
      while (!q.empty()) {
        const long p = q.front();
        q.pop();
        cm.pixels.push_back(p);
        ++cm.size;
        for (int b = 0; b < bands; ++b) cm.mean[b] += cube[static_cast<size_t>(p) * bands + b];
        const int pr = static_cast<int>(p / w), pc = static_cast<int>(p % w);
        const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          const int nr = pr + dr[d], nc = pc + dc[d];
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          const long np = static_cast<long>(pix(nr, nc));
          if (comp[np] < 0 && label[np] == cm.cluster) {
            comp[np] = cid;
            q.push(np);
          }
        }
      }
      for (int b = 0; b < bands; ++b) cm.mean[b] /= static_cast<double>(cm.size);
      comps.push_back(std::move(cm));
    }
  }

  // largest component per cluster is the keeper (first found wins ties)
  std::vector<int> keeper_of_cluster(k, -1);
  for (int i = 0; i < static_cast<int>(comps.size()); ++i) {
    int& keep = keeper_of_cluster[comps[i].cluster];
    if (keep < 0 || comps[i].size > comps[keep].size) keep = i;
  }
  std::vector<bool> kept(comps.size(), false);
  for (int cl = 0; cl < k; ++cl) {
    if (keeper_of_cluster[cl] >= 0) kept[keeper_of_cluster[cl]] = true;
  }

  bool progress = true;
  while (progress) {
    progress = false;
    for (int i = 0; i < static_cast<int>(comps.size()); ++i) {
      if (kept[i]) continue;
      // adjacent kept components of this orphan
      int best = -1;
      double best_dist = 0.0;
      for (long p : comps[i].pixels) {
        const int pr = static_cast<int>(p / w), pc = static_cast<int>(p % w);
        const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          const int nr = pr + dr[d], nc = pc + dc[d];
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          const int oc = comp[pix(nr, nc)];
          if (oc == i || !kept[oc]) continue;
          double dist = 0.0;
          for (int b = 0; b < bands; ++b) {
            const double dd = comps[i].mean[b] - comps[oc].mean[b];
            dist += dd * dd;
          }
          if (best < 0 || dist < best_dist || (dist == best_dist && oc < best)) {
            best = oc;
            best_dist = dist;
          }
        }
      }
      if (best >= 0) {
        // merged pixels are relabeled directly, so no ownership chains form;
        // orphans enclosed only by other orphans resolve on a later pass
        kept[i] = true;
        for (long p : comps[i].pixels) comp[p] = best;
        progress = true;
      }
    }
  }

  // compact ids in order of first appearance (row-major scan)
  SegmentationMap seg;
  seg.height = h;
  seg.width = w;
  seg.region_of.assign(n_pixels, -1);
  std::vector<int> new_id(comps.size(), -1);
  int next_id = 0;
  for (long p = 0; p < n_pixels; ++p) {
    const int c = comp[p];
    if (new_id[c] < 0) new_id[c] = next_id++;
    seg.region_of[p] = new_id[c];
  }
  seg.n_regions = next_id;
  return seg;
}

RegionGraph region_features(const HyperspectralImage& image, const SegmentationMap& seg) {
  if (seg.height != image.height || seg.width != image.width) {
    throw ShapeError("region_features: segmentation does not match image dimensions");
  }
  const int n = seg.n_regions, bands = image.bands;
  RegionGraph g;
  g.features = Matrix(n, bands);
  g.centroids = Matrix(n, 2);
  g.sizes.assign(n, 0);
  g.adjacency.assign(n, {});

  for (int r = 0; r < seg.height; ++r) {
    for (int c = 0; c < seg.width; ++c) {
      const int id = seg.at(r, c);
      ++g.sizes[id];
      for (int b = 0; b < bands; ++b) g.features(id, b) += image.at(r, c, b);
      g.centroids(id, 0) += r;
      g.centroids(id, 1) += c;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int b = 0; b < bands; ++b) g.features(i, b) /= g.sizes[i];
    g.centroids(i, 0) /= g.sizes[i];
    g.centroids(i, 1) /= g.sizes[i];
  }

  // regions are adjacent iff some pixel of one 4-neighbors a pixel of the other
  std::vector<std::vector<int>>& adj = g.adjacency;
  auto link = [&adj](int a, int b) {
    if (a == b) return;
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (int r = 0; r < seg.height; ++r) {
    for (int c = 0; c < seg.width; ++c) {
      if (c + 1 < seg.width) link(seg.at(r, c), seg.at(r, c + 1));
      if (r + 1 < seg.height) link(seg.at(r, c), seg.at(r + 1, c));
    }
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return g;
}

NeighborhoodSets hop_neighborhoods(const std::vector<std::vector<int>>& base_adjacency, int hops) {
  if (hops < 1) throw ConfigError("hop_neighborhoods: hop count must be at least 1");
  const int n = static_cast<int>(base_adjacency.size());
  NeighborhoodSets out;
  out.sets.resize(n);
  std::vector<int> dist(n);
  for (int src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<int> q;
    q.push(src);
    dist[src] = 0;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      if (dist[u] == hops) continue;
      for (int v : base_adjacency[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
      }
    }
    for (int v = 0; v < n; ++v) {
      if (dist[v] >= 0) out.sets[src].push_back(v);
    }
  }
  return out;
}

std::vector<int> region_majority_labels(const SegmentationMap& seg, const GroundTruth& gt) {
  if (seg.height != gt.height || seg.width != gt.width) {
    throw ShapeError("region_majority_labels: segmentation does not match ground truth");
  }
  const int n_classes = gt.n_classes();
  std::vector<std::vector<int>> counts(seg.n_regions, std::vector<int>(n_classes + 1, 0));
  for (size_t p = 0; p < gt.labels.size(); ++p) {
    ++counts[seg.region_of[p]][gt.labels[p]];
  }
  std::vector<int> labels(seg.n_regions, 0);
  for (int i = 0; i < seg.n_regions; ++i) {
    int best = 0, best_count = 0;
    for (int c = 1; c <= n_classes; ++c) {
      if (counts[i][c] > best_count) {
        best_count = counts[i][c];
        best = c;  // strict > keeps the lowest class id on ties
      }
    }
    labels[i] = best;
  }
  return labels;
}

void save_segmentation(const SegmentationMap& seg, const std::string& data_path,
                       const std::string& header_path) {
  save_u16_map(seg.region_of, seg.height, seg.width, data_path, header_path);
}

}  // namespace mgcn
