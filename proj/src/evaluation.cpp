#include "mgcn/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mgcn/errors.hpp"

namespace mgcn {

EvalReport evaluate(const std::vector<int>& predictions, const std::vector<int>& truth,
                    const std::vector<int>& eval_ids, int n_classes) {
  if (eval_ids.empty()) throw ConfigError("evaluate: no evaluation ids");
  EvalReport rep;
  rep.n_classes = n_classes;
  rep.confusion.assign(n_classes, std::vector<int64_t>(n_classes, 0));
  for (int id : eval_ids) {
    const int t = truth[id];
    const int p = predictions[id];
    if (t < 1 || t > n_classes) {
      throw DataError("evaluate: truth label " + std::to_string(t) + " outside 1.." +
                      std::to_string(n_classes));
    }
    if (p < 1 || p > n_classes) {
      throw DataError("evaluate: prediction " + std::to_string(p) + " outside 1.." +
                      std::to_string(n_classes));
    }
    ++rep.confusion[t - 1][p - 1];
  }
  rep.n_eval = static_cast<int64_t>(eval_ids.size());

  int64_t trace = 0;
  int64_t chance_sum = 0;  // sum over classes of row_total * col_total
  rep.per_class_accuracy.assign(n_classes, 0.0);
  rep.class_present.assign(n_classes, false);
  double aa_sum = 0.0;
  int aa_count = 0;
  for (int c = 0; c < n_classes; ++c) {
    int64_t row = 0, col = 0;
    for (int j = 0; j < n_classes; ++j) {
      row += rep.confusion[c][j];
      col += rep.confusion[j][c];
    }
    trace += rep.confusion[c][c];
    chance_sum += row * col;
    if (row > 0) {
      rep.class_present[c] = true;
      rep.per_class_accuracy[c] =
          static_cast<double>(rep.confusion[c][c]) / static_cast<double>(row);
      aa_sum += rep.per_class_accuracy[c];
      ++aa_count;
    }
  }

  rep.oa = static_cast<double>(trace) / static_cast<double>(rep.n_eval);
  rep.aa = aa_count > 0 ? aa_sum / aa_count : 0.0;
  rep.chance_agreement =
      static_cast<double>(chance_sum) / (static_cast<double>(rep.n_eval) * rep.n_eval);

  // kappa from integer counts: (n*trace - sum) / (n^2 - sum)
  const int64_t numer = rep.n_eval * trace - chance_sum;
  const int64_t denom = rep.n_eval * rep.n_eval - chance_sum;
  if (denom == 0) {
    rep.degenerate_chance = true;
    rep.kappa = (trace == rep.n_eval) ? 1.0 : 0.0;
  } else {
    rep.kappa = static_cast<double>(numer) / static_cast<double>(denom);
  }
  return rep;
}

std::vector<int> pixel_expand(const std::vector<int>& region_predictions,
                              const SegmentationMap& seg) {
  if (static_cast<int>(region_predictions.size()) != seg.n_regions) {
    throw ShapeError("pixel_expand: predictions cover " +
                     std::to_string(region_predictions.size()) + " regions, segmentation has " +
                     std::to_string(seg.n_regions));
  }
  std::vector<int> map(seg.region_of.size());
  for (size_t p = 0; p < map.size(); ++p) map[p] = region_predictions[seg.region_of[p]];
  return map;
}

Palette default_palette(int n_classes) {
  static const std::array<unsigned char, 3> table[] = {
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25}, {0, 130, 200},  {245, 130, 48},
      {145, 30, 180},  {70, 240, 240},  {240, 50, 230}, {210, 245, 60}, {250, 190, 212},
      {0, 128, 128},   {220, 190, 255}, {170, 110, 40}, {255, 250, 200}, {128, 0, 0},
      {170, 255, 195}, {128, 128, 0},   {255, 215, 180}, {0, 0, 128},    {128, 128, 128},
  };
  constexpr int table_size = sizeof(table) / sizeof(table[0]);
  Palette palette;
  palette.push_back({0, 0, 0});  // unlabeled
  for (int c = 0; c < n_classes; ++c) palette.push_back(table[c % table_size]);
  return palette;
}

void render_map(const std::vector<int>& class_map, int height, int width,
                const Palette& palette, const std::string& path) {
  if (class_map.size() != static_cast<size_t>(height) * width) {
    throw ShapeError("render_map: map size does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("render_map: cannot write " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(width) * 3);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const int v = class_map[static_cast<size_t>(r) * width + c];
      if (v < 0 || v >= static_cast<int>(palette.size())) {
        throw DataError("render_map: class " + std::to_string(v) + " outside the palette");
      }
      row[c * 3 + 0] = palette[v][0];
      row[c * 3 + 1] = palette[v][1];
      row[c * 3 + 2] = palette[v][2];
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw DataError("render_map: failed writing " + path);
}

std::string format_report(const EvalReport& rep, const std::string& model_name) {
  std::ostringstream out;
  char buf[128];
  out << "model " << model_name << "\n";
  out << "n_eval " << rep.n_eval << "\n";
  std::snprintf(buf, sizeof(buf), "oa %.17g\n", rep.oa);
  out << buf;
  std::snprintf(buf, sizeof(buf), "aa %.17g\n", rep.aa);
  out << buf;
  std::snprintf(buf, sizeof(buf), "kappa %.17g\n", rep.kappa);
  out << buf;
  std::snprintf(buf, sizeof(buf), "chance_agreement %.17g\n", rep.chance_agreement);
  out << buf;
  out << "degenerate_chance " << (rep.degenerate_chance ? 1 : 0) << "\n";
  for (int c = 0; c < rep.n_classes; ++c) {
    if (rep.class_present[c]) {
      std::snprintf(buf, sizeof(buf), "class_%d_accuracy %.17g\n", c + 1,
                    rep.per_class_accuracy[c]);
    } else {
      std::snprintf(buf, sizeof(buf), "class_%d_accuracy absent\n", c + 1);
    }
    out << buf;
  }
  out << "confusion_matrix\n";
  for (int t = 0; t < rep.n_classes; ++t) {
    for (int p = 0; p < rep.n_classes; ++p) {
      out << rep.confusion[t][p];
      out << (p + 1 < rep.n_classes ? ',' : '\n');
    }
  }
  return out.str();
}

void write_report(const EvalReport& report, const std::string& model_name,
                  const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report: " + path);
  out << format_report(report, model_name);
}

}  // namespace mgcn
