#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "densecorr/error.hpp"
#include "densecorr/image.hpp"
#include "densecorr/mesh.hpp"

namespace densecorr {

inline constexpr int kMaxPointsPerPart = 14;

/// Image pixels covered by one body part. Pixels are kept sorted and unique.
class PartMask {
 public:
  static PartMask create(int width, int height, PartId part, std::vector<Pixel> pixels) {
    if (width <= 0 || height <= 0) fail(Errc::InvalidArgument, "mask image size must be positive");
    if (!part.is_surface()) fail(Errc::InvalidArgument, "mask part must be in 1..24");
    std::sort(pixels.begin(), pixels.end());
    pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
    if (pixels.empty()) fail(Errc::EmptyInput, "mask for part " + std::to_string(part.value()) + " is empty");
    for (const Pixel& p : pixels)
      if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height)
        fail(Errc::InvalidArgument, "mask pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside image");
    PartMask mask;
    mask.width_ = width;
    mask.height_ = height;
    mask.part_ = part;
    mask.pixels_ = std::move(pixels);
    return mask;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  PartId part() const noexcept { return part_; }
  const std::vector<Pixel>& pixels() const noexcept { return pixels_; }
  std::size_t area() const noexcept { return pixels_.size(); }
  bool contains(Pixel p) const { return std::binary_search(pixels_.begin(), pixels_.end(), p); }

 private:
  int width_ = 0;
  int height_ = 0;
  PartId part_;
  std::vector<Pixel> pixels_;
};

/// Annotation targets for one part, listed in presentation (succession) order.
struct SampledPoints {
  PartId part;
  std::vector<Pixel> points;
};

/// min(14, max(1, round(sqrt(area) / 10))).
inline int choose_point_count(const PartMask& mask) {
  const double raw = std::round(std::sqrt(static_cast<double>(mask.area())) / 10.0);
  return static_cast<int>(std::min<double>(kMaxPointsPerPart, std::max(1.0, raw)));
}

/// Presentation order: four horizontal bands top to bottom, left to right within a band.
inline void order_in_succession(std::vector<Pixel>& points, int image_height) {
  auto band = [image_height](const Pixel& p) { return static_cast<int>((static_cast<long long>(p.y) * 4) / image_height); };
  std::sort(points.begin(), points.end(), [&](const Pixel& a, const Pixel& b) {
    const int ba = band(a), bb = band(b);
    if (ba != bb) return ba < bb;
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  });
}

namespace detail {

inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double squared_distance(const Pixel& p, const Eigen::Vector2d& c) {
  const double dx = p.x - c.x();
  const double dy = p.y - c.y();
  return dx * dx + dy * dy;
}

inline std::vector<Eigen::Vector2d> kmeans_plus_plus(const std::vector<Pixel>& pixels, int k, std::mt19937_64& rng) {
  const auto n = pixels.size();
  std::vector<Eigen::Vector2d> centers;
  centers.reserve(static_cast<std::size_t>(k));
  const auto first = static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n));
  centers.emplace_back(pixels[std::min(first, n - 1)].x, pixels[std::min(first, n - 1)].y);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(pixels[i], centers.back()));
      total += nearest[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = unit_draw(rng) * total;
      double running = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        running += nearest[i];
        if (running > target && nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.emplace_back(pixels[pick].x, pixels[pick].y);
  }
  return centers;
}

}  // namespace detail

/// Sum of squared distances from every mask pixel to its nearest center.
inline double within_cluster_sum_of_squares(const PartMask& mask, const std::vector<Eigen::Vector2d>& centers) {
  double total = 0.0;
  for (const Pixel& p : mask.pixels()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) best = std::min(best, detail::squared_distance(p, c));
    total += best;
  }
  return total;
}

struct KMeansResult {
  std::vector<Eigen::Vector2d> centroids;
  std::vector<int> assignment;
  int iterations = 0;
};

/// Lloyd iterations from a k-means++ start. Empty clusters keep their center.
inline KMeansResult kmeans(const std::vector<Pixel>& pixels, int k, std::uint64_t seed, int max_iterations = 100) {
  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centroids = detail::kmeans_plus_plus(pixels, k, rng);
  result.assignment.assign(pixels.size(), -1);
  for (int iteration = 0; iteration < max_iterations; ++iteration) {
    bool changed = false;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = detail::squared_distance(pixels[i], result.centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (result.assignment[i] != best) {
        result.assignment[i] = best;
        changed = true;
      }
    }
    result.iterations = iteration + 1;
    if (!changed) break;
    std::vector<Eigen::Vector2d> sums(static_cast<std::size_t>(k), Eigen::Vector2d::Zero());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const auto c = static_cast<std::size_t>(result.assignment[i]);
      sums[c] += Eigen::Vector2d(pixels[i].x, pixels[i].y);
      ++counts[c];
    }
    for (std::size_t c = 0; c < sums.size(); ++c)
      if (counts[c] > 0) result.centroids[c] = sums[c] / static_cast<double>(counts[c]);
  }
  return result;
}

/// k roughly equidistant targets inside the mask: k-means centroids snapped
/// to distinct mask pixels, then put in succession order.
inline SampledPoints sample_points(const PartMask& mask, int k, std::uint64_t seed) {
  if (k < 1) fail(Errc::InvalidArgument, "k must be at least 1");
  if (static_cast<std::size_t>(k) > mask.area())
    fail(Errc::KTooLarge, "k = " + std::to_string(k) + " exceeds mask area " + std::to_string(mask.area()));
  const auto& pixels = mask.pixels();
  const auto clusters = kmeans(pixels, k, seed);

  std::vector<bool> taken(pixels.size(), false);
  SampledPoints sampled{mask.part(), {}};
  for (const auto& centroid : clusters.centroids) {
    std::size_t best = pixels.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      if (taken[i]) continue;
      const double d = detail::squared_distance(pixels[i], centroid);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    taken[best] = true;
    sampled.points.push_back(pixels[best]);
  }
  order_in_succession(sampled.points, mask.height());
  return sampled;
}

inline SampledPoints sample_points(const PartMask& mask, std::uint64_t seed) {
  return sample_points(mask, choose_point_count(mask), seed);
}

/// Nonzero pixels of the first channel become mask members.
inline PartMask mask_from_image(const Image& image, PartId part) {
  std::vector<Pixel> pixels;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (image.at(x, y, 0) != 0) pixels.push_back({x, y});
  return PartMask::create(image.width, image.height, part, std::move(pixels));
}

// COCO run-length encoding: column-major runs alternating background/foreground,
// either as an integer list or the compact LEB-style string.

inline std::vector<std::uint32_t> rle_counts_from_string(const std::string& text) {
  std::vector<std::uint32_t> counts;
  std::size_t p = 0;
  while (p < text.size()) {
    long long x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= text.size()) fail(Errc::ParseError, "truncated RLE string");
      const long long c = static_cast<long long>(text[p]) - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    if (x < 0) fail(Errc::ParseError, "negative run in RLE string");
    counts.push_back(static_cast<std::uint32_t>(x));
  }
  return counts;
}

inline std::string rle_counts_to_string(const std::vector<std::uint32_t>& counts) {
  std::string text;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    long long x = counts[i];
    if (i > 2) x -= counts[i - 2];
    bool more = true;
    while (more) {
      char c = static_cast<char>(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      text.push_back(static_cast<char>(c + 48));
    }
  }
  return text;
}

/// Decodes {"size": [h, w], "counts": [...] | "..."} into a mask.
inline PartMask mask_from_rle(const nlohmann::json& segmentation, PartId part) {
  if (!segmentation.is_object() || !segmentation.contains("size") || !segmentation.contains("counts"))
    fail(Errc::SchemaError, "segmentation: expected {size, counts}");
  const auto& size = segmentation["size"];
  if (!size.is_array() || size.size() != 2) fail(Errc::SchemaError, "segmentation/size: expected [height, width]");
  const int height = size[0].get<int>();
  const int width = size[1].get<int>();
  std::vector<std::uint32_t> counts;
  const auto& raw = segmentation["counts"];
  if (raw.is_string()) {
    counts = rle_counts_from_string(raw.get<std::string>());
  } else if (raw.is_array()) {
    for (const auto& c : raw) {
      if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<long long>() >= 0))
        fail(Errc::SchemaError, "segmentation/counts: expected non-negative integers");
      counts.push_back(c.get<std::uint32_t>());
    }
  } else {
    fail(Errc::SchemaError, "segmentation/counts: expected a list or string");
  }
  std::vector<Pixel> pixels;
  const auto total = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  std::uint64_t index = 0;
  bool foreground = false;
  for (std::uint32_t run : counts) {
    if (index + run > total) fail(Errc::SchemaError, "segmentation/counts: runs exceed the image");
    if (foreground)
      for (std::uint64_t i = index; i < index + run; ++i)
        pixels.push_back({static_cast<int>(i / static_cast<std::uint64_t>(height)), static_cast<int>(i % static_cast<std::uint64_t>(height))});
    index += run;
    foreground = !foreground;
  }
  return PartMask::create(width, height, part, std::move(pixels));
}

inline nlohmann::json mask_to_rle(const PartMask& mask) {
  const auto h = static_cast<std::uint64_t>(mask.height());
  std::vector<std::uint64_t> linear;
  for (const Pixel& p : mask.pixels()) linear.push_back(static_cast<std::uint64_t>(p.x) * h + static_cast<std::uint64_t>(p.y));
  std::sort(linear.begin(), linear.end());
  std::vector<std::uint32_t> counts;
  std::uint64_t cursor = 0;
  std::size_t i = 0;
  while (i < linear.size()) {
    counts.push_back(static_cast<std::uint32_t>(linear[i] - cursor));
    std::size_t j = i;
    while (j + 1 < linear.size() && linear[j + 1] == linear[j] + 1) ++j;
    counts.push_back(static_cast<std::uint32_t>(j - i + 1));
    cursor = linear[j] + 1;
    i = j + 1;
  }
  const auto total = static_cast<std::uint64_t>(mask.width()) * h;
  if (cursor < total) counts.push_back(static_cast<std::uint32_t>(total - cursor));
  return nlohmann::json{{"size", {mask.height(), mask.width()}}, {"counts", rle_counts_to_string(counts)}};
}

}  // namespace densecorr
