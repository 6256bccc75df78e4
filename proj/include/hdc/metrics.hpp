#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdc/image.hpp"

namespace hdc::metrics {

/// Foreground pixels of one class. The boundary is every foreground pixel with at least one
/// 4-neighbour outside the foreground; pixels on the image border always count.
class BinaryMask {
  public:
    BinaryMask() = default;
    BinaryMask(std::size_t height, std::size_t width) : h_(height), w_(width), bits_(height * width, 0) {}

    static BinaryMask from_labels(const LabelMap& labels, std::uint8_t cls);
    static BinaryMask from_points(std::size_t height, std::size_t width,
                                  std::span<const std::pair<int, int>> points);  // (y, x)

    std::size_t height() const { return h_; }
    std::size_t width() const { return w_; }
    bool get(std::size_t y, std::size_t x) const { return bits_[y * w_ + x] != 0; }
    void set(std::size_t y, std::size_t x, bool v = true) { bits_[y * w_ + x] = v ? 1 : 0; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    std::vector<std::pair<int, int>> boundary() const;

  private:
    std::size_t h_ = 0, w_ = 0;
    std::vector<std::uint8_t> bits_;
};

double dice(const BinaryMask& a, const BinaryMask& b);  // both empty -> 1

/// A distance that could not be computed because a mask was empty carries the image diagonal
/// and degenerate = true.
struct Distance {
    double value = 0.0;
    bool degenerate = false;
};

// percentile in (0, 100]; 100 gives the classical Hausdorff distance. Nearest-rank percentiles.
Distance hausdorff(const BinaryMask& a, const BinaryMask& b, double percentile = 100.0);
Distance asd(const BinaryMask& a, const BinaryMask& b);

// ceil(q/100 * n)-th smallest value (1-based).
double nearest_rank(std::vector<double> values, double q);

struct SurfaceReport {
    double hd = 0.0, hd95 = 0.0, asd = 0.0;
    bool degenerate = false;
};

// HD, HD95 and ASD from a single pass over the boundary distance lists.
SurfaceReport surface_distances(const BinaryMask& a, const BinaryMask& b);

struct ClassRow {
    std::string label;  // class index or "mean"
    double dsc = 0.0, hd = 0.0, hd95 = 0.0, asd = 0.0;
    std::size_t degenerate_count = 0;
    std::size_t n = 0;
};

struct MetricReport {
    std::string split;
    std::vector<ClassRow> rows;  // one per foreground class, then "mean"

    const ClassRow& mean() const { return rows.back(); }
    std::string to_csv(bool header = true) const;
};

inline constexpr const char* kMetricCsvHeader = "split,class,dsc,hd,hd95,asd,degenerate_count,n";

// Foreground classes 1..classes-1. Degenerate samples are left out of the distance means; a class
// whose samples are all degenerate reports the mean fallback (the image diagonal).
MetricReport evaluate_predictions(const std::string& split, std::span<const LabelMap> predicted,
                                  std::span<const LabelMap> truth, std::size_t classes);

}  // namespace hdc::metrics
