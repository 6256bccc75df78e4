#include "hdc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hdc/errors.hpp"

namespace hdc::metrics {

namespace {

void require_same_shape(const char* op, const BinaryMask& a, const BinaryMask& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw ContractError(std::string(op) + ": mask shapes " + std::to_string(a.height()) + "x" +
                            std::to_string(a.width()) + " and " + std::to_string(b.height()) + "x" +
                            std::to_string(b.width()) + " differ");
    }
}

double diagonal(const BinaryMask& m) {
    return std::hypot(double(m.height()), double(m.width()));
}

// For each point of `from`, the Euclidean distance to the nearest point of `to`.
std::vector<double> directed(const std::vector<std::pair<int, int>>& from, const std::vector<std::pair<int, int>>& to) {
    std::vector<double> out(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        long best = std::numeric_limits<long>::max();
        for (const auto& q : to) {
            const long dy = from[i].first - q.first, dx = from[i].second - q.second;
            best = std::min(best, dy * dy + dx * dx);
        }
        out[i] = std::sqrt(double(best));
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

BinaryMask BinaryMask::from_labels(const LabelMap& labels, std::uint8_t cls) {
    BinaryMask m(labels.height, labels.width);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        m.bits_[i] = labels.labels[i] == cls ? 1 : 0;
    }
    return m;
}

BinaryMask BinaryMask::from_points(std::size_t height, std::size_t width,
                                   std::span<const std::pair<int, int>> points) {
    BinaryMask m(height, width);
    for (const auto& [y, x] : points) {
        if (y < 0 || x < 0 || std::size_t(y) >= height || std::size_t(x) >= width) {
            throw ContractError("BinaryMask::from_points: point (" + std::to_string(y) + ", " + std::to_string(x) +
                                ") outside the mask");
        }
        m.set(std::size_t(y), std::size_t(x));
    }
    return m;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::pair<int, int>> BinaryMask::boundary() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t y = 0; y < h_; ++y) {
        for (std::size_t x = 0; x < w_; ++x) {
            if (!get(y, x)) {
                continue;
            }
            const bool edge = y == 0 || x == 0 || y + 1 == h_ || x + 1 == w_ || !get(y - 1, x) || !get(y + 1, x) ||
                              !get(y, x - 1) || !get(y, x + 1);
            if (edge) {
                out.emplace_back(int(y), int(x));
            }
        }
    }
    return out;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape("dice", a, b);
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t y = 0; y < a.height(); ++y) {
        for (std::size_t x = 0; x < a.width(); ++x) {
            const bool pa = a.get(y, x), pb = b.get(y, x);
            na += pa;
            nb += pb;
            inter += pa && pb;
        }
    }
    if (na + nb == 0) {
        return 1.0;
    }
    return 2.0 * double(inter) / double(na + nb);
}

double nearest_rank(std::vector<double> values, double q) {
    if (values.empty()) {
        throw ContractError("nearest_rank: empty sample");
    }
    if (!(q > 0.0 && q <= 100.0)) {
        throw ContractError("nearest_rank: percentile must lie in (0, 100], got " + std::to_string(q));
    }
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * double(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
    return values[rank - 1];
}

Distance hausdorff(const BinaryMask& a, const BinaryMask& b, double percentile) {
    require_same_shape("hausdorff", a, b);
    const auto ba = a.boundary(), bb = b.boundary();
    if (ba.empty() || bb.empty()) {
        return {diagonal(a), true};
    }
    return {std::max(nearest_rank(directed(ba, bb), percentile), nearest_rank(directed(bb, ba), percentile)), false};
}

Distance asd(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape("asd", a, b);
    const auto ba = a.boundary(), bb = b.boundary();
    if (ba.empty() || bb.empty()) {
        return {diagonal(a), true};
    }
    double total = 0.0;
    for (double d : directed(ba, bb)) {
        total += d;
    }
    for (double d : directed(bb, ba)) {
        total += d;
    }
    return {total / double(ba.size() + bb.size()), false};
}

SurfaceReport surface_distances(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape("surface_distances", a, b);
    const auto ba = a.boundary(), bb = b.boundary();
    if (ba.empty() || bb.empty()) {
        const double d = diagonal(a);
        return {d, d, d, true};
    }
    const auto dab = directed(ba, bb), dba = directed(bb, ba);
    SurfaceReport r;
    r.hd = std::max(*std::max_element(dab.begin(), dab.end()), *std::max_element(dba.begin(), dba.end()));
    r.hd95 = std::max(nearest_rank(dab, 95.0), nearest_rank(dba, 95.0));
    double total = 0.0;
    for (double d : dab) {
        total += d;
    }
    for (double d : dba) {
        total += d;
    }
    r.asd = total / double(dab.size() + dba.size());
    return r;
}

std::string MetricReport::to_csv(bool header) const {
    std::ostringstream out;
    if (header) {
        out << kMetricCsvHeader << '\n';
    }
    for (const auto& r : rows) {
        out << split << ',' << r.label << ',' << fmt(r.dsc) << ',' << fmt(r.hd) << ',' << fmt(r.hd95) << ','
            << fmt(r.asd) << ',' << r.degenerate_count << ',' << r.n << '\n';
    }
    return out.str();
}

MetricReport evaluate_predictions(const std::string& split, std::span<const LabelMap> predicted,
                                  std::span<const LabelMap> truth, std::size_t classes) {
    if (predicted.empty()) {
        throw ContractError("evaluate: split '" + split + "' is empty");
    }
    if (predicted.size() != truth.size()) {
        throw ContractError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                            std::to_string(truth.size()) + " masks");
    }
    if (classes < 2) {
        throw ContractError("evaluate: need at least 2 classes");
    }
    MetricReport rep;
    rep.split = split;
    for (std::size_t c = 1; c < classes; ++c) {
        ClassRow row;
        row.label = std::to_string(c);
        row.n = predicted.size();
        double hd = 0, hd95 = 0, asd_sum = 0, fallback = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            const auto p = BinaryMask::from_labels(predicted[i], std::uint8_t(c));
            const auto t = BinaryMask::from_labels(truth[i], std::uint8_t(c));
            require_same_shape("evaluate", p, t);
            row.dsc += dice(p, t);
            const SurfaceReport s = surface_distances(p, t);
            if (s.degenerate) {
                ++row.degenerate_count;
                fallback = s.hd;
                continue;
            }
            hd += s.hd;
            hd95 += s.hd95;
            asd_sum += s.asd;
        }
        row.dsc /= double(row.n);
        const std::size_t valid = row.n - row.degenerate_count;
        if (valid > 0) {
            row.hd = hd / double(valid);
            row.hd95 = hd95 / double(valid);
            row.asd = asd_sum / double(valid);
        } else {
            row.hd = row.hd95 = row.asd = fallback;
        }
        rep.rows.push_back(row);
    }
    ClassRow mean;
    mean.label = "mean";
    for (const auto& r : rep.rows) {
        mean.dsc += r.dsc;
        mean.hd += r.hd;
        mean.hd95 += r.hd95;
        mean.asd += r.asd;
        mean.degenerate_count += r.degenerate_count;
        mean.n += r.n;
    }
    const double k = double(rep.rows.size());
    mean.dsc /= k;
    mean.hd /= k;
    mean.hd95 /= k;
    mean.asd /= k;
    rep.rows.push_back(mean);
    return rep;
}

}  // namespace hdc::metrics
