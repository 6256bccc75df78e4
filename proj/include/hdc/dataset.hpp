#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdc/image.hpp"

namespace hdc::data {

namespace fs = std::filesystem;

/// Binary 8-bit greyscale. Only maxval 255 is accepted.
struct Pgm {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> bytes;
};

void write_pgm(const fs::path& path, const Pgm& pgm);
Pgm read_pgm(const fs::path& path);  // IoError naming the path on any failure

std::vector<std::uint8_t> quantize(const Image& img);  // round(255 x)
Image dequantize(std::size_t height, std::size_t width, std::span<const std::uint8_t> bytes);

inline constexpr const char* kUnlabeled = "UNLABELED";

struct ManifestEntry {
    std::string split;                // train | val | test
    std::string image;                // relative to the manifest directory
    std::optional<std::string> mask;  // absent for unlabeled training samples

    bool operator==(const ManifestEntry&) const = default;
};

/// Text file: "key=value" header lines, then "<split>\t<image>\t<mask|UNLABELED>" records.
struct Manifest {
    fs::path root;  // directory holding the manifest; not serialized
    std::uint64_t seed = 0;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t classes = 2;
    std::size_t labeled = 0;
    std::size_t unlabeled = 0;
    std::vector<ManifestEntry> entries;

    // Entry indices of a split, optionally restricted to entries that carry a mask.
    std::vector<std::size_t> indices(const std::string& split, bool labeled_only = false) const;
    bool same_content(const Manifest& other) const;
};

void write_manifest(const Manifest& m, const fs::path& path);
Manifest read_manifest(const fs::path& path);

struct GenerateOptions {
    std::uint64_t seed = 0;
    std::size_t n_total = 500;
    double labeled_fraction = 0.1;
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t val = 10;
    std::size_t test = 50;
    std::size_t classes = 2;
};

// M = round(n_total * labeled_fraction), at least 1. Writes images/, masks/, hidden_masks/ and
// manifest.txt under out_dir. hidden_masks/ holds the labels of unlabeled training samples and is
// not referenced by the manifest.
Manifest generate_dataset(const GenerateOptions& opt, const fs::path& out_dir);

fs::path hidden_mask_path(const Manifest& m, std::size_t index);

struct LoadedSample {
    Image image;
    std::optional<LabelMap> mask;
    bool labeled = false;
    std::size_t index = 0;
};

// labeled_only: requesting an entry without a mask is a ContractError. Otherwise unlabeled
// entries come back with no mask, and their mask files are never opened.
std::vector<LoadedSample> load_batch(const Manifest& m, std::span<const std::size_t> indices, bool labeled_only);

// Every successful or attempted file open in this module is reported here (tests audit label access).
using OpenObserver = std::function<void(const fs::path&)>;
void set_open_observer(OpenObserver observer);

}  // namespace hdc::data
