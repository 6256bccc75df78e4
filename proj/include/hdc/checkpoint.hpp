#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hdc/tensor.hpp"

namespace hdc::ckpt {

/// Little-endian container:
///   "HDC1", u32 version, u32 section count,
///   per section: u32 name length, name, u8 kind, u64 payload offset, u64 payload size,
///   u32 CRC32 of everything above,
///   then each payload followed by its u32 CRC32.
/// Tensor payload: u32 count, then per tensor u32 name length, name, u32 rank, u32 dims[rank],
/// f32 values. Text payload: raw bytes.
inline constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor<float> value;

    bool operator==(const NamedTensor&) const = default;
};

struct Section {
    enum class Kind : std::uint8_t { tensors = 0, text = 1 };

    std::string name;
    Kind kind = Kind::tensors;
    std::vector<NamedTensor> tensors;
    std::string text;

    bool operator==(const Section&) const = default;
};

struct Checkpoint {
    std::vector<Section> sections;

    const Section& get(const std::string& name) const;  // FormatError if absent
    bool has(const std::string& name) const;
    bool operator==(const Checkpoint&) const = default;
};

std::string encode(const Checkpoint& c);
Checkpoint decode(std::string_view bytes);  // FormatError with the offending offset

void save(const Checkpoint& c, const std::filesystem::path& path);  // IoError on write failure
Checkpoint load(const std::filesystem::path& path);

}  // namespace hdc::ckpt
