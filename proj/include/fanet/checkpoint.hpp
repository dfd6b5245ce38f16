#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fanet/tensor.hpp"

namespace fanet {

/// Binary checkpoint layout (all integers little-endian):
///   "FANT" | u32 version=1 | u32 count |
///   count x ( u16 name_len | name (UTF-8) | u8 rank | rank x u32 dim | float32 payload )
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

std::string encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace fanet
