#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "alsf/model.hpp"

namespace alsf::model_file {

// Binary layout, all integers and doubles little-endian:
//
//   "ALSF"                      4 bytes
//   version                     u32
//   d, C                        u64, u64
//   k_1 ... k_C                 u64 each
//   k_0                         u64
//   C labels                    u32 byte length + UTF-8 bytes each
//   D_1 ... D_C, D_0            row-major f64
//   A_1 ... A_C, A_0            row-major f64
//   CRC-32 of all bytes above   u32
inline constexpr std::uint32_t kVersion = 1;

std::vector<std::uint8_t> serialize(const AlsfModel& model);
AlsfModel deserialize(const std::vector<std::uint8_t>& bytes);

// Written to a temporary file and renamed into place.
void save_model(const AlsfModel& model, const std::filesystem::path& path);
AlsfModel load_model(const std::filesystem::path& path);

std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

}  // namespace alsf::model_file
