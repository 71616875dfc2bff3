#pragma once

// Binary checkpoint layout (little-endian):
//
//   "CCOOVCKP"                 8-byte magic
//   u32 version
//   u64 n, n bytes             JSON header: config, schemas, training vocabulary
//   u32 tensor count
//   per tensor: u32 name length, name, u32 rank, u64 dims[rank], f64 values[]
//   u32 CRC-32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ccoov/model.hpp"
#include "ccoov/training.hpp"

namespace ccoov {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    TrainConfig config;
    Model model;
};

std::vector<std::uint8_t> serialize_checkpoint(Model& model, const TrainConfig& config);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(Model& model, const TrainConfig& config, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ccoov
