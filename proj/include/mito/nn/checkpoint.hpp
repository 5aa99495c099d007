#pragma once

// Checkpoint file: 8-byte magic, little-endian u64 header length, JSON header
// {version, net, meta, manifest[{name, shape, offset}]}, then float32 data.

#include <filesystem>

#include <json.hpp>

#include "mito/nn/network.hpp"

namespace mito::net {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  SegNet model{nullptr};
  nlohmann::json meta;
};

void save_checkpoint(const std::filesystem::path& path, const SegNet& model, const nlohmann::json& meta = {});

/// Throws Error{MissingCheckpoint} when absent, Error{Io} when malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mito::net
