#pragma once

#include <filesystem>

#include "mito/raster.hpp"

namespace mito::io {

/// Reads an 8-bit RGB image. Throws Error{Io} when unreadable.
Image read_rgb(const std::filesystem::path& path, double spacing_um = 0.25, int domain_id = 0);
void write_rgb(const std::filesystem::path& path, const Image& image);

/// Single-channel 8-bit masks (binary 0/255 on disk for BinaryMask).
Raster<uint8_t> read_gray(const std::filesystem::path& path);
void write_gray(const std::filesystem::path& path, const Raster<uint8_t>& mask);
void write_binary_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace mito::io
