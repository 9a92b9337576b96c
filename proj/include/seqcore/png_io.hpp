#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

#include "seqcore/grid.hpp"

namespace seqcore::png {

using Rgb = std::array<std::uint8_t, 3>;

void write_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels);
void write_gray16(const std::filesystem::path& path, const Grid<std::uint16_t>& pixels);
/// Paletted image: pixel value is the palette index.
void write_indexed(const std::filesystem::path& path, const Grid<std::uint8_t>& indices, std::span<const Rgb> palette);
void write_rgb(const std::filesystem::path& path, const Grid<Rgb>& pixels);

/// Reads an 8-bit grayscale or paletted PNG; paletted files yield raw indices.
Grid<std::uint8_t> read_gray8(const std::filesystem::path& path);
Grid<std::uint16_t> read_gray16(const std::filesystem::path& path);

/// Round-to-nearest quantization of [0,1] intensities.
Grid<std::uint8_t> quantize(const Image& image);
Image dequantize(const Grid<std::uint8_t>& pixels);

}  // namespace seqcore::png
