#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gist/image.hpp"

namespace gist::io {

using Bytes = std::vector<std::uint8_t>;

// 8-bit grayscale PNG; intensities are clamped and rounded to n/255.
Bytes encode_png(const Image& img);

// Decodes PNG or JPEG (detected from magic bytes). Colour input is converted
// to luma with Rec.601 weights.
Image decode_image(std::span<const std::uint8_t> bytes);

Image load_image(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file then renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace gist::io
