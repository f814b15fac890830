#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ldd/tensor.hpp"

namespace ldd::io {

/// 8-bit gray or RGB PNG; alpha channels are dropped.
ImageTensor read_png(const std::filesystem::path& path);
/// Writes values rounded to 8 bits. Byte-identical output for identical input.
void write_png(const std::filesystem::path& path, const ImageTensor& image);
/// Encodes in memory; used for digests and tests.
std::vector<unsigned char> encode_png(const ImageTensor& image);

/// Binary PGM (P5) or PPM (P6), maxval up to 65535.
ImageTensor read_pnm(const std::filesystem::path& path);

/// Raw row-major float32 values with a sidecar `<path>.json` holding
/// {"h":…, "w":…, "c":…}.
ImageTensor read_raw(const std::filesystem::path& path);

/// Dispatch on extension: .png, .pgm/.ppm/.pnm, .raw/.f32.
ImageTensor load_image(const std::filesystem::path& path);

/// Rounds every value to the nearest multiple of 1/255 inside [0,1].
ImageTensor quantize_8bit(ImageTensor image);

/// Single-channel 8-bit PNG of a map with values in [0,1].
void write_map_png(const std::filesystem::path& path, const Grid& map);

/// Hex SHA-256 of bytes / of a file's content.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const std::filesystem::path& path);

/// Writes to a temporary sibling then renames, so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace ldd::io
