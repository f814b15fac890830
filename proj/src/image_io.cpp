#include "ldd/image_io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include "json.hpp"
#include <sstream>

#include "ldd/errors.hpp"

namespace ldd::io {

namespace fs = std::filesystem;

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::string lower_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ImageTensor read_png(const fs::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  ImageTensor out(static_cast<int>(img.height), static_cast<int>(img.width), channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buffer[i] / 255.0;
  return out;
}

std::vector<unsigned char> encode_png(const ImageTensor& image) {
  validate_image(image, -INFINITY, INFINITY);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(image.data.size());
  std::transform(image.data.begin(), image.data.end(), pixels.begin(), to_byte);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("cannot encode PNG: ") + img.message);
  }
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("cannot encode PNG: ") + img.message);
  }
  out.resize(size);
  return out;
}

void write_png(const fs::path& path, const ImageTensor& image) {
  const auto bytes = encode_png(image);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

ImageTensor read_pnm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
      tok += bytes[pos++];
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") throw IoError(path.string() + " is not a binary PGM/PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError("malformed PNM header in " + path.string());
  }
  ++pos;  // single whitespace before the raster
  const int channels = magic == "P6" ? 3 : 1;
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw IoError("bad PNM header in " + path.string());
  const std::size_t bpv = maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() < pos + count * bpv) throw IoError("truncated PNM raster in " + path.string());
  ImageTensor out(h, w, channels);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned v = static_cast<unsigned char>(bytes[pos + i * bpv]);
    if (bpv == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i * 2 + 1]);
    out.data[i] = static_cast<double>(v) / maxval;
  }
  return out;
}

ImageTensor read_raw(const fs::path& path) {
  fs::path sidecar = path;
  sidecar += ".json";
  std::ifstream meta(sidecar);
  if (!meta) throw IoError("missing sidecar " + sidecar.string());
  nlohmann::json j;
  try {
    meta >> j;
  } catch (const std::exception& e) {
    throw IoError("cannot parse " + sidecar.string() + ": " + e.what());
  }
  const int h = j.at("h").get<int>();
  const int w = j.at("w").get<int>();
  const int c = j.at("c").get<int>();
  const auto bytes = read_bytes(path);
  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  if (h < 1 || w < 1 || bytes.size() != count * sizeof(float)) {
    throw IoError(path.string() + " holds " + std::to_string(bytes.size()) +
                  " bytes, sidecar promises " + std::to_string(count) + " float32 values");
  }
  ImageTensor out(h, w, c);
  for (std::size_t i = 0; i < count; ++i) {
    float v;
    std::memcpy(&v, bytes.data() + i * sizeof(float), sizeof(float));
    out.data[i] = v;
  }
  validate_image(out);
  return out;
}

ImageTensor load_image(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  if (ext == ".raw" || ext == ".f32") return read_raw(path);
  throw IoError("unsupported image format: " + path.string());
}

ImageTensor quantize_8bit(ImageTensor image) {
  for (double& v : image.data) v = to_byte(v) / 255.0;
  return image;
}

void write_map_png(const fs::path& path, const Grid& map) {
  ImageTensor img(map.rows, map.cols, 1);
  img.data = map.values;
  write_png(path, img);
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr)) {
    throw IoError("SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

std::string sha256_file(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return sha256_hex(bytes.data(), bytes.size());
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace ldd::io
