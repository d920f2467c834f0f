// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <png.h>

#include "componerf/endian.hpp"
#include "componerf/error.hpp"

namespace componerf {

namespace {

constexpr std::uint16_t kLatentVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  v = little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(ErrorCode::IO, path.string() + ": truncated");
  return little_endian(v);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IO, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IO, "cannot open " + path.string());
  return in;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image<float>& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorCode::ShapeMismatch, "png needs 1 or 3 channels, got " + std::to_string(image.channels));
  }
  std::vector<png_byte> bytes(std::size_t(image.data.size()));
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float v = std::clamp(image.data[Eigen::Index(i)], 0.0f, 1.0f);
    bytes[i] = png_byte(std::lround(v * 255.0f));
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = png_uint_32(image.width);
  png.height = png_uint_32(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw Error(ErrorCode::IO, "png write failed for " + path.string() + ": " + msg);
  }
}

void write_pfm(const std::filesystem::path& path, const Image<float>& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorCode::ShapeMismatch, "pfm needs 1 or 3 channels, got " + std::to_string(image.channels));
  }
  std::ofstream out = open_out(path);
  out << (image.channels == 3 ? "PF" : "Pf") << '\n' << image.width << ' ' << image.height << "\n-1.0\n";
  for (int r = image.height - 1; r >= 0; --r)
    for (int c = 0; c < image.width; ++c)
      for (int k = 0; k < image.channels; ++k) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(image.at(r, c, k)));
  if (!out) throw Error(ErrorCode::IO, "write failed for " + path.string());
}

Image<float> read_pfm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string tag;
  int w = 0, h = 0;
  double scale = 0;
  in >> tag >> w >> h >> scale;
  in.get();
  if (!in || (tag != "PF" && tag != "Pf") || w <= 0 || h <= 0 || scale >= 0) {
    throw Error(ErrorCode::IO, path.string() + ": not a little-endian pfm");
  }
  Image<float> image(h, w, tag == "PF" ? 3 : 1);
  for (int r = h - 1; r >= 0; --r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < image.channels; ++k) image.at(r, c, k) = std::bit_cast<float>(get<std::uint32_t>(in, path));
  return image;
}

void write_latent(const std::filesystem::path& path, const Image<float>& image) {
  std::ofstream out = open_out(path);
  out.write("CNRF", 4);
  put<std::uint16_t>(out, kLatentVersion);
  put<std::uint16_t>(out, std::uint16_t(image.channels));
  put<std::uint32_t>(out, std::uint32_t(image.height));
  put<std::uint32_t>(out, std::uint32_t(image.width));
  for (Eigen::Index i = 0; i < image.data.size(); ++i) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(image.data[i]));
  if (!out) throw Error(ErrorCode::IO, "write failed for " + path.string());
}

Image<float> read_latent(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != "CNRF") {
    throw Error(ErrorCode::IO, path.string() + ": not a latent image");
  }
  const auto version = get<std::uint16_t>(in, path);
  if (version != kLatentVersion) throw Error(ErrorCode::VersionMismatch, path.string() + ": unknown latent version");
  const int c = get<std::uint16_t>(in, path);
  const int h = int(get<std::uint32_t>(in, path));
  const int w = int(get<std::uint32_t>(in, path));
  Image<float> image(h, w, c);
  for (Eigen::Index i = 0; i < image.data.size(); ++i) image.data[i] = std::bit_cast<float>(get<std::uint32_t>(in, path));
  return image;
}

}  // namespace componerf
