#include "dermscan/png_io.hpp"

#include <png.h>

#include <cstring>
#include <vector>

namespace dermscan {

namespace {

std::vector<std::uint8_t> read_as(const std::string& path, png_uint_32 format, int& width, int& height) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw Error(ErrorKind::Io, "cannot read PNG '" + path + "': " + img.message);
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorKind::Format, "cannot decode PNG '" + path + "': " + img.message);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  return buf;
}

void write_as(const std::string& path, png_uint_32 format, int width, int height, const std::uint8_t* data) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr))
    throw Error(ErrorKind::Io, "cannot write PNG '" + path + "': " + img.message);
}

}  // namespace

RasterImage read_png(const std::string& path) {
  int w = 0, h = 0;
  auto buf = read_as(path, PNG_FORMAT_RGB, w, h);
  return RasterImage(w, h, std::move(buf));
}

void write_png(const std::string& path, const RasterImage& image) {
  write_as(path, PNG_FORMAT_RGB, image.width(), image.height(), image.data().data());
}

BinaryMask read_mask_png(const std::string& path) {
  int w = 0, h = 0;
  auto buf = read_as(path, PNG_FORMAT_GRAY, w, h);
  for (auto& v : buf) v = v ? 1 : 0;
  return BinaryMask(w, h, std::move(buf));
}

void write_mask_png(const std::string& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> buf(mask.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask[i] ? 255 : 0;
  write_as(path, PNG_FORMAT_GRAY, mask.width(), mask.height(), buf.data());
}

}  // namespace dermscan
