// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "fragmix/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace fragmix {

RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels == 1) return img;
  RasterImage out = RasterImage::make(img.width, img.height, 1);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned r = img.pixels[i * 3];
    const unsigned g = img.pixels[i * 3 + 1];
    const unsigned b = img.pixels[i * 3 + 2];
    out.pixels[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

namespace {

void skip_pnm_space(std::istream& in) {
  int c = in.peek();
  while (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
}

int read_pnm_int(std::istream& in) {
  skip_pnm_space(in);
  int v = -1;
  in >> v;
  if (!in || v < 0) throw DataError("pnm: malformed header");
  return v;
}

RasterImage read_pnm(std::istream& in, const std::string& path) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  const bool gray = magic[1] == '5';
  if (magic[0] != 'P' || (!gray && magic[1] != '6'))
    throw DataError("pnm: " + path + " is not binary PGM/PPM");
  const int w = read_pnm_int(in);
  const int h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (maxval <= 0 || maxval > 255)
    throw DataError("pnm: " + path + " has unsupported maxval " +
                    std::to_string(maxval));
  in.get();  // single whitespace before raster
  RasterImage img = RasterImage::make(w, h, gray ? 1 : 3);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw DataError("pnm: " + path + " truncated raster");
  return img;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

RasterImage read_png_file(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("png: cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: failed to decode " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: " + path + " has unsupported channel count");
  }
  RasterImage img = RasterImage::make(static_cast<int>(w), static_cast<int>(h),
                                      channels);
  std::vector<png_bytep> rows(h);
  const std::size_t stride = static_cast<std::size_t>(w) * channels;
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

RasterImage read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("image: cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  in.seekg(0);
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'))
    return read_pnm(in, path);
  if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') {
    in.close();
    return read_png_file(path);
  }
  throw DataError("image: " + path + " is neither PNG nor binary PGM/PPM");
}

void write_pgm(const std::string& path, const RasterImage& gray) {
  if (gray.channels != 1) throw DataError("pgm: image is not grayscale");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("pgm: cannot write " + path);
  out << "P5\n" << gray.width << " " << gray.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.pixels.data()),
            static_cast<std::streamsize>(gray.pixels.size()));
}

void write_ppm(const std::string& path, const RasterImage& rgb) {
  if (rgb.channels != 3) throw DataError("ppm: image is not RGB");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("ppm: cannot write " + path);
  out << "P6\n" << rgb.width << " " << rgb.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.pixels.data()),
            static_cast<std::streamsize>(rgb.pixels.size()));
}

void write_png(const std::string& path, const RasterImage& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("png: cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: failed to encode " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_const_bytep> rows(img.height);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y)
    rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * stride;
  png_write_rows(png, const_cast<png_bytepp>(rows.data()),
                 static_cast<png_uint_32>(img.height));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_image(const std::string& path, const RasterImage& img) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".pgm") {
    write_pgm(path, img.channels == 1 ? img : to_grayscale(img));
  } else if (ext == ".ppm") {
    write_ppm(path, img);
  } else if (ext == ".png") {
    write_png(path, img);
  } else {
    throw ConfigError("image: unsupported output extension '" + ext + "'");
  }
}

}  // namespace fragmix
