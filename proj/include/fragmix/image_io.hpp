// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>

#include "fragmix/raster.hpp"

namespace fragmix {

/// Reads PNG, binary PGM (P5) or binary PPM (P6), dispatching on the file
/// magic. 16-bit and alpha PNGs are reduced to 8-bit gray/RGB.
RasterImage read_image(const std::string& path);

/// Writes by extension: .png, .pgm (gray only), .ppm.
void write_image(const std::string& path, const RasterImage& img);

void write_pgm(const std::string& path, const RasterImage& gray);
void write_ppm(const std::string& path, const RasterImage& rgb);
void write_png(const std::string& path, const RasterImage& img);

}  // namespace fragmix
