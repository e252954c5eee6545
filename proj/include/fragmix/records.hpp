// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fragmix/raster.hpp"

namespace fragmix {

/// One fragment: ids plus either an on-disk image or an inline one.
struct FragmentRecord {
  std::string fragment_id;
  std::string writer_id;
  std::string page_id;
  std::string image_path;  // resolved; empty when the image is inline
  std::optional<RasterImage> image;
};

struct ManifestLoad {
  std::vector<FragmentRecord> records;
  std::vector<std::string> warnings;  // skipped records etc.
};

/// Tab-separated manifest with a header row:
///   fragment_id  writer_id  page_id  image_path
/// Paths are relative to the manifest's directory. Records whose image file
/// is missing are skipped with a warning (or fail in strict mode).
ManifestLoad load_manifest(const std::string& path, bool strict = false);

void write_manifest(const std::string& path,
                    const std::vector<FragmentRecord>& records);

/// Inline image if present, otherwise read from disk.
RasterImage load_fragment_image(const FragmentRecord& rec);

/// writer_id -> contiguous class index, ordered by sorted writer id.
std::map<std::string, int> build_label_index(
    const std::vector<FragmentRecord>& records);

}  // namespace fragmix
