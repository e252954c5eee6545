// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fragmix/records.hpp"

namespace fragmix {

/// Parameters of the synthetic pseudo-handwriting corpus. Every writer gets
/// a distinct stroke style (period, thickness, slant, oscillation, ink),
/// every page a background tint, and fragments are jittered crops of the
/// page canvas. Fully deterministic in the seed.
struct SyntheticSpec {
  int num_writers = 8;
  int pages_per_writer = 3;
  int fragments_per_page = 4;
  std::uint64_t seed = 0;
  int fragment_height = 96;
  int fragment_width = 384;
};

/// Records carry inline grayscale images; image_path stays empty until the
/// corpus is written to disk.
std::vector<FragmentRecord> generate_synthetic_corpus(const SyntheticSpec& spec);

/// Writes images/<fragment_id>.pgm plus manifest.tsv under dir and returns
/// the manifest path.
std::string write_corpus(const std::vector<FragmentRecord>& records,
                         const std::string& dir);

}  // namespace fragmix
