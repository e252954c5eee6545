// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "fragmix/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fragmix/image_io.hpp"
#include "fragmix/rng.hpp"

namespace fs = std::filesystem;

namespace fragmix {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

/// Per-writer stroke statistics. Anchored to a coarse lattice over the
/// writer index so that styles stay far apart, with seeded jitter on top.
struct WriterStyle {
  double period;     // glyph spacing in px
  double thickness;  // stroke radius
  double slant;
  double amp1, amp2;  // oscillation amplitudes
  double freq2;
  double ink;       // stroke darkness (0 = black)
  double skip_p;    // word-gap probability
};

WriterStyle writer_style(std::uint64_t seed, int widx) {
  Rng rng(mix_seed({seed, 0x77726974ULL, static_cast<std::uint64_t>(widx)}));
  WriterStyle s;
  s.period = 10.0 + 5.0 * (widx % 5) + rng.uniform(0.0, 2.0);
  s.thickness = 1.0 + ((widx / 5) % 3) + rng.uniform(0.0, 0.4);
  s.slant = -0.35 + 0.175 * ((widx / 15) % 5) + rng.uniform(-0.03, 0.03);
  s.amp1 = 5.0 + 2.5 * (widx % 3) + rng.uniform(0.0, 1.0);
  s.amp2 = 1.5 + rng.uniform(0.0, 2.0);
  s.freq2 = 2.0 + (widx % 4);
  s.ink = 20.0 + 15.0 * ((widx / 2) % 4) + rng.uniform(0.0, 8.0);
  s.skip_p = 0.08 + 0.04 * (widx % 2);
  return s;
}

void stamp_disc(RasterImage& canvas, double cx, double cy, double radius,
                double value) {
  const int r = static_cast<int>(std::ceil(radius));
  for (int dy = -r; dy <= r; ++dy) {
    const int y = static_cast<int>(cy) + dy;
    if (y < 0 || y >= canvas.height) continue;
    for (int dx = -r; dx <= r; ++dx) {
      const int x = static_cast<int>(cx) + dx;
      if (x < 0 || x >= canvas.width) continue;
      if (dx * dx + dy * dy <= radius * radius) {
        auto& px = canvas.at(x, y);
        px = static_cast<std::uint8_t>(std::min<double>(px, value));
      }
    }
  }
}

RasterImage render_page(const SyntheticSpec& spec, const WriterStyle& style,
                        int widx, int pidx) {
  const int W = spec.fragment_width + 48;
  const int H = spec.fragment_height + 24;
  Rng rng(mix_seed({spec.seed, 0x70616765ULL, static_cast<std::uint64_t>(widx),
                    static_cast<std::uint64_t>(pidx)}));

  // page background: tint plus a slow wave and light grain
  const double tint = 205.0 + rng.uniform(0.0, 30.0);
  const double wave_amp = rng.uniform(2.0, 6.0);
  const double wave_len = rng.uniform(60.0, 160.0);
  const double wave_dir = rng.uniform(0.0, kTau);
  RasterImage page = RasterImage::make(W, H, 1);
  const double ux = std::cos(wave_dir), uy = std::sin(wave_dir);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double base =
          tint + wave_amp * std::sin(kTau * (x * ux + y * uy) / wave_len) +
          rng.uniform(-3.0, 3.0);
      page.at(x, y) = static_cast<std::uint8_t>(std::clamp(base, 0.0, 255.0));
    }

  // rows of pseudo-glyph squiggles
  const double row_gap = 2.0 * (style.amp1 + style.amp2) + 6.0 + 2.0 * style.thickness;
  const int samples_per_glyph = std::max(12, static_cast<int>(3.0 * style.period));
  for (double baseline = row_gap * 0.8; baseline < H; baseline += row_gap) {
    for (double x0 = 4.0; x0 < W - 4.0; x0 += style.period) {
      if (rng.uniform() < style.skip_p) continue;  // word gap
      const double phi1 = rng.uniform(0.0, 1.0);
      const double phi2 = rng.uniform(0.0, 1.0);
      for (int t = 0; t < samples_per_glyph; ++t) {
        const double u = static_cast<double>(t) / (samples_per_glyph - 1);
        const double dy = -style.amp1 * std::sin(kTau * (u + phi1)) -
                          style.amp2 * std::sin(kTau * (style.freq2 * u + phi2));
        const double px = x0 + 0.8 * style.period * u + style.slant * dy;
        stamp_disc(page, px, baseline + dy, style.thickness, style.ink);
      }
    }
  }
  return page;
}

RasterImage crop(const RasterImage& src, int x0, int y0, int w, int h) {
  RasterImage out = RasterImage::make(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = src.at(x0 + x, y0 + y);
  return out;
}

}  // namespace

std::vector<FragmentRecord> generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.num_writers < 1 || spec.pages_per_writer < 1 ||
      spec.fragments_per_page < 1)
    throw ConfigError("synthetic: all counts must be >= 1");
  if (spec.fragment_height < 16 || spec.fragment_width < 16)
    throw ConfigError("synthetic: fragment size too small");
  std::vector<FragmentRecord> records;
  char buf[64];
  for (int w = 0; w < spec.num_writers; ++w) {
    const auto style = writer_style(spec.seed, w);
    std::snprintf(buf, sizeof(buf), "w%02d", w);
    const std::string writer_id = buf;
    for (int p = 0; p < spec.pages_per_writer; ++p) {
      const auto page = render_page(spec, style, w, p);
      std::snprintf(buf, sizeof(buf), "w%02d_p%d", w, p);
      const std::string page_id = buf;
      Rng jitter(mix_seed({spec.seed, 0x66726167ULL,
                           static_cast<std::uint64_t>(w),
                           static_cast<std::uint64_t>(p)}));
      for (int f = 0; f < spec.fragments_per_page; ++f) {
        const int x0 = static_cast<int>(jitter.index(48));
        const int y0 = static_cast<int>(jitter.index(24));
        FragmentRecord rec;
        std::snprintf(buf, sizeof(buf), "w%02d_p%d_f%d", w, p, f);
        rec.fragment_id = buf;
        rec.writer_id = writer_id;
        rec.page_id = page_id;
        rec.image =
            crop(page, x0, y0, spec.fragment_width, spec.fragment_height);
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

std::string write_corpus(const std::vector<FragmentRecord>& records,
                         const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "images");
  std::vector<FragmentRecord> on_disk;
  on_disk.reserve(records.size());
  for (const auto& rec : records) {
    FragmentRecord copy = rec;
    const std::string rel = "images/" + rec.fragment_id + ".pgm";
    write_pgm((root / rel).string(), load_fragment_image(rec));
    copy.image.reset();
    copy.image_path = (root / rel).string();
    on_disk.push_back(std::move(copy));
  }
  const std::string manifest = (root / "manifest.tsv").string();
  write_manifest(manifest, on_disk);
  return manifest;
}

}  // namespace fragmix
