// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "fragmix/records.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fragmix/image_io.hpp"

namespace fs = std::filesystem;

namespace fragmix {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, '\t')) out.push_back(field);
  return out;
}

}  // namespace

ManifestLoad load_manifest(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path);
  const fs::path base = fs::path(path).parent_path();
  ManifestLoad out;
  std::set<std::string> seen;
  std::string line;
  bool header_done = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_done) {
      header_done = true;
      if (line.rfind("fragment_id", 0) == 0) continue;  // header row
      throw DataError("manifest: " + path + " line " + std::to_string(lineno) +
                      ": expected header row starting with 'fragment_id'");
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 4)
      throw DataError("manifest: " + path + " line " + std::to_string(lineno) +
                      ": expected 4 tab-separated fields, got " +
                      std::to_string(fields.size()));
    FragmentRecord rec;
    rec.fragment_id = fields[0];
    rec.writer_id = fields[1];
    rec.page_id = fields[2];
    if (rec.fragment_id.empty() || rec.writer_id.empty() || rec.page_id.empty())
      throw DataError("manifest: " + path + " line " + std::to_string(lineno) +
                      ": empty id field");
    if (!seen.insert(rec.fragment_id).second)
      throw DataError("manifest: duplicate fragment_id '" + rec.fragment_id +
                      "'");
    rec.image_path = (base / fields[3]).string();
    if (!fs::exists(rec.image_path)) {
      const std::string msg =
          "manifest: image missing for '" + rec.fragment_id + "': " +
          rec.image_path;
      if (strict) throw DataError(msg);
      out.warnings.push_back(msg);
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

void write_manifest(const std::string& path,
                    const std::vector<FragmentRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("manifest: cannot write " + path);
  out << "fragment_id\twriter_id\tpage_id\timage_path\n";
  const fs::path base = fs::path(path).parent_path();
  for (const auto& r : records) {
    std::string rel = r.image_path;
    if (!rel.empty()) {
      std::error_code ec;
      const auto p = fs::relative(r.image_path, base, ec);
      if (!ec) rel = p.string();
    }
    out << r.fragment_id << '\t' << r.writer_id << '\t' << r.page_id << '\t'
        << rel << '\n';
  }
}

RasterImage load_fragment_image(const FragmentRecord& rec) {
  if (rec.image) return *rec.image;
  if (rec.image_path.empty())
    throw DataError("fragment '" + rec.fragment_id + "' has no image");
  return read_image(rec.image_path);
}

std::map<std::string, int> build_label_index(
    const std::vector<FragmentRecord>& records) {
  std::map<std::string, int> index;
  for (const auto& r : records) index.emplace(r.writer_id, 0);
  int next = 0;
  for (auto& [writer, id] : index) id = next++;
  return index;
}

}  // namespace fragmix
