// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "fragmix/splits.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "fragmix/rng.hpp"

namespace fragmix {

std::vector<FragmentRecord> SplitAssignment::select(
    const std::vector<FragmentRecord>& records,
    const std::string& subset) const {
  std::vector<FragmentRecord> out;
  for (const auto& r : records) {
    auto it = subset_of.find(r.fragment_id);
    if (it != subset_of.end() && it->second == subset) out.push_back(r);
  }
  return out;
}

std::string canonical_writer(const std::string& writer) {
  std::size_t end = writer.size();
  while (end > 0 && writer[end - 1] >= '0' && writer[end - 1] <= '9') --end;
  return end == 0 ? writer : writer.substr(0, end);
}

std::vector<std::vector<std::string>> papyrow_default_folds() {
  return {
      {"Aparhasios", "Ieremias", "Konstantinos", "Kyros", "Philotheos"},
      {"Amais", "Dios", "Hermauos", "Kollouthos", "Menas"},
      {"Daueit", "Dioscorus", "Theodosius", "Pilatos", "Victor"},
      {"Abraamios", "Andreas", "Anouphis", "Isak", "Psates"},
  };
}

std::vector<KfoldSplit> make_kfold_splits(
    const std::vector<FragmentRecord>& records,
    const std::vector<std::vector<std::string>>& folds) {
  if (folds.empty()) throw ConfigError("kfold: no folds given");
  std::map<std::string, int> fold_of;  // canonical writer -> fold
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (const auto& w : folds[f]) {
      const auto canon = canonical_writer(w);
      auto [it, fresh] = fold_of.emplace(canon, static_cast<int>(f));
      if (!fresh && it->second != static_cast<int>(f))
        throw ConfigError("kfold: writer '" + canon +
                          "' appears in more than one fold");
    }
  }
  std::set<std::string> unmatched;
  for (const auto& r : records)
    if (!fold_of.count(canonical_writer(r.writer_id)))
      unmatched.insert(r.writer_id);
  if (!unmatched.empty()) {
    std::string names;
    for (const auto& w : unmatched) names += (names.empty() ? "" : ", ") + w;
    throw DataError("kfold: writers not covered by any fold: " + names);
  }

  std::vector<KfoldSplit> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    KfoldSplit split;
    split.fold = static_cast<int>(f) + 1;
    split.assignment.kind = "kfold";
    for (const auto& r : records) {
      const int wf = fold_of.at(canonical_writer(r.writer_id));
      split.assignment.subset_of[r.fragment_id] =
          wf == static_cast<int>(f) ? "train" : "test";
    }
    out.push_back(std::move(split));
  }
  return out;
}

SplitAssignment make_identification_split(
    const std::vector<FragmentRecord>& records, std::array<double, 3> fractions,
    std::uint64_t seed) {
  double frac_sum = fractions[0] + fractions[1] + fractions[2];
  if (frac_sum < 0.999 || frac_sum > 1.001)
    throw ConfigError("identification split: fractions must sum to 1");
  SplitAssignment out;
  out.kind = "identification";

  // writer -> ordered page list -> fragment ids
  std::map<std::string, std::map<std::string, std::vector<std::string>>> pages;
  for (const auto& r : records)
    pages[r.writer_id][r.page_id].push_back(r.fragment_id);

  const std::array<std::string, 3> names{"train", "val", "test"};
  for (auto& [writer, page_map] : pages) {
    std::vector<std::string> page_ids;
    page_ids.reserve(page_map.size());
    for (const auto& [pid, _] : page_map) page_ids.push_back(pid);
    Rng rng(mix_seed({seed, fnv1a64(writer.data(), writer.size())}));
    rng.shuffle(page_ids.begin(), page_ids.end());

    const std::size_t n = page_ids.size();
    std::array<std::size_t, 3> take{0, 0, 0};
    if (n == 1) {
      take = {1, 0, 0};
      out.warnings.push_back("writer '" + writer +
                             "' has a single page; assigned to train");
    } else {
      // largest-remainder rounding of n * fraction
      std::array<double, 3> quota;
      std::size_t used = 0;
      for (int i = 0; i < 3; ++i) {
        quota[i] = static_cast<double>(n) * fractions[i];
        take[i] = static_cast<std::size_t>(quota[i]);
        used += take[i];
      }
      std::array<int, 3> order{0, 1, 2};
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return quota[a] - static_cast<double>(take[a]) >
               quota[b] - static_cast<double>(take[b]);
      });
      for (std::size_t r = 0; r < n - used; ++r) ++take[order[r % 3]];
    }
    std::size_t at = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t i = 0; i < take[s]; ++i, ++at)
        for (const auto& frag : page_map.at(page_ids[at]))
          out.subset_of[frag] = names[s];
  }
  return out;
}

void write_split_file(const std::string& path, const SplitAssignment& split,
                      const std::string& subset) {
  std::ofstream out(path);
  if (!out) throw DataError("split: cannot write " + path);
  out << "# fragmix split kind=" << split.kind << " subset=" << subset << "\n";
  for (const auto& [frag, sub] : split.subset_of)
    if (sub == subset) out << frag << "\n";
}

std::vector<FragmentRecord> read_split_file(
    const std::string& path, const std::vector<FragmentRecord>& records) {
  std::ifstream in(path);
  if (!in) throw DataError("split: cannot open " + path);
  std::map<std::string, const FragmentRecord*> by_id;
  for (const auto& r : records) by_id[r.fragment_id] = &r;
  std::vector<FragmentRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto it = by_id.find(line);
    if (it == by_id.end())
      throw DataError("split: fragment '" + line + "' not in manifest");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace fragmix
