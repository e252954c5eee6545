// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fragmix/records.hpp"

namespace fragmix {

/// fragment_id -> subset name ("train" / "val" / "test").
struct SplitAssignment {
  std::string kind;
  std::map<std::string, std::string> subset_of;
  std::vector<std::string> warnings;

  std::vector<FragmentRecord> select(const std::vector<FragmentRecord>& records,
                                     const std::string& subset) const;
};

/// Writer aliases that differ only by a trailing number count as one scribe
/// for splitting (Kyros1/Kyros2 -> Kyros), but keep their own labels for
/// training and inference.
std::string canonical_writer(const std::string& writer);

/// The standard 4-fold writer partition used for the papyri corpus.
std::vector<std::vector<std::string>> papyrow_default_folds();

struct KfoldSplit {
  int fold = 0;
  SplitAssignment assignment;  // subsets "train" and "test"
};

/// Fold i trains on its own writers and tests on everyone else's fragments.
/// Folds must cover every (alias-merged) writer exactly once.
std::vector<KfoldSplit> make_kfold_splits(
    const std::vector<FragmentRecord>& records,
    const std::vector<std::vector<std::string>>& folds);

/// Per-writer page split into train/val/test by the given fractions
/// (largest-remainder rounding, seeded shuffle). Every fragment of a page
/// lands in that page's subset. Single-page writers go to train with a
/// warning.
SplitAssignment make_identification_split(
    const std::vector<FragmentRecord>& records,
    std::array<double, 3> fractions = {0.3, 0.2, 0.5}, std::uint64_t seed = 0);

void write_split_file(const std::string& path, const SplitAssignment& split,
                      const std::string& subset);

/// Reads a split file (one fragment_id per line, # comments allowed) and
/// returns the matching records in file order.
std::vector<FragmentRecord> read_split_file(
    const std::string& path, const std::vector<FragmentRecord>& records);

}  // namespace fragmix
