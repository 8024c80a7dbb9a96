// Copyright 2026 The SCPN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Random tree generators shared by the syntax tests and the acceptance run.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "scpn/syntax.hpp"

namespace scpn::testing_util {

inline const std::vector<std::string>& tree_labels() {
  static const std::vector<std::string> labels{
      "S", "NP", "VP", "PP", "SBAR", "ADVP", ",", ".", ":", "DT", "NN", "VBD",
      "IN", "PRP$", "-LRB-", "WHNP"};
  return labels;
}

inline ParseTree random_tree(std::mt19937_64& rng, int max_depth, int max_children) {
  const auto& labels = tree_labels();
  ParseTree t;
  t.label = labels[rng() % labels.size()];
  if (max_depth > 1) {
    int n = static_cast<int>(rng() % static_cast<unsigned>(max_children + 1));
    for (int i = 0; i < n; ++i) {
      t.children.push_back(random_tree(rng, max_depth - 1, max_children));
    }
  }
  return t;
}

// Changes something at depth >= 3 (grandchildren or lower), or appends a
// grandchild when the tree is too shallow to mutate.
inline ParseTree mutate_below_level_two(std::mt19937_64& rng, ParseTree t) {
  if (t.children.empty()) return t;
  auto& child = t.children[rng() % t.children.size()];
  switch (rng() % 3) {
    case 0:
      child.children.push_back(random_tree(rng, 2, 2));
      break;
    case 1:
      if (!child.children.empty()) {
        child.children.erase(child.children.begin() +
                             static_cast<long>(rng() % child.children.size()));
      } else {
        child.children.push_back(ParseTree{"X", {}, false});
      }
      break;
    default:
      if (!child.children.empty()) {
        child.children[rng() % child.children.size()].label += "Z";
      } else {
        child.children.push_back(ParseTree{"Y", {}, false});
      }
  }
  return t;
}

}  // namespace scpn::testing_util
