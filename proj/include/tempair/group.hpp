// Copyright 2026 the tempair authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <string>
#include <utility>

namespace tempair::net {

// Finite symmetry groups of the square grid: p4 (rotations by multiples of
// 90 degrees) and p4m (rotations plus mirror flips).
enum class Group { P4, P4M };

// Element R^rotation * F^flip, where R is the 90-degree counter-clockwise
// rotation and F the horizontal flip. p4 elements always have flip = false.
struct GroupElement {
  int rotation = 0;  // in {0, 1, 2, 3}
  bool flip = false;

  bool operator==(const GroupElement&) const = default;
};

std::size_t group_size(Group g);
GroupElement group_element(Group g, std::size_t index);
std::size_t group_index(Group g, GroupElement e);
std::string group_name(Group g);

// a * b: apply b first, then a.
GroupElement compose(GroupElement a, GroupElement b);
GroupElement inverse(GroupElement e);

// Source pixel for the transform of a square n x n grid by g: the output at
// (row, col) reads the input at source_coords(g, row, col, n).
std::pair<std::size_t, std::size_t> source_coords(GroupElement g,
                                                  std::size_t row,
                                                  std::size_t col,
                                                  std::size_t n);

}  // namespace tempair::net
