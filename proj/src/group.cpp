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

#include "tempair/group.hpp"

#include <stdexcept>

namespace tempair::net {

std::size_t group_size(Group g) { return g == Group::P4 ? 4 : 8; }

GroupElement group_element(Group g, std::size_t index) {
  if (index >= group_size(g)) {
    throw std::invalid_argument("group element index out of range");
  }
  GroupElement e;
  e.rotation = static_cast<int>(index % 4);
  e.flip = index >= 4;
  return e;
}

std::size_t group_index(Group g, GroupElement e) {
  if (g == Group::P4 && e.flip) {
    throw std::invalid_argument("p4 has no flip elements");
  }
  return static_cast<std::size_t>(e.rotation) + (e.flip ? 4 : 0);
}

std::string group_name(Group g) { return g == Group::P4 ? "p4" : "p4m"; }

GroupElement compose(GroupElement a, GroupElement b) {
  // R^ra F^ma R^rb F^mb = R^(ra + (-1)^ma rb) F^(ma xor mb).
  GroupElement out;
  const int rb = a.flip ? -b.rotation : b.rotation;
  out.rotation = ((a.rotation + rb) % 4 + 4) % 4;
  out.flip = a.flip != b.flip;
  return out;
}

GroupElement inverse(GroupElement e) {
  // Rotations invert; reflections R^r F are involutions.
  if (e.flip) return e;
  return GroupElement{((-e.rotation) % 4 + 4) % 4, false};
}

std::pair<std::size_t, std::size_t> source_coords(GroupElement g,
                                                  std::size_t row,
                                                  std::size_t col,
                                                  std::size_t n) {
  // Output(p) = input(g^-1 p) with g = R^r F^m, so the source map is
  // F^m applied after r steps of R^-1, where R^-1(r, c) = (c, n-1-r).
  std::size_t r = row;
  std::size_t c = col;
  for (int k = 0; k < g.rotation; ++k) {
    const std::size_t nr = c;
    const std::size_t nc = n - 1 - r;
    r = nr;
    c = nc;
  }
  if (g.flip) c = n - 1 - c;
  return {r, c};
}

}  // namespace tempair::net
