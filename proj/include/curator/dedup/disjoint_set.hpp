#pragma once

#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

namespace curator::dedup {

// Union by rank with path halving.
class DisjointSet {
 public:
  explicit DisjointSet(std::size_t size) : parent_(size), rank_(size, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t element) {
    while (element != parent_[element]) {
      parent_[element] = parent_[parent_[element]];
      element = parent_[element];
    }
    return element;
  }

  // Returns false when both were already in the same set.
  bool unite(std::size_t left, std::size_t right) {
    left = find(left);
    right = find(right);
    if (left == right) return false;
    if (rank_[left] < rank_[right]) std::swap(left, right);
    parent_[right] = left;
    if (rank_[left] == rank_[right]) ++rank_[left];
    return true;
  }

  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

}  // namespace curator::dedup
