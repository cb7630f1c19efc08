#pragma once

#include <cstddef>
#include <deque>
#include <random>
#include <vector>

#include "vfactor/data/episode.hpp"

namespace vfactor::train {

/// FIFO store of whole episodes.
class EpisodeBuffer {
 public:
  explicit EpisodeBuffer(std::size_t capacity = 5000);

  void add(data::Episode episode);
  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  const data::Episode& operator[](std::size_t i) const { return episodes_[i]; }

  /// Uniform draw of `count` distinct indices; throws if fewer are stored.
  std::vector<std::size_t> sample_indices(std::size_t count, std::mt19937_64& rng) const;
  data::EpisodeBatch sample(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::deque<data::Episode> episodes_;
};

}  // namespace vfactor::train
