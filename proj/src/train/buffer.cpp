#include "vfactor/train/buffer.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace vfactor::train {

EpisodeBuffer::EpisodeBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be positive");
}

void EpisodeBuffer::add(data::Episode episode) {
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

std::vector<std::size_t> EpisodeBuffer::sample_indices(std::size_t count,
                                                       std::mt19937_64& rng) const {
  if (count > episodes_.size()) {
    throw std::out_of_range("cannot sample " + std::to_string(count) + " episodes from " +
                            std::to_string(episodes_.size()));
  }
  std::vector<std::size_t> all(episodes_.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  return out;
}

data::EpisodeBatch EpisodeBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  std::vector<const data::Episode*> picked;
  for (auto i : sample_indices(count, rng)) picked.push_back(&episodes_[i]);
  return data::EpisodeBatch::from_episodes(picked);
}

}  // namespace vfactor::train
