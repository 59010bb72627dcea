#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/types.hpp"
#include "nbrescore/rng.hpp"

namespace nbrescore::training {

/// Mixed personalized/general training pool and its per-epoch batches.
///
/// The pool is drawn once: round(fraction * pool_size) personalized
/// utterances and the rest general. Each source is sampled without
/// replacement while it lasts and with replacement beyond that. pool_size
/// defaults to the larger of the two sources. Batches are reshuffled every
/// epoch from a seed derived from (seed, epoch).
class BatchPlan {
 public:
  BatchPlan(const corpus::Dataset& train, double personalized_fraction, std::size_t batch_size,
            std::uint64_t seed, std::size_t pool_size = 0)
      : batch_size_(batch_size), seed_(seed) {
    if (!(personalized_fraction >= 0.0 && personalized_fraction <= 1.0)) {
      throw ValidationError("personalized_fraction out of range");
    }
    if (batch_size == 0) throw ValidationError("batch_size must be at least 1");
    std::vector<std::size_t> personalized, general;
    for (std::size_t i = 0; i < train.size(); ++i) {
      (train[i].is_personalized ? personalized : general).push_back(i);
    }
    if (pool_size == 0) pool_size = std::max(personalized.size(), general.size());
    const auto n_pers = static_cast<std::size_t>(
        std::llround(personalized_fraction * static_cast<double>(pool_size)));
    const std::size_t n_gen = pool_size - n_pers;
    if (n_pers > 0 && personalized.empty()) {
      throw ValidationError("personalized_fraction > 0 but the personalized pool is empty");
    }
    if (n_gen > 0 && general.empty()) {
      throw ValidationError("personalized_fraction < 1 but the general pool is empty");
    }
    Rng rng(derive_seed(seed, {0x9001}));
    draw(personalized, n_pers, rng);
    personalized_count_ = pool_.size();
    draw(general, n_gen, rng);
  }

  const std::vector<std::size_t>& pool() const { return pool_; }
  std::size_t personalized_count() const { return personalized_count_; }

  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const {
    std::vector<std::size_t> order = pool_;
    Rng rng(derive_seed(seed_, {0x9002, epoch_index}));
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += batch_size_) {
      const std::size_t end = std::min(order.size(), i + batch_size_);
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
  }

 private:
  void draw(std::vector<std::size_t> source, std::size_t n, Rng& rng) {
    if (n == 0) return;
    rng.shuffle(source);
    const std::size_t direct = std::min(n, source.size());
    pool_.insert(pool_.end(), source.begin(), source.begin() + static_cast<std::ptrdiff_t>(direct));
    for (std::size_t k = direct; k < n; ++k) pool_.push_back(source[rng.index(source.size())]);
  }

  std::size_t batch_size_;
  std::uint64_t seed_;
  std::vector<std::size_t> pool_;
  std::size_t personalized_count_ = 0;
};

}  // namespace nbrescore::training
