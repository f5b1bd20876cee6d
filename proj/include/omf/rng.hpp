#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace omf {

/// Independent Gaussian stream keyed by (seed, stream). Two streams with the
/// same key produce the same sequence regardless of which thread draws them.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6f6d66u};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace omf
