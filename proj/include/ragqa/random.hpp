#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace ragqa {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Small portable generator; the standard distributions are implementation
// defined, so bounded and real draws are implemented here to keep seeded
// output identical across toolchains.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }
  std::uint64_t next();
  double uniform01();                        // [0, 1)
  std::uint64_t below(std::uint64_t bound);  // [0, bound), unbiased
  double gaussian();

 private:
  std::uint64_t state_;
};

}  // namespace ragqa
