#ifndef DUALRNN_RNG_HPP
#define DUALRNN_RNG_HPP

#include <cstdint>

namespace dualrnn {

// Counterbased splitmix64 stream. The (seed, position) pair reconstructs the
// stream state exactly, which is what checkpoints persist. Identical seed and
// draw order give bit-identical sequences on every platform.
class RngStream {
 public:
  explicit RngStream(uint64_t seed = 0) : seed_(seed), pos_(0) {}

  uint64_t seed() const { return seed_; }
  uint64_t position() const { return pos_; }

  void restore(uint64_t seed, uint64_t position) {
    seed_ = seed;
    pos_ = position;
  }

  uint64_t next_u64() {
    uint64_t z = seed_ + (++pos_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

 private:
  uint64_t seed_ = 0;
  uint64_t pos_ = 0;
};

}  // namespace dualrnn

#endif  // DUALRNN_RNG_HPP
