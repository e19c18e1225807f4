#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace randlab {

// xoshiro256++ with splitmix64 seeding. Hand-rolled so that streams are
// reproducible across platforms and serializable into checkpoints.
// normal() consumes exactly two uniforms per call (no cached spare), which
// keeps the generator state the whole story for resume determinism.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double normal();                       // standard normal
  double truncated_normal(double bound = 2.0);  // rejection-sampled |z| <= bound
  uint64_t uniform_u64(uint64_t n);      // [0, n), unbiased
  int uniform_int(int n) { return static_cast<int>(uniform_u64(static_cast<uint64_t>(n))); }
  bool bernoulli(double p) { return uniform() < p; }

  std::array<uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<uint64_t, 4> s_{};
};

uint64_t splitmix64(uint64_t& x);

// Domain-separated stream derivation: master seed -> labeled child seed.
// Training, evaluation and r0 streams never overlap by construction.
uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index = 0);
inline Rng derive_stream(uint64_t master, std::string_view label, uint64_t index = 0) {
  return Rng(derive_seed(master, label, index));
}

}  // namespace randlab
