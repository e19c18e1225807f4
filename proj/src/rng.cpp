#include "randlab/rng.hpp"

#include <cmath>

namespace randlab {

uint64_t splitmix64(uint64_t& x) {
  uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(uint64_t seed) {
  uint64_t x = seed;
  for (auto& w : s_) w = splitmix64(x);
}

static inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller, sine branch only; u1 nudged away from 0.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::sin(2.0 * M_PI * u2);
}

double Rng::truncated_normal(double bound) {
  for (;;) {
    double z = normal();
    if (std::fabs(z) <= bound) return z;
  }
}

uint64_t Rng::uniform_u64(uint64_t n) {
  if (n == 0) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  for (;;) {
    uint64_t v = next_u64();
    if (v < limit) return v % n;
  }
}

uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
  // FNV-1a over the label, then splitmix64 mixing with master and index.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  uint64_t x = master;
  uint64_t a = splitmix64(x);
  x = h;
  uint64_t b = splitmix64(x);
  x = index;
  uint64_t c = splitmix64(x);
  x = a ^ rotl(b, 21) ^ rotl(c, 43);
  return splitmix64(x);
}

}  // namespace randlab
