#pragma once

#include <cstdint>

namespace btw {

// splitmix64 finalizer; used both as the generator step and as the avalanche
// mixer when deriving substream seeds from (seed, tag...) tuples.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

// Splittable counter-based stream: the generator state is a mixed function of
// the key words alone, so substreams keyed by (seed, replica, ...) are
// deterministic and independent of call order or scheduling. Construction is
// O(1), which matters because environment nodes derive one stream each.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix64(seed, 0xa076bc5c7f2bd3a1ULL)) {}
  RngStream(std::uint64_t seed, std::uint64_t tag) : RngStream(mix64(seed, tag)) {}
  RngStream(std::uint64_t seed, std::uint64_t tag, std::uint64_t sub)
      : RngStream(mix64(mix64(seed, tag), sub)) {}

  std::uint64_t next() { return splitmix64(state_); }

  // uniform in [0,1), 53-bit resolution
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n); multiply-shift map (negligible bias for n far
  // below 2^64)
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace btw
