#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace panellp {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Named substreams of one (replication, unit) pair.
enum class Stream : std::uint64_t { X = 0, Y = 1, Effects = 2, BurnInY = 3 };

/// Key of the stream for (seed, replication, unit, stream). Each stream is an
/// mt19937_64 seeded with this key, so any draw is independent of the order in
/// which replications and units are generated.
inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t rep, std::uint64_t unit,
                                          Stream s) noexcept {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ rep);
  k = splitmix64(k ^ unit);
  return splitmix64(k ^ static_cast<std::uint64_t>(s));
}

/// Standard normal draws from one stream. Boost's ziggurat sampler is used
/// because its output is specified independently of the standard library.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t rep, std::uint64_t unit, Stream s)
      : engine_(stream_key(seed, rep, unit, s)) {}

  double operator()() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> dist_;
};

}  // namespace panellp
