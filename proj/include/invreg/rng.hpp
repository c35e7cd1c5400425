#pragma once

#include <cstdint>
#include <random>

namespace invreg {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based stream: the draws depend only on (master_seed, stream_id),
/// never on which thread consumes them or in which order streams are created.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_seed_(master_seed), stream_id_(stream_id) {
    const std::uint64_t a = detail::splitmix64(master_seed);
    const std::uint64_t b = detail::splitmix64(a ^ stream_id);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent stream nested under this one, e.g. bootstrap replicate b of
  /// Monte Carlo replication r. Does not consume draws from *this.
  RngStream substream(std::uint64_t id) const {
    return RngStream(detail::splitmix64(master_seed_ ^ detail::splitmix64(stream_id_ + 0x5851f42d4c957f2dULL)), id);
  }

  std::mt19937_64& engine() { return engine_; }

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double exponential() { return std::exponential_distribution<double>(1.0)(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace invreg
