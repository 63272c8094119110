#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tslab {

/// SplitMix64 finalizer. Used to decorrelate (seed, stream) pairs before they
/// reach the engine.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a list of ids, used to derive stream ids such as
/// hash(n, trial, purpose). Adding new ids never perturbs existing streams.
constexpr std::uint64_t derive_stream(std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto id : ids) h = splitmix64(h ^ splitmix64(id));
  return h;
}

/// Deterministic random stream identified by (master_seed, stream_id).
///
/// Identical pairs replay identical draws. The object is consumed by value:
/// concurrent callers must each hold their own stream.
class SeededRng {
 public:
  SeededRng(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_seed_(master_seed),
        stream_id_(stream_id),
        engine_(splitmix64(master_seed ^ splitmix64(stream_id ^ 0xd1b54a32d192ed03ULL))) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream sharing the master seed; independent of this stream's state.
  SeededRng child(std::uint64_t sub) const {
    return SeededRng(master_seed_, derive_stream({stream_id_, sub}));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace tslab
