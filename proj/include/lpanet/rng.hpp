#ifndef LPANET_RNG_HPP
#define LPANET_RNG_HPP

#include <cstdint>
#include <string_view>

namespace lpanet {

/// Deterministic, splittable random generator.
///
/// Algorithm (fixed, so streams are reproducible across builds and platforms):
///   - state expansion and child derivation use SplitMix64;
///   - the stream itself is xoshiro256++;
///   - uniform doubles take the top 53 bits, normals use Box-Muller on a
///     (0,1] x [0,1) pair (the second variate is cached).
///
/// child(key) derives an independent stream from the *original seed* and the
/// key, never from the current state, so derived streams do not depend on how
/// much the parent has been consumed or on scheduling order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform on [0, 1).
    double uniform01();
    /// Standard normal via Box-Muller.
    double normal();

    /// Independent child stream keyed by an integer.
    Rng child(std::uint64_t key) const;
    /// Child stream keyed by a label (FNV-1a hash of the bytes).
    Rng child(std::string_view label) const;

    /// Seed of the child stream that child(key) would produce; lets callers
    /// pass derived seeds around as plain integers.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);
    static std::uint64_t fnv1a(std::string_view bytes);

  private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

} // namespace lpanet

#endif
