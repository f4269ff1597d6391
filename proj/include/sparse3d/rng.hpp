#ifndef SPARSE3D_RNG_HPP_
#define SPARSE3D_RNG_HPP_

#include <cstdint>
#include <random>

namespace sparse3d {

using Rng = std::mt19937_64;

// Independent random streams used when deriving per-object seeds.
enum class Stream : std::uint64_t {
  kPoints = 1,
  kRotation = 2,
  kDescriptor = 3,
  kShuffle = 4,
  kInit = 5,
  kDropout = 6,
  kSplit = 7,
  kVoxel = 8,
};

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Seed for (stream, object, epoch) derived from a run seed. The object index is
// folded in as seed ^ index before mixing.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t object,
                          std::uint64_t epoch = 0);

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t object,
                    std::uint64_t epoch = 0) {
  return Rng(derive_seed(seed, stream, object, epoch));
}

}  // namespace sparse3d

#endif  // SPARSE3D_RNG_HPP_
