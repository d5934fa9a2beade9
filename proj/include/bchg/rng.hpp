#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace bchg {

// xoshiro256++ with splitmix64 seeding. Hand-rolled so that trajectories and
// metrics are byte-identical across platforms and standard libraries; a single
// experiment seed fans out into independent substreams (environment noise,
// policy sampling, initialization) via substream().
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();

  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (no cached spare; one draw costs two
  // uniforms, keeping the stream position independent of call parity).
  double normal();

  Eigen::VectorXd normal_vector(int n);

  // Index sampled from an unnormalized nonnegative weight vector.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& weights);

  // Deterministically derived independent stream.
  Rng substream(std::uint64_t stream_id) const;

 private:
  std::uint64_t state_[4];
  std::uint64_t root_seed_;
};

}  // namespace bchg
