#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace smf {

// Counter-based gaussian stream.  Every draw is a pure function of
// (master seed, trajectory id, step index, channel index), so trajectories
// can run on any thread in any order and still reproduce bit-identically.
// The generator is two chained rounds of the splitmix64 finalizer, which
// passes the moment/correlation tolerances used in the test suite with a
// wide margin.
class CounterRng {
 public:
  CounterRng(std::uint64_t master_seed, std::uint64_t trajectory_id)
      : key_(mix(mix(master_seed + 0x9e3779b97f4a7c15ull) ^
                 mix(trajectory_id + 0xbf58476d1ce4e5b9ull))) {}

  /// One standard normal for (step, channel).
  double normal(std::uint64_t step, std::uint64_t channel) const {
    const double u1 = uniform(step, channel, 0);
    const double u2 = uniform(step, channel, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform in (0,1), strictly away from the endpoints.
  double uniform(std::uint64_t step, std::uint64_t channel,
                 std::uint64_t sub) const {
    return (static_cast<double>(word(step, channel, sub) >> 11) + 0.5) *
           0x1.0p-53;
  }

  std::uint64_t word(std::uint64_t step, std::uint64_t channel,
                     std::uint64_t sub) const {
    std::uint64_t w = mix(key_ ^ (step * 0xd1342543de82ef95ull));
    w = mix(w ^ (channel * 0xaf251af3b0f025b5ull) ^ (sub * 0x9e3779b97f4a7c15ull));
    return w;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

/// n_sigma independent standard normals for one (step, family) slot.
/// family 0/1 keeps the two noise sets of the pair scheme decorrelated;
/// the dissipative scheme uses family 0.
inline Eigen::VectorXd sample_sigma(const CounterRng& rng, std::uint64_t step,
                                    std::uint64_t family, int n_sigma) {
  Eigen::VectorXd sigma(n_sigma);
  for (int k = 0; k < n_sigma; ++k) {
    sigma[k] = rng.normal(step, (static_cast<std::uint64_t>(k) << 1) | family);
  }
  return sigma;
}

}  // namespace smf
