#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace betakde {

//! Seedable, splittable random stream.
//!
//! A (seed, stream index) pair fully determines the sequence. Streams are
//! never shared between tasks: every concurrent replication builds its own
//! from (seed, replication index).
class RandomStream
{
public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0)
  {
    std::seed_seq seq{ static_cast<std::uint32_t>(seed),
                       static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream),
                       static_cast<std::uint32_t>(stream >> 32),
                       0x62657461u };
    engine_.seed(seq);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max()
  {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return engine_(); }

  //! Uniform draw on [0, 1) with 53 random bits.
  double uniform()
  {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  //! Uniform draw on (0, 1).
  double uniform_open()
  {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

private:
  std::mt19937_64 engine_;
};

} // namespace betakde
