#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace crossq {

using Rng = std::mt19937_64;

/// Independent stream identifiers split off one master seed.
enum class Stream : std::uint64_t {
  env = 1,
  init = 2,
  sampling = 3,
  action_noise = 4,
  bootstrap = 5,
  eval_env = 6,
  probe = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, static_cast<std::uint64_t>(stream), index));
}

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_rng(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
}

}  // namespace crossq
