#include "crowdguard/random.hpp"

namespace crowdguard {

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> parts) {
  constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < 8; ++i) {
    h ^= (seed >> (8 * i)) & 0xff;
    h *= kPrime;
  }
  for (auto part : parts) {
    h ^= 0xff;
    h *= kPrime;
    for (unsigned char c : part) {
      h ^= c;
      h *= kPrime;
    }
  }
  return h;
}

}  // namespace crowdguard
