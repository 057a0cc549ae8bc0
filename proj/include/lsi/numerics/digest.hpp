#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>

namespace lsi::numerics {

/// FNV-1a 64-bit, rendered as 16 hex digits.
class Digest {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(double value) {
    char buffer[sizeof(double)];
    std::memcpy(buffer, &value, sizeof(double));
    update(std::string_view(buffer, sizeof(double)));
  }
  std::string hex() const {
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(state_));
    return out;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string digest_of(std::string_view bytes) {
  Digest d;
  d.update(bytes);
  return d.hex();
}

}  // namespace lsi::numerics
