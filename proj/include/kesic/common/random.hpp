#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>

#include "kesic/common/bytes.hpp"

namespace kesic {

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Bytes bytes(std::size_t n) {
    Bytes b(n);
    fill(b);
    return b;
  }
};

// OpenSSL CSPRNG.
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

// Reproducible stream for tests and the simulator. Not for production keys.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::mt19937_64 engine_;
};

// Seeded stream when a seed is given, CSPRNG otherwise. The label separates
// streams of different actors sharing one seed.
std::unique_ptr<RandomSource> make_random(std::optional<std::uint64_t> seed,
                                          std::string_view label = {});

}  // namespace kesic
