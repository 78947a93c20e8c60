#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace gridclear {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Conductor phase. The underlying value is the slot in every 3-vector.
enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::A, Phase::B, Phase::C};

constexpr int slot(Phase p) { return static_cast<int>(p); }
char to_char(Phase p);

/// Subset of {a, b, c}.
class PhaseSet {
 public:
  constexpr PhaseSet() = default;

  static constexpr PhaseSet all() { return PhaseSet(0b111); }
  static constexpr PhaseSet from_bits(std::uint8_t bits) { return PhaseSet(bits & 0b111); }
  static constexpr PhaseSet of(Phase p) { return PhaseSet(std::uint8_t(1u << slot(p))); }

  /// Parses strings such as "abc", "ac" or "B". Throws SchemaError on bad input.
  static PhaseSet parse(std::string_view text);

  constexpr bool contains(Phase p) const { return (bits_ >> slot(p)) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return ((bits_ >> 0) & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1); }
  constexpr bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  constexpr PhaseSet with(Phase p) const { return PhaseSet(std::uint8_t(bits_ | (1u << slot(p)))); }

  /// 1 on present phases, 0 elsewhere.
  Vec3 mask() const;

  std::string str() const;

  friend constexpr bool operator==(PhaseSet, PhaseSet) = default;

 private:
  constexpr explicit PhaseSet(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_ = 0;
};

}  // namespace gridclear
