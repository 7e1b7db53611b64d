#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>

namespace dgw {

// A population size in N_0 extended by the graveyard state. Addition follows
// the graveyard convention: anything plus the graveyard is the graveyard.
class State {
 public:
  using count_type = std::uint64_t;

  constexpr State() = default;
  constexpr explicit State(count_type n) : value_{n} {}

  static constexpr State graveyard() { return State{kGraveyard}; }

  constexpr bool is_graveyard() const { return value_ == kGraveyard; }
  constexpr bool is_extinct() const { return value_ == 0; }
  constexpr bool is_alive() const { return !is_graveyard() && value_ > 0; }

  // Only meaningful when !is_graveyard().
  constexpr count_type count() const { return value_; }

  friend constexpr State operator+(State a, State b) {
    if (a.is_graveyard() || b.is_graveyard()) return graveyard();
    // saturate one below the sentinel so overflow never aliases the graveyard
    if (a.value_ > kGraveyard - 1 - b.value_) return State{kGraveyard - 1};
    return State{a.value_ + b.value_};
  }
  State& operator+=(State other) { return *this = *this + other; }

  friend constexpr bool operator==(State, State) = default;
  friend constexpr auto operator<=>(State, State) = default;

  std::string to_string() const {
    return is_graveyard() ? std::string{"D"} : std::to_string(value_);
  }

  friend std::ostream& operator<<(std::ostream& os, State s) { return os << s.to_string(); }

 private:
  static constexpr count_type kGraveyard = std::numeric_limits<count_type>::max();
  count_type value_{0};
};

}  // namespace dgw
