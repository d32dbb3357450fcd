#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace levtwin {

enum class Axis : std::size_t { x = 0, y = 1, z = 2 };

inline constexpr std::array<Axis, 3> kAxes{Axis::x, Axis::y, Axis::z};

constexpr std::string_view axis_name(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

Axis parse_axis(std::string_view name);

/// Per-axis triple indexed by Axis.
template <class T>
struct Axis3 {
  std::array<T, 3> v{};

  constexpr T& operator[](Axis a) { return v[static_cast<std::size_t>(a)]; }
  constexpr const T& operator[](Axis a) const { return v[static_cast<std::size_t>(a)]; }
  constexpr T& operator[](std::size_t i) { return v[i]; }
  constexpr const T& operator[](std::size_t i) const { return v[i]; }

  constexpr T& x() { return v[0]; }
  constexpr T& y() { return v[1]; }
  constexpr T& z() { return v[2]; }
  constexpr const T& x() const { return v[0]; }
  constexpr const T& y() const { return v[1]; }
  constexpr const T& z() const { return v[2]; }

  static constexpr Axis3 uniform(const T& t) { return Axis3{{t, t, t}}; }

  friend bool operator==(const Axis3&, const Axis3&) = default;
};

// Error hierarchy. Non-physical inputs are std::invalid_argument so callers
// that only care about "bad input" can catch the standard type.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path.empty() ? what : key_path + ": " + what),
        key_path_(std::move(key_path)) {}
  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

}  // namespace levtwin
