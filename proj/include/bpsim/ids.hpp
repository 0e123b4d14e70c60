#pragma once

#include <cstddef>
#include <cstdint>

namespace bpsim {

// Dense indices. Every entity is numbered in ascending order of its external
// id, so "lowest id" tie-breaks reduce to "lowest index".
enum class AsIdx : std::uint32_t {};
enum class RouterIdx : std::uint32_t {};
enum class LinkIdx : std::uint32_t {};
enum class Commodity : std::uint32_t {};

template <typename E>
constexpr std::size_t idx(E e) noexcept {
  return static_cast<std::size_t>(e);
}

template <typename E>
constexpr E id_cast(std::size_t i) noexcept {
  return static_cast<E>(static_cast<std::uint32_t>(i));
}

}  // namespace bpsim
