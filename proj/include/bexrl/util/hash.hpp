#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bexrl {

// 64-bit FNV-1a. Stable across platforms, used to stamp artifacts.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

}  // namespace bexrl
