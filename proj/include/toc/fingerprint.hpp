#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace toc {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// FNV-1a of the bytes rendered as 16 lowercase hex digits.
std::string fingerprint(std::string_view bytes);
std::string fingerprint_file(const std::string& path);
std::string to_hex(std::uint64_t value);

}  // namespace toc
