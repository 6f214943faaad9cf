#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace lod {

/// 64-bit FNV-1a, used for change detection between pipeline runs (not for integrity).
class Digest {
 public:
  Digest& update(std::string_view bytes) noexcept;
  Digest& update_file(const std::filesystem::path& path);
  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string file_digest(const std::filesystem::path& path);

}  // namespace lod
