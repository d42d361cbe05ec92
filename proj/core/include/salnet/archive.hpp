#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "salnet/tensor.hpp"

namespace salnet {

/// SALW named-tensor container.
///
/// Layout (all integers little-endian):
///   "SALW" | u32 version (=1) | u32 tensor count
///   per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 extents |
///               product(extents) x f32 row-major payload
///   u32 CRC-32 of every preceding byte
class WeightArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  using Entry = std::pair<std::string, Tensor>;

  /// Adds a tensor; throws std::invalid_argument on a duplicate name.
  void add(std::string name, Tensor tensor);

  bool contains(const std::string& name) const;
  const Tensor* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  /// Moves a tensor out, leaving an empty tensor under the same name.
  Tensor extract(const std::string& name);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::uint32_t version() const { return version_; }

  friend bool operator==(const WeightArchive&, const WeightArchive&) = default;

 private:
  friend WeightArchive parse_archive(const std::vector<std::uint8_t>&);
  std::uint32_t version_ = kVersion;
  std::vector<Entry> entries_;
};

class ArchiveError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, BadVersion, Truncated, ChecksumMismatch, Malformed };

  ArchiveError(Kind kind, std::size_t offset, const std::string& detail);

  Kind kind() const { return kind_; }
  /// Byte offset at which the problem was detected.
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

const char* to_string(ArchiveError::Kind kind);

std::vector<std::uint8_t> serialize_archive(const WeightArchive& archive);
WeightArchive parse_archive(const std::vector<std::uint8_t>& bytes);

WeightArchive read_archive(const std::filesystem::path& path);
void write_archive(const WeightArchive& archive, const std::filesystem::path& path);

}  // namespace salnet
