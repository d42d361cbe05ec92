#include "salnet/archive.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <utility>

namespace salnet {

static_assert(std::endian::native == std::endian::little,
              "SALW payloads are copied verbatim; big-endian hosts need byte swapping");

namespace {

constexpr char kMagic[4] = {'S', 'A', 'L', 'W'};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large archives.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.insert(out_.end(), buf, buf + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (size_ - pos_ < n) {
      throw ArchiveError(ArchiveError::Kind::Truncated, pos_,
                         std::string("need ") + std::to_string(n) + " bytes for " + what +
                             ", " + std::to_string(size_ - pos_) + " remain");
    }
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  const std::uint8_t* take(std::size_t n, const char* what) {
    need(n, what);
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

ArchiveError::ArchiveError(Kind kind, std::size_t offset, const std::string& detail)
    : std::runtime_error(std::string("SALW ") + salnet::to_string(kind) + " at byte " +
                         std::to_string(offset) + ": " + detail),
      kind_(kind),
      offset_(offset) {}

const char* to_string(ArchiveError::Kind kind) {
  switch (kind) {
    case ArchiveError::Kind::Io: return "I/O error";
    case ArchiveError::Kind::BadMagic: return "bad magic";
    case ArchiveError::Kind::BadVersion: return "unsupported version";
    case ArchiveError::Kind::Truncated: return "truncated file";
    case ArchiveError::Kind::ChecksumMismatch: return "checksum mismatch";
    case ArchiveError::Kind::Malformed: return "malformed entry";
  }
  return "unknown error";
}

void WeightArchive::add(std::string name, Tensor tensor) {
  if (contains(name)) throw std::invalid_argument("duplicate tensor name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool WeightArchive::contains(const std::string& name) const { return find(name) != nullptr; }

const Tensor* WeightArchive::find(const std::string& name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Entry& e) { return e.first == name; });
  return it == entries_.end() ? nullptr : &it->second;
}

const Tensor& WeightArchive::at(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw std::out_of_range("archive has no tensor named '" + name + "'");
}

Tensor WeightArchive::extract(const std::string& name) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Entry& e) { return e.first == name; });
  if (it == entries_.end()) throw std::out_of_range("archive has no tensor named '" + name + "'");
  return std::exchange(it->second, Tensor{});
}

std::vector<std::uint8_t> serialize_archive(const WeightArchive& archive) {
  std::vector<std::uint8_t> out;
  Writer w(out);
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(archive.version());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(archive.size()));
  for (const auto& [name, tensor] : archive.entries()) {
    if (name.size() > 0xFFFF) throw std::invalid_argument("tensor name too long: " + name);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(tensor.rank()));
    for (auto extent : tensor.shape()) {
      if (extent > 0xFFFFFFFFu) throw std::invalid_argument("extent too large in " + name);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(extent));
    }
    w.put_bytes(tensor.raw(), tensor.size() * sizeof(float));
  }
  w.put<std::uint32_t>(crc32_of(out.data(), out.size()));
  return out;
}

WeightArchive parse_archive(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes.data(), bytes.size());
  const auto* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw ArchiveError(ArchiveError::Kind::BadMagic, 0, "expected \"SALW\"");
  }
  WeightArchive archive;
  archive.version_ = r.get<std::uint32_t>("version");
  if (archive.version_ != WeightArchive::kVersion) {
    throw ArchiveError(ArchiveError::Kind::BadVersion, 4,
                       "version " + std::to_string(archive.version_));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t entry_start = r.offset();
    const auto name_len = r.get<std::uint16_t>("name length");
    const auto* name_bytes = r.take(name_len, "name");
    std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    const std::size_t rank_at = r.offset();
    const auto rank = r.get<std::uint8_t>("rank");
    if (rank == 0 || rank > 4) {
      throw ArchiveError(ArchiveError::Kind::Malformed, rank_at,
                         "tensor '" + name + "' has rank " + std::to_string(rank));
    }
    Shape shape(rank);
    std::size_t count_elems = 1;
    for (auto& extent : shape) {
      const std::size_t at = r.offset();
      extent = r.get<std::uint32_t>("extent");
      if (extent == 0) {
        throw ArchiveError(ArchiveError::Kind::Malformed, at, "zero extent in '" + name + "'");
      }
      count_elems *= extent;
    }
    if (count_elems > (bytes.size() - r.offset()) / sizeof(float)) {
      throw ArchiveError(ArchiveError::Kind::Truncated, r.offset(),
                         "payload of '" + name + "' needs " +
                             std::to_string(count_elems * sizeof(float)) + " bytes");
    }
    const auto* payload = r.take(count_elems * sizeof(float), "payload");
    std::vector<float> values(count_elems);
    std::memcpy(values.data(), payload, count_elems * sizeof(float));
    if (archive.contains(name)) {
      throw ArchiveError(ArchiveError::Kind::Malformed, entry_start,
                         "duplicate tensor name '" + name + "'");
    }
    archive.entries_.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  const std::size_t crc_at = r.offset();
  const auto stored = r.get<std::uint32_t>("checksum");
  const auto actual = crc32_of(bytes.data(), crc_at);
  if (stored != actual) {
    throw ArchiveError(ArchiveError::Kind::ChecksumMismatch, crc_at,
                       "stored " + std::to_string(stored) + ", computed " + std::to_string(actual));
  }
  if (r.offset() != bytes.size()) {
    throw ArchiveError(ArchiveError::Kind::Malformed, r.offset(),
                       std::to_string(bytes.size() - r.offset()) + " trailing bytes");
  }
  return archive;
}

WeightArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ArchiveError(ArchiveError::Kind::Io, 0, "cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw ArchiveError(ArchiveError::Kind::Io, bytes.size(), "read failed: " + path.string());
  return parse_archive(bytes);
}

void write_archive(const WeightArchive& archive, const std::filesystem::path& path) {
  const auto bytes = serialize_archive(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError(ArchiveError::Kind::Io, 0, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArchiveError(ArchiveError::Kind::Io, 0, "write failed: " + path.string());
}

}  // namespace salnet
