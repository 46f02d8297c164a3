#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gist::zip {

using Bytes = std::vector<std::uint8_t>;

// Minimal PKZIP writer: deflate-compressed entries, no zip64, and every
// entry stamped with the DOS epoch (1980-01-01 00:00) so archives built
// from identical content are byte-identical.
class Writer {
 public:
  void add(const std::string& name, std::span<const std::uint8_t> data);
  void add_text(const std::string& name, const std::string& text);
  Bytes finish();
  void finish_to(const std::filesystem::path& path);

 private:
  struct Entry {
    std::string name;
    std::uint32_t crc = 0;
    std::uint32_t compressed_size = 0;
    std::uint32_t size = 0;
    std::uint32_t offset = 0;
    std::uint16_t method = 0;
  };
  Bytes body_;
  std::vector<Entry> entries_;
};

// Reader over an in-memory archive. Supports stored and deflated entries.
class Reader {
 public:
  explicit Reader(Bytes archive);
  static Reader open(const std::filesystem::path& path);

  // Entry names in central-directory order.
  const std::vector<std::string>& names() const { return names_; }
  bool contains(const std::string& name) const;
  Bytes read(const std::string& name) const;
  std::string read_text(const std::string& name) const;

 private:
  struct Entry {
    std::uint32_t crc = 0;
    std::uint32_t compressed_size = 0;
    std::uint32_t size = 0;
    std::uint32_t local_offset = 0;
    std::uint16_t method = 0;
  };
  Bytes data_;
  std::vector<std::string> names_;
  std::vector<Entry> entries_;
};

}  // namespace gist::zip
