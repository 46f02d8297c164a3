#include "gist/zip_archive.hpp"

#include <zlib.h>

#include <algorithm>

#include "gist/error.hpp"
#include "gist/image_io.hpp"

namespace gist::zip {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01
constexpr std::uint16_t kDosTime = 0;

void put16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get16(const Bytes& in, std::size_t at) {
  if (at + 2 > in.size()) throw Error(Errc::CorruptArchive, "truncated zip structure");
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

std::uint32_t get32(const Bytes& in, std::size_t at) {
  if (at + 4 > in.size()) throw Error(Errc::CorruptArchive, "truncated zip structure");
  return static_cast<std::uint32_t>(in[at]) | (static_cast<std::uint32_t>(in[at + 1]) << 8) |
         (static_cast<std::uint32_t>(in[at + 2]) << 16) | (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

Bytes deflate_raw(std::span<const std::uint8_t> data) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(Errc::Io, "deflateInit2 failed");
  Bytes out(deflateBound(&zs, static_cast<uLong>(data.size())));
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::Io, "deflate failed");
  out.resize(zs.total_out);
  return out;
}

Bytes inflate_raw(std::span<const std::uint8_t> data, std::size_t expected) {
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error(Errc::CorruptArchive, "inflateInit2 failed");
  Bytes out(expected);
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) throw Error(Errc::CorruptArchive, "inflate failed");
  return out;
}

}  // namespace

void Writer::add(const std::string& name, std::span<const std::uint8_t> data) {
  Entry e;
  e.name = name;
  e.size = static_cast<std::uint32_t>(data.size());
  e.crc = static_cast<std::uint32_t>(crc32(0L, data.data(), static_cast<uInt>(data.size())));
  Bytes packed = deflate_raw(data);
  e.method = 8;
  if (packed.size() >= data.size()) {
    packed.assign(data.begin(), data.end());
    e.method = 0;
  }
  e.compressed_size = static_cast<std::uint32_t>(packed.size());
  e.offset = static_cast<std::uint32_t>(body_.size());

  put32(body_, kLocalSig);
  put16(body_, 20);
  put16(body_, 0);
  put16(body_, e.method);
  put16(body_, kDosTime);
  put16(body_, kDosDate);
  put32(body_, e.crc);
  put32(body_, e.compressed_size);
  put32(body_, e.size);
  put16(body_, static_cast<std::uint16_t>(name.size()));
  put16(body_, 0);
  body_.insert(body_.end(), name.begin(), name.end());
  body_.insert(body_.end(), packed.begin(), packed.end());
  entries_.push_back(std::move(e));
}

void Writer::add_text(const std::string& name, const std::string& text) {
  add(name, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes Writer::finish() {
  Bytes out = body_;
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  for (const Entry& e : entries_) {
    put32(out, kCentralSig);
    put16(out, 20);
    put16(out, 20);
    put16(out, 0);
    put16(out, e.method);
    put16(out, kDosTime);
    put16(out, kDosDate);
    put32(out, e.crc);
    put32(out, e.compressed_size);
    put32(out, e.size);
    put16(out, static_cast<std::uint16_t>(e.name.size()));
    put16(out, 0);
    put16(out, 0);
    put16(out, 0);
    put16(out, 0);
    put32(out, 0);
    put32(out, e.offset);
    out.insert(out.end(), e.name.begin(), e.name.end());
  }
  const auto cd_size = static_cast<std::uint32_t>(out.size() - cd_offset);
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries_.size()));
  put16(out, static_cast<std::uint16_t>(entries_.size()));
  put32(out, cd_size);
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

void Writer::finish_to(const std::filesystem::path& path) { io::write_file_atomic(path, finish()); }

Reader::Reader(Bytes archive) : data_(std::move(archive)) {
  if (data_.size() < 22) throw Error(Errc::CorruptArchive, "file too small to be a zip archive");
  std::size_t eocd = data_.size() - 22;
  const std::size_t floor = data_.size() > 22 + 0xFFFF ? data_.size() - 22 - 0xFFFF : 0;
  while (get32(data_, eocd) != kEndSig) {
    if (eocd == floor) throw Error(Errc::CorruptArchive, "end of central directory not found");
    --eocd;
  }
  const std::uint16_t count = get16(data_, eocd + 10);
  std::size_t at = get32(data_, eocd + 16);
  for (std::uint16_t i = 0; i < count; ++i) {
    if (get32(data_, at) != kCentralSig) throw Error(Errc::CorruptArchive, "bad central directory entry");
    Entry e;
    e.method = get16(data_, at + 10);
    e.crc = get32(data_, at + 16);
    e.compressed_size = get32(data_, at + 20);
    e.size = get32(data_, at + 24);
    const std::uint16_t name_len = get16(data_, at + 28);
    const std::uint16_t extra_len = get16(data_, at + 30);
    const std::uint16_t comment_len = get16(data_, at + 32);
    e.local_offset = get32(data_, at + 42);
    if (at + 46 + name_len > data_.size()) throw Error(Errc::CorruptArchive, "truncated entry name");
    names_.emplace_back(reinterpret_cast<const char*>(data_.data() + at + 46), name_len);
    entries_.push_back(e);
    at += 46u + name_len + extra_len + comment_len;
  }
}

Reader Reader::open(const std::filesystem::path& path) {
  try {
    return Reader(io::read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

bool Reader::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Bytes Reader::read(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(Errc::CorruptArchive, "no entry named " + name);
  const Entry& e = entries_[static_cast<std::size_t>(it - names_.begin())];
  if (get32(data_, e.local_offset) != kLocalSig) throw Error(Errc::CorruptArchive, "bad local header for " + name);
  const std::size_t start =
      e.local_offset + 30u + get16(data_, e.local_offset + 26) + get16(data_, e.local_offset + 28);
  if (start + e.compressed_size > data_.size()) throw Error(Errc::CorruptArchive, "truncated entry " + name);
  std::span<const std::uint8_t> packed(data_.data() + start, e.compressed_size);
  Bytes out;
  if (e.method == 0) {
    out.assign(packed.begin(), packed.end());
  } else if (e.method == 8) {
    out = inflate_raw(packed, e.size);
  } else {
    throw Error(Errc::CorruptArchive, "unsupported compression method for " + name);
  }
  if (static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size()))) != e.crc)
    throw Error(Errc::CorruptArchive, "CRC mismatch for " + name);
  return out;
}

std::string Reader::read_text(const std::string& name) const {
  Bytes b = read(name);
  return std::string(b.begin(), b.end());
}

}  // namespace gist::zip
