#include "eegtext/io.hpp"

#include <cstring>

namespace eegtext {

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void append_u64_le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t read_u64_le(const std::string& in, size_t offset) {
  if (offset + 8 > in.size())
    throw IoError("truncated container: u64 at offset " +
                  std::to_string(offset));
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(in[offset + i]))
         << (8 * i);
  return v;
}

std::string pack_doubles_le(const std::vector<double>& v) {
  std::string out;
  out.reserve(v.size() * 8);
  for (double d : v) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    append_u64_le(out, bits);
  }
  return out;
}

std::vector<double> unpack_doubles_le(const std::string& bytes, size_t offset,
                                      size_t count) {
  if (offset + count * 8 > bytes.size())
    throw IoError("truncated payload: " + std::to_string(count) +
                  " doubles at offset " + std::to_string(offset));
  std::vector<double> v(count);
  for (size_t i = 0; i < count; ++i) {
    uint64_t bits = read_u64_le(bytes, offset + i * 8);
    std::memcpy(&v[i], &bits, 8);
  }
  return v;
}

namespace {
constexpr size_t kMagicLen = 8;
}

void write_container(const std::string& path, const std::string& magic,
                     const std::string& manifest, const std::string& payload) {
  if (magic.size() != kMagicLen)
    throw ConfigError("container magic must be 8 bytes, got \"" + magic +
                      "\"");
  std::string body;
  append_u64_le(body, manifest.size());
  body += manifest;
  body += payload;
  std::string file = magic + body;
  append_u64_le(file, fnv1a64(body));
  write_file(path, file);
}

Container read_container(const std::string& path, const std::string& magic) {
  if (magic.size() != kMagicLen)
    throw ConfigError("container magic must be 8 bytes, got \"" + magic +
                      "\"");
  std::string file = read_file(path);
  if (file.size() < kMagicLen + 16)
    throw IoError(path + ": too short to be a " + magic + " container");
  if (file.compare(0, kMagicLen, magic) != 0)
    throw IoError(path + ": bad magic, expected " + magic);
  std::string body = file.substr(kMagicLen, file.size() - kMagicLen - 8);
  uint64_t want = read_u64_le(file, file.size() - 8);
  if (fnv1a64(body) != want)
    throw IoError(path + ": checksum mismatch, file is corrupt");
  uint64_t mlen = read_u64_le(body, 0);
  if (8 + mlen > body.size())
    throw IoError(path + ": manifest length " + std::to_string(mlen) +
                  " overruns file");
  Container c;
  c.manifest = body.substr(8, mlen);
  c.payload = body.substr(8 + mlen);
  return c;
}

}  // namespace eegtext
