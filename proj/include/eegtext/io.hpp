#ifndef EEGTEXT_IO_HPP_
#define EEGTEXT_IO_HPP_

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eegtext/errors.hpp"

namespace eegtext {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on " + path);
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed on " + path);
}

// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---- Binary containers --------------------------------------------------
// Shared layout for checkpoints and cached epoch tensors:
//   magic (8 bytes) | manifest length (u64 LE) | manifest (UTF-8 JSON)
//   | payload | checksum (u64 LE, FNV-1a over everything after the magic)

uint64_t fnv1a64(const std::string& bytes);

void append_u64_le(std::string& out, uint64_t v);
uint64_t read_u64_le(const std::string& in, size_t offset);

std::string pack_doubles_le(const std::vector<double>& v);
std::vector<double> unpack_doubles_le(const std::string& bytes, size_t offset,
                                      size_t count);

struct Container {
  std::string manifest;
  std::string payload;
};

void write_container(const std::string& path, const std::string& magic,
                     const std::string& manifest, const std::string& payload);
Container read_container(const std::string& path, const std::string& magic);

}  // namespace eegtext

#endif  // EEGTEXT_IO_HPP_
