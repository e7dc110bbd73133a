#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rccf/tensor.hpp"

// On-disk formats (all integers and floats little-endian):
//
//   tensor record: "RCTN" | u32 rank | u64 dims[rank] | f64 values[numel]
//
//   checkpoint:    "RCCFCKPT" | u32 version(=1) | u64 rng_state | u64 step
//                  | u32 len + config text | u32 len + vocab text
//                  | u32 count | count * (u32 len + name + tensor record)

namespace rccf {
namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(os, b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(os, b, 8);
}

inline void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(read_u64(is, what));
}

inline void write_magic(std::ostream& os, const char* magic, std::size_t n) {
  write_bytes(os, magic, n);
}

inline void expect_magic(std::istream& is, const char* magic, std::size_t n, const std::string& what) {
  std::string got(n, '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(n)) || got != std::string(magic, n))
    throw std::runtime_error("bad magic in " + what);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const std::string& what) {
  const std::uint32_t n = read_u32(is, what);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw std::runtime_error("truncated " + what);
  return s;
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor& t) {
  detail::write_magic(os, "RCTN", 4);
  detail::write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) detail::write_u64(os, static_cast<std::uint64_t>(d));
  for (int i = 0; i < t.size(); ++i) detail::write_f64(os, t.v(i));
}

inline Tensor read_tensor(std::istream& is, const std::string& what = "tensor record") {
  detail::expect_magic(is, "RCTN", 4, what);
  const std::uint32_t rank = detail::read_u32(is, what);
  if (rank == 0 || rank > 8) throw std::runtime_error("implausible rank in " + what);
  std::vector<int> shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint64_t d = detail::read_u64(is, what);
    if (d == 0 || d > (1u << 24)) throw std::runtime_error("implausible dimension in " + what);
    shape[i] = static_cast<int>(d);
  }
  Tensor t(shape);
  for (int i = 0; i < t.size(); ++i) t.v(i) = detail::read_f64(is, what);
  return t;
}

struct CheckpointData {
  std::string config_text;
  std::string vocab_text;
  std::uint64_t rng_state = 0;
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

/// Writes to a temp file in the target directory, then renames into place.
inline void save_checkpoint(const std::string& path, const CheckpointData& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
    detail::write_magic(os, "RCCFCKPT", 8);
    detail::write_u32(os, 1);
    detail::write_u64(os, ckpt.rng_state);
    detail::write_u64(os, ckpt.step);
    detail::write_string(os, ckpt.config_text);
    detail::write_string(os, ckpt.vocab_text);
    detail::write_u32(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
      detail::write_string(os, name);
      write_tensor(os, tensor);
    }
    if (!os) throw std::runtime_error("write failure on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  detail::expect_magic(is, "RCCFCKPT", 8, "checkpoint " + path);
  const std::uint32_t version = detail::read_u32(is, "checkpoint header");
  if (version != 1) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  CheckpointData ckpt;
  ckpt.rng_state = detail::read_u64(is, "checkpoint header");
  ckpt.step = detail::read_u64(is, "checkpoint header");
  ckpt.config_text = detail::read_string(is, "checkpoint config");
  ckpt.vocab_text = detail::read_string(is, "checkpoint vocabulary");
  const std::uint32_t count = detail::read_u32(is, "checkpoint record count");
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    try {
      name = detail::read_string(is, "tensor record name #" + std::to_string(i));
      Tensor t = read_tensor(is, "tensor record '" + name + "'");
      ckpt.tensors.emplace_back(std::move(name), std::move(t));
    } catch (const std::exception& e) {
      throw std::runtime_error("checkpoint " + path + ": " + e.what());
    }
  }
  return ckpt;
}

}  // namespace rccf
