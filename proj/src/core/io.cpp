#include "mtl/core/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace mtl {

namespace {

constexpr char kMagic[4] = {'M', 'T', 'L', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;
constexpr std::uint8_t kDtypeU8 = 2;

void write_header(std::ofstream& out, std::uint8_t dtype, const std::vector<int>& dims) {
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  out.put(static_cast<char>(dtype));
  out.put(static_cast<char>(static_cast<std::uint8_t>(dims.size())));
  for (int d : dims) {
    std::uint32_t v = static_cast<std::uint32_t>(d);
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

struct Header {
  std::uint8_t dtype;
  std::vector<int> dims;
  std::size_t payload_offset;
};

Header read_header(std::ifstream& in, const std::string& path, std::uint8_t want_dtype) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": bad magic", 0);
  int version = in.get();
  if (version != kVersion) throw FormatError(path + ": unsupported version", 4);
  int dtype = in.get();
  if (dtype != kDtypeF32 && dtype != kDtypeU8)
    throw FormatError(path + ": unknown dtype", 5);
  if (dtype != want_dtype) throw FormatError(path + ": unexpected dtype", 5);
  int ndim = in.get();
  if (ndim <= 0 || ndim > 8) throw FormatError(path + ": bad ndim", 6);
  std::vector<int> dims;
  std::size_t off = 7;
  for (int i = 0; i < ndim; ++i, off += 4) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
      throw FormatError(path + ": truncated dims", off);
    std::uint32_t v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    if (v == 0) throw FormatError(path + ": zero dim", off);
    dims.push_back(static_cast<int>(v));
  }
  return {static_cast<std::uint8_t>(dtype), dims, off};
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_header(out, kDtypeF32, t.dims());
  std::vector<float> buf(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) buf[i] = static_cast<float>(t[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path);
}

Tensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  Header h = read_header(in, path, kDtypeF32);
  std::size_t n = 1;
  for (int d : h.dims) n *= static_cast<std::size_t>(d);
  std::vector<float> buf(n);
  if (!in.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(n * sizeof(float))))
    throw FormatError(path + ": truncated payload", h.payload_offset);
  Tensor t(h.dims);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(buf[i]);
  return t;
}

void write_labels(const std::string& path, const LabelGrid& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_header(out, kDtypeU8, g.dims());
  out.write(reinterpret_cast<const char*>(g.data()),
            static_cast<std::streamsize>(g.numel()));
  if (!out) throw IoError("write failed: " + path);
}

LabelGrid read_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  Header h = read_header(in, path, kDtypeU8);
  std::size_t n = 1;
  for (int d : h.dims) n *= static_cast<std::size_t>(d);
  std::vector<std::uint8_t> buf(n);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n)))
    throw FormatError(path + ": truncated payload", h.payload_offset);
  return LabelGrid(h.dims, std::move(buf));
}

}  // namespace mtl
