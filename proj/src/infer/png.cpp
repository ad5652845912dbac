#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mtl/core/errors.hpp"
#include "mtl/infer/infer.hpp"

namespace mtl::infer::detail {

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  put_u32_be(out, crc);
}

}  // namespace

void write_png(const std::string& path, int height, int width, int channels,
               const std::vector<std::uint8_t>& raster) {
  if (channels != 1 && channels != 3) throw IoError("png: unsupported channel count");
  // Filter byte 0 (None) prepended to every scanline.
  const std::size_t row = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> scanlines(static_cast<std::size_t>(height) * (row + 1));
  for (int y = 0; y < height; ++y) {
    std::uint8_t* dst = scanlines.data() + static_cast<std::size_t>(y) * (row + 1);
    dst[0] = 0;
    std::memcpy(dst + 1, raster.data() + static_cast<std::size_t>(y) * row, row);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(scanlines.size()));
  std::vector<std::uint8_t> compressed(comp_len);
  if (compress2(compressed.data(), &comp_len, scanlines.data(),
                static_cast<uLong>(scanlines.size()), 6) != Z_OK)
    throw IoError("png: deflate failed");
  compressed.resize(comp_len);

  std::vector<std::uint8_t> out;
  const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.insert(out.end(), sig, sig + 8);
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);                                  // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);              // color type: gray / truecolor
  ihdr.push_back(0);                                  // compression
  ihdr.push_back(0);                                  // filter
  ihdr.push_back(0);                                  // interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", compressed);
  put_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write png: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("png write failed: " + path);
}

}  // namespace mtl::infer::detail
