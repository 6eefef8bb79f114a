#include "enspost/grid.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace enspost {

namespace {

constexpr char kMagic[8] = {'E', 'N', 'S', 'G', 'R', 'D', '1', '\0'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace

const char* field_id_name(FieldId id) {
  switch (id) {
    case FieldId::t850_like: return "t850_like";
    case FieldId::z500_like: return "z500_like";
    case FieldId::synthetic_k: return "synthetic_k";
  }
  return "synthetic_k";
}

FieldId field_id_from(const std::string& name) {
  if (name == "t850_like") return FieldId::t850_like;
  if (name == "z500_like") return FieldId::z500_like;
  if (name == "synthetic_k") return FieldId::synthetic_k;
  throw std::invalid_argument("unknown field id: " + name);
}

void grd1_write(const std::filesystem::path& path, const Grd1& g) {
  if (g.data.size() != static_cast<std::size_t>(g.h) * g.w * g.c)
    throw std::invalid_argument("grd1_write: data size does not match h*w*c");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("grd1_write: cannot open " + path.string());
  os.write(kMagic, 8);
  write_u32(os, g.h);
  write_u32(os, g.w);
  write_u32(os, g.c);
  // f32 little-endian; this targets little-endian hosts and asserts so.
  static_assert(std::endian::native == std::endian::little);
  os.write(reinterpret_cast<const char*>(g.data.data()),
           static_cast<std::streamsize>(g.data.size() * sizeof(float)));
  if (!os) throw std::runtime_error("grd1_write: write failed " + path.string());
}

Grd1 grd1_read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("grd1_read: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("grd1_read: bad magic in " + path.string());
  Grd1 g;
  g.h = read_u32(is);
  g.w = read_u32(is);
  g.c = read_u32(is);
  std::size_t n = static_cast<std::size_t>(g.h) * g.w * g.c;
  if (g.h == 0 || g.w == 0 || g.c == 0 || n > (1u << 30))
    throw std::runtime_error("grd1_read: implausible dims in " + path.string());
  g.data.resize(n);
  is.read(reinterpret_cast<char*>(g.data.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw std::runtime_error("grd1_read: truncated " + path.string());
  return g;
}

GeoGrid grd1_channel_grid(const Grd1& g, std::uint32_t ci) {
  if (ci >= g.c) throw std::out_of_range("grd1_channel_grid: channel index");
  GeoGrid out(static_cast<int>(g.h), static_cast<int>(g.w));
  const float* src = g.channel(ci);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = src[i];
  return out;
}

void grd1_set_channel(Grd1& g, std::uint32_t ci, const GeoGrid& grid) {
  if (ci >= g.c) throw std::out_of_range("grd1_set_channel: channel index");
  if (grid.h != static_cast<int>(g.h) || grid.w != static_cast<int>(g.w))
    throw std::invalid_argument("grd1_set_channel: dims mismatch");
  float* dst = g.channel(ci);
  for (std::size_t i = 0; i < grid.size(); ++i)
    dst[i] = static_cast<float>(grid.values[i]);
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("fnv1a_file: cannot open " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace enspost
