#include "spdcsim/timetag.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace spdcsim {

namespace {

constexpr std::uint16_t kFormatVersion = 1;
constexpr char kMagic[4] = {'T', 'T', 'A', 'G'};

void put_u16(std::ofstream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff),
                              static_cast<char>(v >> 8)};
  out.write(b.data(), b.size());
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

[[noreturn]] void parse_fail(const std::filesystem::path& path,
                             std::size_t offset, const std::string& what) {
  throw IoError(path.string() + ": " + what + " at byte offset " +
                std::to_string(offset));
}

}  // namespace

void write_stream(const TimeTagStream& stream,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(kMagic, 4);
  put_u16(out, kFormatVersion);
  put_u16(out, stream.tdc_resolution_ps);
  put_u64(out, stream.records.size());
  for (const auto& r : stream.records) {
    out.put(static_cast<char>(r.channel));
    put_u64(out, r.timestamp_ps);
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

TimeTagStream read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::array<unsigned char, 16> header;
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != 16) {
    parse_fail(path, static_cast<std::size_t>(in.gcount()),
               "truncated header");
  }
  if (std::memcmp(header.data(), kMagic, 4) != 0) {
    parse_fail(path, 0, "bad magic");
  }
  if (get_u16(header.data() + 4) != kFormatVersion) {
    parse_fail(path, 4, "unsupported version");
  }
  TimeTagStream stream;
  stream.tdc_resolution_ps = get_u16(header.data() + 6);
  const std::uint64_t count = get_u64(header.data() + 8);
  stream.records.reserve(count);
  std::array<unsigned char, 9> rec;
  for (std::uint64_t k = 0; k < count; ++k) {
    in.read(reinterpret_cast<char*>(rec.data()), rec.size());
    if (in.gcount() != 9) {
      parse_fail(path, 16 + k * 9 + static_cast<std::size_t>(in.gcount()),
                 "truncated record");
    }
    if (rec[0] > 1) {
      parse_fail(path, 16 + k * 9, "invalid channel");
    }
    stream.records.push_back({rec[0], get_u64(rec.data() + 1)});
  }
  return stream;
}

void write_stream_csv(const TimeTagStream& stream,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << "channel,timestamp_ps\n";
  for (const auto& r : stream.records) {
    out << int(r.channel) << ',' << r.timestamp_ps << '\n';
  }
}

}  // namespace spdcsim
