#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spdcsim/errors.hpp"

namespace spdcsim {

inline constexpr std::uint8_t kSignalChannel = 0;
inline constexpr std::uint8_t kIdlerChannel = 1;

struct TimeTagRecord {
  std::uint8_t channel;       // 0 = signal, 1 = idler
  std::uint64_t timestamp_ps; // multiple of the TDC grid

  bool operator==(const TimeTagRecord&) const = default;
};

// Click records sorted ascending per channel.
struct TimeTagStream {
  std::uint16_t tdc_resolution_ps = 81;
  std::vector<TimeTagRecord> records;

  bool operator==(const TimeTagStream&) const = default;
};

// Binary format: 16-byte header = "TTAG" + version u16 + tdc_resolution_ps
// u16 + record_count u64, little-endian; then 9-byte records of channel u8 +
// timestamp_ps u64.
void write_stream(const TimeTagStream& stream,
                  const std::filesystem::path& path);
TimeTagStream read_stream(const std::filesystem::path& path);

// Debug format: "channel,timestamp_ps" CSV.
void write_stream_csv(const TimeTagStream& stream,
                      const std::filesystem::path& path);

}  // namespace spdcsim
