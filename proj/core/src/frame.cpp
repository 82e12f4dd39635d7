#include "edgeiq/frame.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace edgeiq {

namespace {

constexpr std::uint8_t kNewline = 0x0A;
constexpr std::uint8_t kCarriageReturn = 0x0D;

void check_range(bool ok, const char* field, long long value) {
  if (!ok) {
    throw FrameError(FrameErrc::field_range,
                     std::string("frame field out of range: ") + field + "=" +
                         std::to_string(value));
  }
}

void validate_timestamp_fields(const FrameTimestamp& ts, FrameErrc errc) {
  auto fail = [&](const char* field, long long value) {
    throw FrameError(errc, std::string("timestamp field out of range: ") +
                               field + "=" + std::to_string(value));
  };
  if (ts.year < 1970 || ts.year > 2100) fail("year", ts.year);
  if (ts.month < 1 || ts.month > 12) fail("month", ts.month);
  if (ts.day < 1 || ts.day > 31) fail("day", ts.day);
  if (ts.hour > 23) fail("hour", ts.hour);
  if (ts.minute > 59) fail("minute", ts.minute);
  if (ts.second > 59) fail("second", ts.second);
  if (ts.millisecond > 999) fail("millisecond", ts.millisecond);
}

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y += m <= 2;
}

}  // namespace

std::string sensor_name(SensorId id) {
  switch (id) {
    case SensorId::temperature: return "temperature";
    case SensorId::relative_humidity: return "rh";
    case SensorId::illuminance: return "illuminance";
    case SensorId::co2: return "co2";
    case SensorId::current: return "current";
    case SensorId::voc: return "voc";
  }
  return "sensor" + std::to_string(static_cast<int>(id));
}

std::array<std::uint8_t, 6> pack_timestamp(const FrameTimestamp& ts) {
  validate_timestamp_fields(ts, FrameErrc::field_range);
  // year(12) | month(4) | day(5) | hour(5) | minute(6) | second(6) | ms(10)
  std::uint64_t packed = 0;
  packed |= static_cast<std::uint64_t>(ts.year) << 36;
  packed |= static_cast<std::uint64_t>(ts.month) << 32;
  packed |= static_cast<std::uint64_t>(ts.day) << 27;
  packed |= static_cast<std::uint64_t>(ts.hour) << 22;
  packed |= static_cast<std::uint64_t>(ts.minute) << 16;
  packed |= static_cast<std::uint64_t>(ts.second) << 10;
  packed |= static_cast<std::uint64_t>(ts.millisecond);

  std::array<std::uint8_t, 6> out{};
  for (int i = 0; i < 6; ++i) {
    out[i] = static_cast<std::uint8_t>(packed >> (8 * (5 - i)));
  }
  return out;
}

FrameTimestamp unpack_timestamp(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != 6) {
    throw FrameError(FrameErrc::length_mismatch,
                     "packed timestamp must be exactly 6 bytes, got " +
                         std::to_string(bytes.size()));
  }
  std::uint64_t packed = 0;
  for (int i = 0; i < 6; ++i) {
    packed = (packed << 8) | bytes[i];
  }
  FrameTimestamp ts;
  ts.year = static_cast<std::uint16_t>((packed >> 36) & 0xFFF);
  ts.month = static_cast<std::uint8_t>((packed >> 32) & 0xF);
  ts.day = static_cast<std::uint8_t>((packed >> 27) & 0x1F);
  ts.hour = static_cast<std::uint8_t>((packed >> 22) & 0x1F);
  ts.minute = static_cast<std::uint8_t>((packed >> 16) & 0x3F);
  ts.second = static_cast<std::uint8_t>((packed >> 10) & 0x3F);
  ts.millisecond = static_cast<std::uint16_t>(packed & 0x3FF);
  validate_timestamp_fields(ts, FrameErrc::timestamp_range);
  return ts;
}

std::vector<std::uint8_t> encode_frame(const SensorFrame& frame) {
  const auto& h = frame.header;
  if (h.type != FrameType::sensor_data && h.type != FrameType::control_data) {
    throw FrameError(FrameErrc::unknown_frame_type,
                     "unknown frame type " +
                         std::to_string(static_cast<int>(h.type)));
  }
  check_range(h.node_id <= 0xFFFFFF, "node_id", h.node_id);
  if (h.type == FrameType::sensor_data) {
    check_range(h.sensor_count >= 1, "sensor_count", h.sensor_count);
    if (h.sensor_count != frame.measurements.size()) {
      throw FrameError(FrameErrc::count_mismatch,
                       "sensor_count=" + std::to_string(h.sensor_count) +
                           " but frame carries " +
                           std::to_string(frame.measurements.size()) +
                           " measurements");
    }
  } else {
    // Control frames share the envelope but carry no measurements; the
    // count byte is written as zero.
    if (!frame.measurements.empty() || h.sensor_count != 0) {
      throw FrameError(FrameErrc::count_mismatch,
                       "control frames carry no measurements");
    }
  }

  std::vector<std::uint8_t> out;
  out.reserve(frame_size(frame.measurements.size()));
  out.push_back(static_cast<std::uint8_t>(h.type));
  out.push_back(static_cast<std::uint8_t>(h.node_id >> 16));
  out.push_back(static_cast<std::uint8_t>(h.node_id >> 8));
  out.push_back(static_cast<std::uint8_t>(h.node_id));
  out.push_back(h.sensor_count);

  const auto ts = pack_timestamp(frame.timestamp);
  out.insert(out.end(), ts.begin(), ts.end());

  for (const auto& m : frame.measurements) {
    if (!std::isfinite(m.value)) {
      throw FrameError(FrameErrc::non_finite_value,
                       "measurement value for " + sensor_name(m.sensor) +
                           " is not finite");
    }
    out.push_back(static_cast<std::uint8_t>(m.sensor));
    const auto word = std::bit_cast<std::uint32_t>(m.value);
    out.push_back(static_cast<std::uint8_t>(word >> 24));
    out.push_back(static_cast<std::uint8_t>(word >> 16));
    out.push_back(static_cast<std::uint8_t>(word >> 8));
    out.push_back(static_cast<std::uint8_t>(word));
  }

  out.push_back(kNewline);
  out.push_back(kCarriageReturn);
  return out;
}

SensorFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < frame_size(0)) {
    throw FrameError(FrameErrc::length_mismatch,
                     "frame shorter than the 13-byte minimum: " +
                         std::to_string(bytes.size()) + " bytes");
  }

  SensorFrame frame;
  const std::uint8_t type_byte = bytes[0];
  if (type_byte > 1) {
    throw FrameError(FrameErrc::unknown_frame_type,
                     "unknown frame type byte " + std::to_string(type_byte));
  }
  frame.header.type = static_cast<FrameType>(type_byte);
  frame.header.node_id = (static_cast<std::uint32_t>(bytes[1]) << 16) |
                         (static_cast<std::uint32_t>(bytes[2]) << 8) |
                         bytes[3];
  frame.header.sensor_count = bytes[4];

  const std::size_t count = frame.header.type == FrameType::sensor_data
                                ? frame.header.sensor_count
                                : 0;
  if (frame.header.type == FrameType::sensor_data && count == 0) {
    throw FrameError(FrameErrc::field_range,
                     "sensor frame declares zero measurements");
  }
  if (frame.header.type == FrameType::control_data &&
      frame.header.sensor_count != 0) {
    throw FrameError(FrameErrc::count_mismatch,
                     "control frame declares a nonzero sensor count");
  }
  if (bytes.size() != frame_size(count)) {
    throw FrameError(FrameErrc::length_mismatch,
                     "declared " + std::to_string(count) +
                         " measurements imply " +
                         std::to_string(frame_size(count)) + " bytes, got " +
                         std::to_string(bytes.size()));
  }
  if (bytes[bytes.size() - 2] != kNewline ||
      bytes[bytes.size() - 1] != kCarriageReturn) {
    throw FrameError(FrameErrc::missing_tail,
                     "frame tail is not '\\n' '\\r'");
  }

  frame.timestamp = unpack_timestamp(bytes.subspan(5, 6));

  frame.measurements.reserve(count);
  std::size_t offset = 11;
  for (std::size_t i = 0; i < count; ++i) {
    Measurement m;
    m.sensor = static_cast<SensorId>(bytes[offset]);
    std::uint32_t word = (static_cast<std::uint32_t>(bytes[offset + 1]) << 24) |
                         (static_cast<std::uint32_t>(bytes[offset + 2]) << 16) |
                         (static_cast<std::uint32_t>(bytes[offset + 3]) << 8) |
                         bytes[offset + 4];
    m.value = std::bit_cast<float>(word);
    frame.measurements.push_back(m);
    offset += 5;
  }
  return frame;
}

std::int64_t timestamp_to_millis(const FrameTimestamp& ts) {
  const std::int64_t days = days_from_civil(ts.year, ts.month, ts.day);
  return ((days * 24 + ts.hour) * 60 + ts.minute) * 60000 + ts.second * 1000 +
         ts.millisecond;
}

FrameTimestamp timestamp_from_millis(std::int64_t millis) {
  std::int64_t days = millis / 86400000;
  std::int64_t rem = millis % 86400000;
  if (rem < 0) {
    rem += 86400000;
    --days;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  FrameTimestamp ts;
  ts.year = static_cast<std::uint16_t>(y);
  ts.month = static_cast<std::uint8_t>(m);
  ts.day = static_cast<std::uint8_t>(d);
  ts.hour = static_cast<std::uint8_t>(rem / 3600000);
  rem %= 3600000;
  ts.minute = static_cast<std::uint8_t>(rem / 60000);
  rem %= 60000;
  ts.second = static_cast<std::uint8_t>(rem / 1000);
  ts.millisecond = static_cast<std::uint16_t>(rem % 1000);
  return ts;
}

FrameTimestamp timestamp_add_seconds(const FrameTimestamp& ts, double seconds) {
  const auto base = timestamp_to_millis(ts);
  const auto delta = static_cast<std::int64_t>(std::llround(seconds * 1000.0));
  return timestamp_from_millis(base + delta);
}

std::string timestamp_to_iso(const FrameTimestamp& ts) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04u-%02u-%02uT%02u:%02u:%02u.%03u",
                ts.year, ts.month, ts.day, ts.hour, ts.minute, ts.second,
                ts.millisecond);
  return buf;
}

FrameTimestamp timestamp_from_iso(const std::string& text) {
  unsigned y, mo, d, h, mi, s, ms;
  if (std::sscanf(text.c_str(), "%4u-%2u-%2uT%2u:%2u:%2u.%3u", &y, &mo, &d, &h,
                  &mi, &s, &ms) != 7) {
    throw FrameError(FrameErrc::field_range,
                     "unparseable ISO-8601 timestamp: " + text);
  }
  FrameTimestamp ts;
  ts.year = static_cast<std::uint16_t>(y);
  ts.month = static_cast<std::uint8_t>(mo);
  ts.day = static_cast<std::uint8_t>(d);
  ts.hour = static_cast<std::uint8_t>(h);
  ts.minute = static_cast<std::uint8_t>(mi);
  ts.second = static_cast<std::uint8_t>(s);
  ts.millisecond = static_cast<std::uint16_t>(ms);
  validate_timestamp_fields(ts, FrameErrc::field_range);
  return ts;
}

}  // namespace edgeiq
