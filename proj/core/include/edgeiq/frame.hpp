#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgeiq {

// Wire format summary (see docs/wire_format.md for the full layout):
//
//   byte 0        frame type (0 sensor data, 1 control data)
//   bytes 1..3    node id, big-endian 24-bit
//   byte 4        number of measurements (0 for control frames)
//   bytes 5..10   packed timestamp, 48 bits MSB-first:
//                 year(12) month(4) day(5) hour(5) minute(6) second(6) ms(10)
//   then per measurement: 1 byte sensor id + 4 bytes IEEE 754 single, big-endian
//   last two bytes: '\n' then '\r'
//
// Total length is 13 + 5*k bytes for k measurements.

enum class FrameType : std::uint8_t {
  sensor_data = 0,
  control_data = 1,
};

/// Sensor channel identifiers carried in the frame data section.
/// Values 4, 5 and 7..9 are reserved; the codec passes unknown ids through.
enum class SensorId : std::uint8_t {
  temperature = 0,
  relative_humidity = 1,
  illuminance = 2,
  co2 = 3,
  current = 6,
  voc = 10,
};

std::string sensor_name(SensorId id);

struct FrameTimestamp {
  std::uint16_t year = 1970;  // 1970..2100
  std::uint8_t month = 1;     // 1..12
  std::uint8_t day = 1;       // 1..31
  std::uint8_t hour = 0;      // 0..23
  std::uint8_t minute = 0;    // 0..59
  std::uint8_t second = 0;    // 0..59
  std::uint16_t millisecond = 0;  // 0..999

  auto operator<=>(const FrameTimestamp&) const = default;
};

struct Measurement {
  SensorId sensor = SensorId::temperature;
  float value = 0.0f;  // serialized as IEEE 754 single precision

  bool operator==(const Measurement&) const = default;
};

struct FrameHeader {
  FrameType type = FrameType::sensor_data;
  std::uint32_t node_id = 0;      // 0..2^24-1
  std::uint8_t sensor_count = 0;  // 1..255 for sensor frames, 0 for control

  bool operator==(const FrameHeader&) const = default;
};

struct SensorFrame {
  FrameHeader header;
  FrameTimestamp timestamp;
  std::vector<Measurement> measurements;

  bool operator==(const SensorFrame&) const = default;
};

/// Encoded size in bytes of a frame carrying `measurement_count` entries.
constexpr std::size_t frame_size(std::size_t measurement_count) {
  return 13 + 5 * measurement_count;
}

enum class FrameErrc {
  field_range,         // a field value is outside its declared range
  count_mismatch,      // sensor_count disagrees with the measurement list
  length_mismatch,     // buffer length disagrees with the declared count
  missing_tail,        // terminating '\n' '\r' absent or reordered
  unknown_frame_type,  // frame type byte is neither 0 nor 1
  timestamp_range,     // a decoded timestamp field is out of range
  non_finite_value,    // measurement value is NaN or infinite
};

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrc errc, const std::string& what)
      : std::runtime_error(what), errc_(errc) {}
  FrameErrc code() const { return errc_; }

 private:
  FrameErrc errc_;
};

/// Serializes a frame. Throws FrameError naming the offending field when any
/// value is out of range or the measurement list disagrees with the header.
std::vector<std::uint8_t> encode_frame(const SensorFrame& frame);

/// Parses a frame from arbitrary bytes. Inverse of encode_frame on every
/// valid frame; malformed input raises FrameError with a distinct code.
SensorFrame decode_frame(std::span<const std::uint8_t> bytes);

/// Packs a timestamp into the 48-bit wire layout (MSB-first).
std::array<std::uint8_t, 6> pack_timestamp(const FrameTimestamp& ts);

/// Unpacks a 48-bit timestamp; field ranges are validated after extraction.
FrameTimestamp unpack_timestamp(std::span<const std::uint8_t> bytes);

// Timestamp arithmetic used by the simulator; the codec itself only checks
// per-field ranges (no calendar validity, e.g. Feb 30 packs fine).
std::int64_t timestamp_to_millis(const FrameTimestamp& ts);
FrameTimestamp timestamp_from_millis(std::int64_t millis);
FrameTimestamp timestamp_add_seconds(const FrameTimestamp& ts, double seconds);
std::string timestamp_to_iso(const FrameTimestamp& ts);
FrameTimestamp timestamp_from_iso(const std::string& text);

}  // namespace edgeiq
