#include "edgeiq/frame.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace edgeiq {
namespace {

// Independent IEEE 754 single-precision encoder used as the oracle for the
// measurement bytes. Builds the word from sign, exponent and mantissa
// arithmetic instead of reinterpreting memory.
std::uint32_t ieee754_oracle(double value) {
  if (value == 0.0) return std::signbit(value) ? 0x80000000u : 0u;
  const std::uint32_t sign = value < 0.0 ? 1u : 0u;
  double magnitude = std::abs(value);
  int exponent = 0;
  while (magnitude >= 2.0) {
    magnitude /= 2.0;
    ++exponent;
  }
  while (magnitude < 1.0) {
    magnitude *= 2.0;
    --exponent;
  }
  const auto mantissa = static_cast<std::uint32_t>(
      std::lround((magnitude - 1.0) * 8388608.0));  // 2^23
  return (sign << 31) | (static_cast<std::uint32_t>(exponent + 127) << 23) |
         (mantissa & 0x7FFFFF);
}

// Independent bit-packing oracle: packs the seven fields into one 64-bit
// integer and splits it into bytes.
std::array<std::uint8_t, 6> pack_oracle(const FrameTimestamp& ts) {
  unsigned long long value = 0;
  value = ts.year;
  value = (value << 4) | ts.month;
  value = (value << 5) | ts.day;
  value = (value << 5) | ts.hour;
  value = (value << 6) | ts.minute;
  value = (value << 6) | ts.second;
  value = (value << 10) | ts.millisecond;
  std::array<std::uint8_t, 6> bytes{};
  for (int i = 5; i >= 0; --i) {
    bytes[i] = static_cast<std::uint8_t>(value & 0xFF);
    value >>= 8;
  }
  return bytes;
}

SensorFrame sample_frame() {
  SensorFrame f;
  f.header = {FrameType::sensor_data, 1, 1};
  f.timestamp = {2023, 6, 15, 12, 30, 45, 500};
  f.measurements = {{SensorId::temperature, 27.5f}};
  return f;
}

std::vector<std::uint8_t> read_hex_fixture(const std::string& name) {
  std::ifstream in(std::string(EDGEIQ_FIXTURE_DIR) + "/" + name);
  EXPECT_TRUE(in.is_open()) << name;
  std::vector<std::uint8_t> bytes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::string token;
    while (ls >> token) {
      bytes.push_back(static_cast<std::uint8_t>(std::stoul(token, nullptr, 16)));
    }
  }
  return bytes;
}

FrameTimestamp random_timestamp(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  FrameTimestamp ts;
  ts.year = static_cast<std::uint16_t>(pick(1970, 2100));
  ts.month = static_cast<std::uint8_t>(pick(1, 12));
  ts.day = static_cast<std::uint8_t>(pick(1, 31));
  ts.hour = static_cast<std::uint8_t>(pick(0, 23));
  ts.minute = static_cast<std::uint8_t>(pick(0, 59));
  ts.second = static_cast<std::uint8_t>(pick(0, 59));
  ts.millisecond = static_cast<std::uint16_t>(pick(0, 999));
  return ts;
}

SensorFrame random_frame(std::mt19937_64& rng) {
  SensorFrame f;
  f.header.type = FrameType::sensor_data;
  f.header.node_id = static_cast<std::uint32_t>(rng() & 0xFFFFFF);
  const int count = std::uniform_int_distribution<int>(1, 12)(rng);
  f.header.sensor_count = static_cast<std::uint8_t>(count);
  f.timestamp = random_timestamp(rng);
  std::uniform_real_distribution<float> value(-1000.0f, 1000.0f);
  for (int i = 0; i < count; ++i) {
    f.measurements.push_back(
        {static_cast<SensorId>(rng() % 256), value(rng)});
  }
  return f;
}

TEST(Frame, SingleMeasurementLength) {
  const auto bytes = encode_frame(sample_frame());
  ASSERT_EQ(bytes.size(), 18u);
  EXPECT_EQ(bytes[bytes.size() - 2], 0x0A);
  EXPECT_EQ(bytes[bytes.size() - 1], 0x0D);
}

TEST(Frame, LengthLaw) {
  for (int k = 1; k <= 255; k += 17) {
    SensorFrame f = sample_frame();
    f.header.sensor_count = static_cast<std::uint8_t>(k);
    f.measurements.assign(static_cast<std::size_t>(k),
                          {SensorId::temperature, 1.0f});
    EXPECT_EQ(encode_frame(f).size(), frame_size(static_cast<std::size_t>(k)));
  }
}

TEST(Frame, MeasurementBytesMatchIeee754Oracle) {
  // 1.0 is the trivial anchor, 27.5 the derived one.
  for (const float v : {1.0f, 27.5f, -45.7f, 0.125f, 129.99731f}) {
    SensorFrame f = sample_frame();
    f.measurements[0].value = v;
    const auto bytes = encode_frame(f);
    const std::uint32_t word = (std::uint32_t(bytes[12]) << 24) |
                               (std::uint32_t(bytes[13]) << 16) |
                               (std::uint32_t(bytes[14]) << 8) | bytes[15];
    EXPECT_EQ(word, ieee754_oracle(v)) << v;
  }
  SensorFrame f = sample_frame();
  f.measurements[0].value = 1.0f;
  auto bytes = encode_frame(f);
  EXPECT_EQ(bytes[12], 0x3F);
  EXPECT_EQ(bytes[13], 0x80);
  EXPECT_EQ(bytes[14], 0x00);
  EXPECT_EQ(bytes[15], 0x00);
  f.measurements[0].value = 27.5f;
  bytes = encode_frame(f);
  EXPECT_EQ(bytes[12], 0x41);
  EXPECT_EQ(bytes[13], 0xDC);
  EXPECT_EQ(bytes[14], 0x00);
  EXPECT_EQ(bytes[15], 0x00);
}

TEST(Frame, RoundTripIdentity) {
  const auto f = sample_frame();
  EXPECT_EQ(decode_frame(encode_frame(f)), f);
}

TEST(Frame, RoundTripPropertyThousandFrames) {
  std::mt19937_64 rng(0xF00D);
  for (int i = 0; i < 1000; ++i) {
    const auto f = random_frame(rng);
    const auto bytes = encode_frame(f);
    EXPECT_EQ(bytes.size(), frame_size(f.measurements.size()));
    const auto decoded = decode_frame(bytes);
    ASSERT_EQ(decoded, f) << "frame " << i;
    EXPECT_EQ(encode_frame(decoded), bytes) << "frame " << i;
  }
}

TEST(Frame, TruncatedTailRejected) {
  auto bytes = encode_frame(sample_frame());
  bytes.resize(bytes.size() - 2);
  try {
    decode_frame(bytes);
    FAIL() << "expected a length error";
  } catch (const FrameError& e) {
    EXPECT_EQ(e.code(), FrameErrc::length_mismatch);
  }
}

TEST(Frame, SwappedTailRejected) {
  auto bytes = encode_frame(sample_frame());
  std::swap(bytes[bytes.size() - 1], bytes[bytes.size() - 2]);
  try {
    decode_frame(bytes);
    FAIL() << "expected a tail error";
  } catch (const FrameError& e) {
    EXPECT_EQ(e.code(), FrameErrc::missing_tail);
  }
}

TEST(Frame, UnknownTypeRejected) {
  auto bytes = encode_frame(sample_frame());
  bytes[0] = 7;
  try {
    decode_frame(bytes);
    FAIL() << "expected an unknown-type error";
  } catch (const FrameError& e) {
    EXPECT_EQ(e.code(), FrameErrc::unknown_frame_type);
  }
}

TEST(Frame, CountMismatchRejected) {
  SensorFrame f = sample_frame();
  f.header.sensor_count = 2;
  try {
    encode_frame(f);
    FAIL() << "expected a count error";
  } catch (const FrameError& e) {
    EXPECT_EQ(e.code(), FrameErrc::count_mismatch);
  }
}

TEST(Frame, OutOfRangeTimestampRejectedOnDecode) {
  auto bytes = encode_frame(sample_frame());
  // Zero the packed timestamp: year 0 is below the 1970 floor.
  for (int i = 5; i <= 10; ++i) bytes[static_cast<std::size_t>(i)] = 0;
  try {
    decode_frame(bytes);
    FAIL() << "expected a timestamp error";
  } catch (const FrameError& e) {
    EXPECT_EQ(e.code(), FrameErrc::timestamp_range);
  }
}

TEST(Frame, NodeIdRangeEnforced) {
  SensorFrame f = sample_frame();
  f.header.node_id = 0x1000000;
  EXPECT_THROW(encode_frame(f), FrameError);
}

TEST(Frame, NonFiniteValueRejected) {
  SensorFrame f = sample_frame();
  f.measurements[0].value = std::numeric_limits<float>::quiet_NaN();
  try {
    encode_frame(f);
    FAIL() << "expected a non-finite error";
  } catch (const FrameError& e) {
    EXPECT_EQ(e.code(), FrameErrc::non_finite_value);
  }
}

TEST(Frame, ControlFrameEnvelope) {
  SensorFrame f;
  f.header = {FrameType::control_data, 42, 0};
  f.timestamp = {2023, 1, 1, 0, 0, 0, 0};
  const auto bytes = encode_frame(f);
  EXPECT_EQ(bytes.size(), 13u);
  EXPECT_EQ(decode_frame(bytes), f);
}

TEST(Timestamp, PackMatchesBitOracle) {
  const FrameTimestamp anchors[] = {
      {1970, 1, 1, 0, 0, 0, 0},
      {2100, 12, 31, 23, 59, 59, 999},
      {2023, 6, 15, 12, 30, 45, 500},
  };
  for (const auto& ts : anchors) {
    EXPECT_EQ(pack_timestamp(ts), pack_oracle(ts));
  }
}

TEST(Timestamp, MinimumValuesLeadWithYear) {
  const auto bytes = pack_timestamp({1970, 1, 1, 0, 0, 0, 0});
  const int year = (bytes[0] << 4) | (bytes[1] >> 4);
  EXPECT_EQ(year, 1970);
  EXPECT_EQ(bytes[3], 0x00);
  EXPECT_EQ(bytes[5], 0x00);
}

TEST(Timestamp, RoundTripGrid) {
  std::mt19937_64 rng(0xBEEF);
  for (int i = 0; i < 10000; ++i) {
    const auto ts = random_timestamp(rng);
    const auto packed = pack_timestamp(ts);
    EXPECT_EQ(unpack_timestamp(packed), ts);
    EXPECT_EQ(packed, pack_oracle(ts));
  }
}

TEST(Timestamp, AllZeroBytesOutOfRange) {
  const std::array<std::uint8_t, 6> zeros{};
  try {
    unpack_timestamp(zeros);
    FAIL() << "expected a range error";
  } catch (const FrameError& e) {
    EXPECT_EQ(e.code(), FrameErrc::timestamp_range);
  }
}

TEST(Timestamp, FieldRangeRejected) {
  EXPECT_THROW(pack_timestamp({1969, 1, 1, 0, 0, 0, 0}), FrameError);
  EXPECT_THROW(pack_timestamp({2101, 1, 1, 0, 0, 0, 0}), FrameError);
  EXPECT_THROW(pack_timestamp({2000, 13, 1, 0, 0, 0, 0}), FrameError);
  EXPECT_THROW(pack_timestamp({2000, 1, 1, 24, 0, 0, 0}), FrameError);
  EXPECT_THROW(pack_timestamp({2000, 1, 1, 0, 0, 0, 1000}), FrameError);
}

TEST(Timestamp, IsoRoundTrip) {
  const FrameTimestamp ts{2023, 6, 15, 12, 30, 45, 500};
  EXPECT_EQ(timestamp_to_iso(ts), "2023-06-15T12:30:45.500");
  EXPECT_EQ(timestamp_from_iso("2023-06-15T12:30:45.500"), ts);
  EXPECT_EQ(timestamp_add_seconds(ts, 14.5),
            (FrameTimestamp{2023, 6, 15, 12, 31, 0, 0}));
}

TEST(FrameFixtures, TemperatureFrame) {
  const auto bytes = read_hex_fixture("frame_temperature.hex");
  const auto f = decode_frame(bytes);
  EXPECT_EQ(f.header.type, FrameType::sensor_data);
  EXPECT_EQ(f.header.node_id, 1u);
  EXPECT_EQ(f.header.sensor_count, 1);
  EXPECT_EQ(f.timestamp, (FrameTimestamp{2023, 6, 15, 12, 30, 45, 500}));
  ASSERT_EQ(f.measurements.size(), 1u);
  EXPECT_EQ(f.measurements[0].sensor, SensorId::temperature);
  EXPECT_EQ(f.measurements[0].value, 27.5f);
  EXPECT_EQ(encode_frame(f), bytes);
}

TEST(FrameFixtures, FullSensorComplement) {
  const auto bytes = read_hex_fixture("frame_full.hex");
  const auto f = decode_frame(bytes);
  EXPECT_EQ(f.header.node_id, 2u);
  ASSERT_EQ(f.measurements.size(), 6u);
  EXPECT_EQ(f.timestamp, (FrameTimestamp{1970, 1, 1, 0, 0, 0, 0}));
  EXPECT_EQ(f.measurements[0].value, 25.0f);
  EXPECT_EQ(f.measurements[1].value, 50.0f);
  EXPECT_EQ(f.measurements[2].value, 512.0f);
  EXPECT_EQ(f.measurements[3].value, 600.0f);
  EXPECT_EQ(f.measurements[4].value, 500.0f);
  EXPECT_EQ(f.measurements[5].value, 120.0f);
  EXPECT_EQ(f.measurements[4].sensor, SensorId::current);
  EXPECT_EQ(f.measurements[5].sensor, SensorId::voc);
  EXPECT_EQ(encode_frame(f), bytes);
}

TEST(FrameFixtures, ControlFrame) {
  const auto bytes = read_hex_fixture("frame_control.hex");
  const auto f = decode_frame(bytes);
  EXPECT_EQ(f.header.type, FrameType::control_data);
  EXPECT_EQ(f.header.node_id, 0xABCDEFu);
  EXPECT_TRUE(f.measurements.empty());
  EXPECT_EQ(f.timestamp, (FrameTimestamp{2100, 12, 31, 23, 59, 59, 999}));
  EXPECT_EQ(encode_frame(f), bytes);
}

}  // namespace
}  // namespace edgeiq
