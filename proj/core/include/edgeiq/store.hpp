#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <unordered_set>
#include <vector>

#include "edgeiq/frame.hpp"

namespace edgeiq {

struct MeasurementRecord {
  std::uint64_t record_id = 0;
  FrameTimestamp timestamp;
  std::uint32_t node_id = 0;
  SensorId channel = SensorId::temperature;
  double value = 0.0;

  bool operator==(const MeasurementRecord&) const = default;
};

/// Embedded, timestamp-ordered measurement log. One writer and any number
/// of readers are safe per store; inserts are serialized internally, so the
/// shared store of the centralized method may take concurrent writers.
class MeasurementStore {
 public:
  MeasurementStore() = default;

  /// Streams every insert to an append-only text log as well.
  void attach_log(const std::filesystem::path& path);

  /// Stores a record under a fresh record id; returns the id.
  std::uint64_t insert(const FrameTimestamp& ts, std::uint32_t node_id,
                       SensorId channel, double value);

  /// Stores a record with a caller-chosen id. Throws on duplicates.
  void insert(const MeasurementRecord& record);

  /// Matching records in timestamp order (record id breaks ties).
  std::vector<MeasurementRecord> query_range(
      const FrameTimestamp& t0, const FrameTimestamp& t1,
      std::optional<std::uint32_t> node_id = std::nullopt,
      std::optional<SensorId> channel = std::nullopt) const;

  /// The n most recent matching records, oldest first. Returns fewer when
  /// the store is smaller.
  std::vector<MeasurementRecord> latest(
      std::size_t n,
      std::optional<std::uint32_t> node_id = std::nullopt) const;

  std::size_t size() const;

  /// Replays an append-only log produced by attach_log into this store.
  void load(const std::filesystem::path& path);

 private:
  using Key = std::pair<std::int64_t, std::uint64_t>;  // (millis, record_id)

  void insert_locked(const MeasurementRecord& record);

  mutable std::mutex mutex_;
  std::map<Key, MeasurementRecord> records_;
  std::unordered_set<std::uint64_t> ids_;
  std::uint64_t next_id_ = 1;
  std::ofstream log_;
};

void write_record_line(std::ostream& out, const MeasurementRecord& record);
MeasurementRecord parse_record_line(const std::string& line);

}  // namespace edgeiq
