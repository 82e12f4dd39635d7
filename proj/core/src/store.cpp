#include "edgeiq/store.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace edgeiq {

void MeasurementStore::attach_log(const std::filesystem::path& path) {
  std::lock_guard lock(mutex_);
  log_.open(path, std::ios::app);
  if (!log_) {
    throw std::runtime_error("cannot open store log: " + path.string());
  }
}

std::uint64_t MeasurementStore::insert(const FrameTimestamp& ts,
                                       std::uint32_t node_id, SensorId channel,
                                       double value) {
  std::lock_guard lock(mutex_);
  MeasurementRecord record{next_id_++, ts, node_id, channel, value};
  insert_locked(record);
  return record.record_id;
}

void MeasurementStore::insert(const MeasurementRecord& record) {
  std::lock_guard lock(mutex_);
  if (ids_.contains(record.record_id)) {
    throw std::invalid_argument("duplicate record id " +
                                std::to_string(record.record_id));
  }
  insert_locked(record);
  if (record.record_id >= next_id_) next_id_ = record.record_id + 1;
}

void MeasurementStore::insert_locked(const MeasurementRecord& record) {
  const Key key{timestamp_to_millis(record.timestamp), record.record_id};
  records_.emplace(key, record);
  ids_.insert(record.record_id);
  if (log_.is_open()) {
    write_record_line(log_, record);
    log_.flush();
  }
}

std::vector<MeasurementRecord> MeasurementStore::query_range(
    const FrameTimestamp& t0, const FrameTimestamp& t1,
    std::optional<std::uint32_t> node_id,
    std::optional<SensorId> channel) const {
  const auto lo = timestamp_to_millis(t0);
  const auto hi = timestamp_to_millis(t1);
  if (lo > hi) {
    throw std::invalid_argument("query_range: t0 must not exceed t1");
  }
  std::lock_guard lock(mutex_);
  std::vector<MeasurementRecord> out;
  auto it = records_.lower_bound(Key{lo, 0});
  for (; it != records_.end() && it->first.first <= hi; ++it) {
    const auto& r = it->second;
    if (node_id && r.node_id != *node_id) continue;
    if (channel && r.channel != *channel) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<MeasurementRecord> MeasurementStore::latest(
    std::size_t n, std::optional<std::uint32_t> node_id) const {
  if (n == 0) throw std::invalid_argument("latest: n must be at least 1");
  std::lock_guard lock(mutex_);
  std::vector<MeasurementRecord> out;
  for (auto it = records_.rbegin(); it != records_.rend() && out.size() < n;
       ++it) {
    if (node_id && it->second.node_id != *node_id) continue;
    out.push_back(it->second);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::size_t MeasurementStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

void MeasurementStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open store log: " + path.string());
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    insert(parse_record_line(line));
  }
}

void write_record_line(std::ostream& out, const MeasurementRecord& record) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%llu,%s,%u,%u,%.17g\n",
                static_cast<unsigned long long>(record.record_id),
                timestamp_to_iso(record.timestamp).c_str(), record.node_id,
                static_cast<unsigned>(record.channel), record.value);
  out << buf;
}

MeasurementRecord parse_record_line(const std::string& line) {
  std::istringstream in(line);
  std::string cell;
  std::vector<std::string> cells;
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (cells.size() != 5) {
    throw std::invalid_argument("store record needs 5 fields: " + line);
  }
  MeasurementRecord record;
  record.record_id = std::stoull(cells[0]);
  record.timestamp = timestamp_from_iso(cells[1]);
  record.node_id = static_cast<std::uint32_t>(std::stoul(cells[2]));
  record.channel = static_cast<SensorId>(std::stoul(cells[3]));
  record.value = std::stod(cells[4]);
  return record;
}

}  // namespace edgeiq
