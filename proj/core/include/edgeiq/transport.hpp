#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace edgeiq {

/// Payload with its origin and per-sender sequence number.
struct Envelope {
  std::vector<std::uint8_t> payload;
  std::uint32_t source = 0;
  std::uint64_t sequence = 0;  // monotonic per sender
};

struct PublishReceipt {
  std::uint64_t sequence = 0;
  std::size_t delivered = 0;  // subscriber count at publish time
};

class TransportStopped : public std::runtime_error {
 public:
  TransportStopped() : std::runtime_error("transport stopped") {}
};

/// Topic-based publish/subscribe bus. Topics match on exact byte equality,
/// deliveries are exactly-once and FIFO per (publisher, topic). No retained
/// messages: a subscriber only sees payloads published after it subscribed.
class Broker {
 public:
  explicit Broker(double latency_ms = 0.0);

  class Subscription {
   public:
    /// Blocks for the next payload. Empty after the broker stops and the
    /// queue drains.
    std::optional<Envelope> receive();
    /// Non-blocking variant; empty when nothing is pending.
    std::optional<Envelope> try_receive();

   private:
    friend class Broker;
    struct State;
    explicit Subscription(std::shared_ptr<State> state);
    std::shared_ptr<State> state_;
  };

  std::shared_ptr<Subscription> subscribe(const std::string& topic);

  /// Delivers to every current subscriber of the topic, byte-identical.
  /// Throws TransportStopped after stop().
  PublishReceipt publish(const std::string& topic,
                         std::span<const std::uint8_t> payload,
                         std::uint32_t source = 0);

  void stop();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

struct ReceivedMessage {
  std::vector<std::uint8_t> payload;
  int source = 0;
};

/// Rank-addressed blocking message passing. Pairwise FIFO between any
/// (source, destination); send blocks only for queue admission, receive
/// blocks until a matching message arrives or the communicator shuts down.
class Communicator {
 public:
  explicit Communicator(int rank_count, double latency_ms = 0.0);
  ~Communicator();

  Communicator(const Communicator&) = delete;
  Communicator& operator=(const Communicator&) = delete;

  int rank_count() const { return rank_count_; }

  /// Blocks until the payload is accepted for delivery.
  void send(int source, int dest, std::span<const std::uint8_t> payload);

  /// Blocks for a message from any source. Empty on shutdown.
  std::optional<ReceivedMessage> recv(int rank);

  /// Blocks for a message from the given source. Empty on shutdown.
  std::optional<ReceivedMessage> recv_from(int rank, int source);

  void shutdown();

 private:
  struct Pending {
    std::vector<std::uint8_t> payload;
    int source;
    std::chrono::steady_clock::time_point ready;
  };
  struct Mailbox {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<Pending> queue;
  };

  void check_rank(int rank, const char* which) const;

  int rank_count_;
  std::chrono::nanoseconds latency_;
  std::vector<std::unique_ptr<Mailbox>> mailboxes_;
  std::atomic<bool> stopped_{false};
};

}  // namespace edgeiq
