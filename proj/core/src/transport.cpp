#include "edgeiq/transport.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace edgeiq {

using Clock = std::chrono::steady_clock;

namespace {

Clock::time_point delivery_time(double latency_ms) {
  auto now = Clock::now();
  if (latency_ms > 0.0) {
    now += std::chrono::nanoseconds(
        static_cast<std::int64_t>(latency_ms * 1e6));
  }
  return now;
}

}  // namespace

// ---------------------------------------------------------------------------
// Broker

struct Broker::Subscription::State {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::pair<Envelope, Clock::time_point>> queue;
  bool stopped = false;
};

Broker::Subscription::Subscription(std::shared_ptr<State> state)
    : state_(std::move(state)) {}

std::optional<Envelope> Broker::Subscription::receive() {
  std::unique_lock lock(state_->mutex);
  state_->cv.wait(lock,
                  [&] { return !state_->queue.empty() || state_->stopped; });
  if (state_->queue.empty()) return std::nullopt;
  auto [envelope, ready] = std::move(state_->queue.front());
  state_->queue.pop_front();
  lock.unlock();
  if (auto now = Clock::now(); now < ready) {
    std::this_thread::sleep_until(ready);
  }
  return envelope;
}

std::optional<Envelope> Broker::Subscription::try_receive() {
  std::unique_lock lock(state_->mutex);
  if (state_->queue.empty()) return std::nullopt;
  auto [envelope, ready] = std::move(state_->queue.front());
  state_->queue.pop_front();
  lock.unlock();
  if (auto now = Clock::now(); now < ready) {
    std::this_thread::sleep_until(ready);
  }
  return envelope;
}

struct Broker::Impl {
  explicit Impl(double latency) : latency_ms(latency) {}

  double latency_ms;
  std::mutex mutex;
  std::unordered_map<std::string,
                     std::vector<std::shared_ptr<Subscription::State>>>
      topics;
  std::unordered_map<std::uint64_t, std::uint64_t> sequences;  // per sender
  bool stopped = false;
};

Broker::Broker(double latency_ms)
    : impl_(std::make_shared<Impl>(latency_ms)) {}

std::shared_ptr<Broker::Subscription> Broker::subscribe(
    const std::string& topic) {
  std::lock_guard lock(impl_->mutex);
  if (impl_->stopped) throw TransportStopped();
  auto state = std::make_shared<Subscription::State>();
  impl_->topics[topic].push_back(state);
  return std::shared_ptr<Subscription>(new Subscription(state));
}

PublishReceipt Broker::publish(const std::string& topic,
                               std::span<const std::uint8_t> payload,
                               std::uint32_t source) {
  std::lock_guard lock(impl_->mutex);
  if (impl_->stopped) throw TransportStopped();

  Envelope envelope;
  envelope.payload.assign(payload.begin(), payload.end());
  envelope.source = source;
  envelope.sequence = ++impl_->sequences[source];

  PublishReceipt receipt{envelope.sequence, 0};
  auto it = impl_->topics.find(topic);
  if (it == impl_->topics.end()) return receipt;

  const auto ready = delivery_time(impl_->latency_ms);
  for (const auto& sub : it->second) {
    std::lock_guard sub_lock(sub->mutex);
    sub->queue.emplace_back(envelope, ready);
    sub->cv.notify_one();
  }
  receipt.delivered = it->second.size();
  return receipt;
}

void Broker::stop() {
  std::lock_guard lock(impl_->mutex);
  impl_->stopped = true;
  for (auto& [topic, subs] : impl_->topics) {
    for (const auto& sub : subs) {
      std::lock_guard sub_lock(sub->mutex);
      sub->stopped = true;
      sub->cv.notify_all();
    }
  }
}

// ---------------------------------------------------------------------------
// Communicator

Communicator::Communicator(int rank_count, double latency_ms)
    : rank_count_(rank_count),
      latency_(static_cast<std::int64_t>(latency_ms * 1e6)) {
  if (rank_count < 1) {
    throw std::invalid_argument("communicator needs at least one rank");
  }
  mailboxes_.reserve(rank_count);
  for (int i = 0; i < rank_count; ++i) {
    mailboxes_.push_back(std::make_unique<Mailbox>());
  }
}

Communicator::~Communicator() { shutdown(); }

void Communicator::check_rank(int rank, const char* which) const {
  if (rank < 0 || rank >= rank_count_) {
    throw std::invalid_argument(std::string(which) + " rank " +
                                std::to_string(rank) + " outside 0.." +
                                std::to_string(rank_count_ - 1));
  }
}

void Communicator::send(int source, int dest,
                        std::span<const std::uint8_t> payload) {
  check_rank(source, "source");
  check_rank(dest, "destination");
  if (stopped_.load()) throw TransportStopped();

  Pending message;
  message.payload.assign(payload.begin(), payload.end());
  message.source = source;
  message.ready = Clock::now() + latency_;

  auto& box = *mailboxes_[dest];
  {
    std::lock_guard lock(box.mutex);
    box.queue.push_back(std::move(message));
  }
  box.cv.notify_all();
}

std::optional<ReceivedMessage> Communicator::recv(int rank) {
  check_rank(rank, "receiver");
  auto& box = *mailboxes_[rank];
  std::unique_lock lock(box.mutex);
  box.cv.wait(lock, [&] { return !box.queue.empty() || stopped_.load(); });
  if (box.queue.empty()) return std::nullopt;
  Pending message = std::move(box.queue.front());
  box.queue.pop_front();
  lock.unlock();
  if (auto now = Clock::now(); now < message.ready) {
    std::this_thread::sleep_until(message.ready);
  }
  return ReceivedMessage{std::move(message.payload), message.source};
}

std::optional<ReceivedMessage> Communicator::recv_from(int rank, int source) {
  check_rank(rank, "receiver");
  check_rank(source, "source");
  auto& box = *mailboxes_[rank];
  std::unique_lock lock(box.mutex);
  while (true) {
    auto it = std::find_if(box.queue.begin(), box.queue.end(),
                           [&](const Pending& p) { return p.source == source; });
    if (it != box.queue.end()) {
      Pending message = std::move(*it);
      box.queue.erase(it);
      lock.unlock();
      if (auto now = Clock::now(); now < message.ready) {
        std::this_thread::sleep_until(message.ready);
      }
      return ReceivedMessage{std::move(message.payload), message.source};
    }
    if (stopped_.load()) return std::nullopt;
    box.cv.wait(lock);
  }
}

void Communicator::shutdown() {
  stopped_.store(true);
  for (auto& box : mailboxes_) {
    std::lock_guard lock(box->mutex);
    box->cv.notify_all();
  }
}

}  // namespace edgeiq
