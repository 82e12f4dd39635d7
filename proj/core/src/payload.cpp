#include "edgeiq/payload.hpp"

#include <sstream>
#include <stdexcept>

namespace edgeiq {

namespace {

std::vector<std::uint8_t> pack(PayloadKind kind, const std::string& body) {
  std::vector<std::uint8_t> out;
  out.reserve(body.size() + 1);
  out.push_back(static_cast<std::uint8_t>(kind));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::string unpack(PayloadKind expected, std::span<const std::uint8_t> payload) {
  if (payload_kind(payload) != expected) {
    throw std::invalid_argument("unexpected payload kind tag");
  }
  return std::string(payload.begin() + 1, payload.end());
}

}  // namespace

PayloadKind payload_kind(std::span<const std::uint8_t> payload) {
  if (payload.empty()) throw std::invalid_argument("empty payload");
  const auto tag = payload.front();
  if (tag < 0x01 || tag > 0x03) {
    throw std::invalid_argument("unknown payload kind tag " +
                                std::to_string(tag));
  }
  return static_cast<PayloadKind>(tag);
}

std::vector<std::uint8_t> pack_weights(const MlpNetwork& net) {
  return pack(PayloadKind::weights, serialize_weights(net));
}

MlpNetwork unpack_weights(std::span<const std::uint8_t> payload) {
  return parse_weights(unpack(PayloadKind::weights, payload));
}

std::vector<std::uint8_t> pack_examples(
    const std::vector<LabeledExample>& examples) {
  std::ostringstream out;
  write_examples_csv(out, examples);
  return pack(PayloadKind::test_set, out.str());
}

std::vector<LabeledExample> unpack_examples(
    std::span<const std::uint8_t> payload) {
  std::istringstream in(unpack(PayloadKind::test_set, payload));
  return read_examples_csv(in);
}

std::vector<std::uint8_t> pack_control(const std::string& command) {
  return pack(PayloadKind::control, command);
}

std::string unpack_control(std::span<const std::uint8_t> payload) {
  return unpack(PayloadKind::control, payload);
}

}  // namespace edgeiq
