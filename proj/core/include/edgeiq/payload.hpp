#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgeiq/labeling.hpp"
#include "edgeiq/mlp.hpp"

namespace edgeiq {

/// First byte of every non-frame payload exchanged between nodes.
enum class PayloadKind : std::uint8_t {
  weights = 0x01,   // mlp weight serialization
  test_set = 0x02,  // labeled example records
  control = 0x03,   // small text command
};

std::vector<std::uint8_t> pack_weights(const MlpNetwork& net);
MlpNetwork unpack_weights(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> pack_examples(
    const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> unpack_examples(
    std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> pack_control(const std::string& command);
std::string unpack_control(std::span<const std::uint8_t> payload);

PayloadKind payload_kind(std::span<const std::uint8_t> payload);

}  // namespace edgeiq
