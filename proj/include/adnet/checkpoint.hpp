#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adnet/model.hpp"

namespace adnet {

// Checkpoint container: magic "ADNW", u32 version, u32 entry count, entry
// table (name, shape, payload offset), u64 payload byte size, little-endian
// f32 payload, trailing CRC32 over everything before it.  Entries cover
// every parameter plus BN running statistics, in topology order.

inline constexpr uint32_t kCheckpointVersion = 1;

uint32_t crc32_ieee(const uint8_t* data, size_t n, uint32_t seed = 0);

void save_checkpoint(const std::string& path, const Network& net);

/// Validates magic, version and checksum, then requires the entry set to
/// match the network's parameters exactly (no missing, extra, duplicate, or
/// reshaped entries) before applying any of them.
void load_checkpoint(const std::string& path, Network& net);

/// Raw entry access for tools that inspect checkpoints without a network.
std::vector<std::pair<std::string, Tensor>> read_checkpoint_entries(const std::string& path);

} // namespace adnet
