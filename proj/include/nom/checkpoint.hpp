#pragma once

// Parameter checkpoints: magic "NOMW", version u32, then per-parameter
// records (name length u32, name, rank u32, extents u32 each, float32
// payload), little-endian. Round-trips are byte-exact.

#include <string>

#include "nom/stack.hpp"

namespace nom {

inline constexpr uint32_t kCheckpointVersion = 1;

void save_stack(const ModelStack& stack, const std::string& path);
ModelStack load_stack(const std::string& path);

// Byte hash of all parameters in visit order (freeze verification).
uint64_t stack_param_hash(const ModelStack& stack);
uint64_t pgn_param_hash(const Pgn& p);

}  // namespace nom
