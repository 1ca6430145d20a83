#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "addernet/network.hpp"
#include "addernet/optim.hpp"

namespace addernet {

nlohmann::json spec_to_json(const NetworkSpec& spec);
/// Throws std::invalid_argument on missing or malformed fields.
NetworkSpec spec_from_json(const nlohmann::json& j);
NetworkSpec load_spec_file(const std::filesystem::path& path);

/// Binary container:
///   "ADDERNET" | u32 version | u64 header length | JSON header | tensors
/// Tensors are u32 rank, u64 extents, then little-endian IEEE doubles, in
/// layer order (filters; BN gamma, beta, running mean, running variance),
/// followed by optimizer velocities when present.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Network network;
    std::optional<OptimizerState> optimizer;
    nlohmann::json extra;
};

void save_checkpoint(const std::filesystem::path& path, const Network& net, const OptimizerState* optimizer = nullptr,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace addernet
