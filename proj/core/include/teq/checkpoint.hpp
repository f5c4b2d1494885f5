#pragma once

#include <filesystem>
#include <memory>

#include "teq/model.hpp"

namespace teq {

/// Single-file binary checkpoint: the model config as embedded JSON plus the
/// weight dictionary keyed by layer path.
void save_checkpoint(const std::filesystem::path& path, const TeqNetwork& network);

/// Rebuilds the network from the embedded config and restores every weight.
/// Throws on unknown names or shape mismatches.
std::unique_ptr<TeqNetwork> load_checkpoint(const std::filesystem::path& path);

} // namespace teq
