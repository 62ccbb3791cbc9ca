#pragma once

// Binary checkpoint container for trained flows. The layout is documented in
// docs/checkpoint_format.md.

#include <iosfwd>
#include <map>
#include <string>

#include "flowcast/flow.hpp"

namespace flowcast {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    FlowConfig config;
    /// Free-form run metadata (case, lag, horizon, ...), stored alongside the architecture.
    std::map<std::string, std::string> meta;
    ConditionalFlow flow;
};

/// Output is a pure function of the arguments, so equal weights give equal bytes.
void save_checkpoint(std::ostream& os, const ConditionalFlow& flow, const FlowConfig& config,
                     const std::map<std::string, std::string>& meta = {});
void save_checkpoint(const std::string& path, const ConditionalFlow& flow, const FlowConfig& config,
                     const std::map<std::string, std::string>& meta = {});

/// Throws DataError on a bad magic, unsupported version, truncation, or a
/// tensor whose name or shape does not match the declared architecture.
Checkpoint load_checkpoint(std::istream& is);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace flowcast
