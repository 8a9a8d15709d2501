#pragma once

#include <string>

#include "chatty/model.hpp"

namespace chatty {

// Writes the model spec and every parameter matrix to a versioned JSON file.
// Doubles are emitted with shortest round-trip formatting, so load followed
// by save reproduces values exactly.
void save_checkpoint(const ChattyModel& model, const std::string& path);

// Rebuilds a model from a checkpoint file. Throws StateError on an unknown
// format version or missing/ill-shaped parameter entries, ParamError on an
// unreadable file.
ChattyModel load_checkpoint(const std::string& path);

}  // namespace chatty
