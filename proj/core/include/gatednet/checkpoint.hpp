#pragma once

#include <string>

#include "gatednet/gates.hpp"

namespace gatednet {

// Binary model checkpoint, format GDNCKPT version 1 (see README for the
// byte-level layout): dims, per-layer W/b, optional connection mask
// (budget + bit array), and per-gate mode/tau/theta/parameters. All floats
// are raw little-endian IEEE-754 doubles, so save -> load round-trips
// bit-exactly.
void save_checkpoint(const GatedMlp& model, const std::string& path);

GatedMlp load_checkpoint(const std::string& path);

}  // namespace gatednet
