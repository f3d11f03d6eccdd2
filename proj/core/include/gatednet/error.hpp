#pragma once

#include <stdexcept>
#include <string>

namespace gatednet {

// Shape disagreement between operands. Message names both shapes.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside its documented domain (label out of range, tau <= 0, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API used against its contract (gate absent, trace/mode mismatch, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed input file; message carries the byte offset where parsing failed.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad run configuration; maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failure on output; maps to CLI exit code 4.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gatednet
