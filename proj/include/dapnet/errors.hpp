// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dapnet {

/// Raised when an input violates a documented invariant or precondition
/// (non-integral counts, degenerate ground truth, empty normalizers, ...).
class InvariantError : public std::invalid_argument {
 public:
  explicit InvariantError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when bounded rejection sampling cannot place a scene.
class PlacementError : public std::runtime_error {
 public:
  explicit PlacementError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dapnet
