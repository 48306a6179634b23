#pragma once

#include <stdexcept>
#include <string>

namespace drbart {

// Error taxonomy. The CLI maps these onto exit codes (usage 2, input 3,
// runtime 4); everything else inherits std::runtime_error.

/// A numeric argument outside the function's domain (x <= 0 for Bessel K,
/// s outside (0,1) for a quantile, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A tree that violates the binary-tree contract.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Bad user-supplied data: unparsable CSV cells, missing columns, degenerate
/// responses, corrupt draw files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Command-line misuse.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation called in a model configuration that does not support it.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace drbart
