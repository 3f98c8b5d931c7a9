#pragma once

#include <stdexcept>
#include <string>

namespace dirlearn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension/shape mismatch; the message names the offending axis.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A stated precondition was violated (non-scalar loss, unnormalized rows, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Batch statistics requested on fewer than two elements per channel.
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

/// Binary container has a bad magic number or an unexpected layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Payload shorter than the header promises, or paired counts disagree.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// A dataset pool cannot supply the requested sample counts.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Factor selection asked for more pool entries than exist.
class PoolExhaustedError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached an optimizer or a training step.
class PoisonedStateError : public Error {
 public:
  using Error::Error;
};

/// Requested an optional component that was not configured.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Retrieval split/metric protocol violation (no true match, pool too small).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unknown configuration field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Conditioning on a zero-probability event.
class UndefinedConditionalError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dirlearn
