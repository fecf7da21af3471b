#pragma once

#include <stdexcept>
#include <string>

namespace patchseg {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on a caller-supplied argument was violated.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// On-disk data is missing a header or the header cannot be parsed.
class FormatError : public Error {
public:
    using Error::Error;
};

/// On-disk payload disagrees with its header.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Tensor shapes are incompatible with a layer or network.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A backbone does not honour the contract required by inference.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A ranking metric was requested on input for which it is undefined
/// (e.g. AP without positives, AUC with a single class).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace patchseg
