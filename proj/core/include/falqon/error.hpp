// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace falqon {

class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class ShapeError : public Error {
 public:
    using Error::Error;
};

// A value outside an operation's documented domain (rank, k, scale, ...).
class DomainError : public Error {
 public:
    using Error::Error;
};

// NaN/inf where finite data is required, or a diverged loss.
class NumericalError : public Error {
 public:
    using Error::Error;
};

// Violated call ordering, e.g. backward without forward.
class StateError : public Error {
 public:
    using Error::Error;
};

class ConfigError : public Error {
 public:
    using Error::Error;
};

// Malformed or incompatible checkpoint/CSV payload.
class FormatError : public Error {
 public:
    using Error::Error;
};

}  // namespace falqon
