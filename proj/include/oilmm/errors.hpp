/*
 * Copyright 2026 The OILMM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oilmm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input-side failures: bad arguments, malformed files, violated preconditions.
class InputError : public Error {
public:
    using Error::Error;
};

/// Numerical failures: factorizations that cannot be completed.
class NumericalError : public Error {
public:
    using Error::Error;
};

class ParameterDomainError : public InputError {
public:
    using InputError::InputError;
};

class ContractError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : InputError(what + " (at byte " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }
    /// Message without the offset suffix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::size_t offset_;
};

class ConditioningError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class RankError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TruncationRankError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Fewer observed outputs than latent processes at some time stamp, or a
/// singular observed Gram matrix.
class InsufficientObservabilityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace oilmm
