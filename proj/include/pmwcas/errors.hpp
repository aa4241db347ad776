/*
 * Copyright 2026 The pmwcas Authors
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

#include <stdexcept>
#include <string>

namespace pmwcas {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A word index or descriptor slot outside the heap.
class AddressError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (busy slot, tagged payload, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// read-word waited longer than its configured bound.
class TimeoutError : public Error {
 public:
  using Error::Error;
};

class RecoveryError : public Error {
 public:
  using Error::Error;
};

/// Operation only meaningful on another backend (e.g. crash on real memory).
class UnsupportedBackend : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Model-checking harness failures that are not algorithm violations.
class HarnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace pmwcas
