// Copyright 2026 The FedRoad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDROAD_ERRORS_H_
#define FEDROAD_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fedroad {

// Error taxonomy shared by every module. All derive from std::runtime_error so
// callers that do not care about the kind can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Malformed user-supplied input (empty token lists, missing modalities, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Corrupt or truncated serialized data.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration; the message always names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class FileError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedroad

#endif  // FEDROAD_ERRORS_H_
