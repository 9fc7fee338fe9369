/**
 * Copyright 2026 The dicyr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
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

namespace dicyr {

/// Precondition violated by a caller (shape mismatch, label out of range, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NetworkSpec could not be instantiated for the requested input shape.
class BuildError : public std::runtime_error {
 public:
  BuildError(std::string network, std::size_t layer_index, const std::string& what)
      : std::runtime_error(network + " layer " + std::to_string(layer_index) + ": " + what),
        network_(std::move(network)),
        layer_index_(layer_index) {}

  const std::string& network() const noexcept { return network_; }
  std::size_t layer_index() const noexcept { return layer_index_; }

 private:
  std::string network_;
  std::size_t layer_index_;
};

/// Dataset files are missing from the cache and cannot be produced locally.
class FetchError : public std::runtime_error {
 public:
  FetchError(const std::string& what, std::string expected_path)
      : std::runtime_error(what + " (expected at " + expected_path + ")"),
        expected_path_(std::move(expected_path)) {}

  const std::string& expected_path() const noexcept { return expected_path_; }

 private:
  std::string expected_path_;
};

/// A loss term evaluated to NaN or infinity during a training step.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::string term, double value)
      : std::runtime_error("non-finite loss term " + term + " = " + std::to_string(value)),
        term_(std::move(term)) {}

  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

/// Checkpoint was produced by a different architecture configuration.
class IncompatibleCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration is malformed; carries the offending key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path + ": " + what), key_path_(std::move(key_path)) {}

  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

}  // namespace dicyr
