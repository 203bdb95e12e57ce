/******************************************************************************
 * Copyright 2026 The dualvo Authors. All Rights Reserved.
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
 *****************************************************************************/
#pragma once

#include <stdexcept>
#include <string>

namespace dualvo {

// Base class for all recoverable errors thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

class NonPositiveInverseDepth : public Error {
 public:
  explicit NonPositiveInverseDepth(const std::string& msg) : Error(msg) {}
};

class AngleNearPi : public Error {
 public:
  explicit AngleNearPi(const std::string& msg) : Error(msg) {}
};

class InsufficientFrames : public Error {
 public:
  explicit InsufficientFrames(const std::string& msg) : Error(msg) {}
};

class DuplicateFrame : public Error {
 public:
  explicit DuplicateFrame(const std::string& msg) : Error(msg) {}
};

class NoValidPixels : public Error {
 public:
  explicit NoValidPixels(const std::string& msg) : Error(msg) {}
};

class NoIncidentEdges : public Error {
 public:
  explicit NoIncidentEdges(const std::string& msg) : Error(msg) {}
};

class SingularSystem : public Error {
 public:
  explicit SingularSystem(const std::string& msg) : Error(msg) {}
};

class Diverged : public Error {
 public:
  explicit Diverged(const std::string& msg) : Error(msg) {}
};

class MissingGroundTruth : public Error {
 public:
  explicit MissingGroundTruth(const std::string& msg) : Error(msg) {}
};

class TooFewCorrespondences : public Error {
 public:
  explicit TooFewCorrespondences(const std::string& msg) : Error(msg) {}
};

class DegenerateConfig : public Error {
 public:
  explicit DegenerateConfig(const std::string& msg) : Error(msg) {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& msg) : Error(msg) {}
};

// Parse failure in a text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace dualvo
