/**
 * Copyright 2026 The edgepart Authors
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

#ifndef EDGEPART_ERROR_HPP
#define EDGEPART_ERROR_HPP

#include <stdexcept>
#include <string>

namespace edgepart {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad tensor dimensions or layer configuration.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Structural problems with a model graph (cycles, dangling references).
class GraphError : public Error {
 public:
  using Error::Error;
};

// No assignment satisfies the memory or device constraints.
class PlanError : public Error {
 public:
  using Error::Error;
};

// A worker or transport failed while a cluster was running.
class RuntimeFault : public Error {
 public:
  using Error::Error;
};

}  // namespace edgepart

#endif  // EDGEPART_ERROR_HPP
