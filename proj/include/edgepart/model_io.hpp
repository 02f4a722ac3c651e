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

#ifndef EDGEPART_MODEL_IO_HPP
#define EDGEPART_MODEL_IO_HPP

#include <string>

#include "json.hpp"
#include "edgepart/model_ir.hpp"

namespace edgepart {

// Model document: {"name", "seed", "inputs", "outputs", "layers": [...]}.
// Layers keep declaration order, so equal graphs serialize identically.
nlohmann::json model_to_json(const ModelGraph& graph);
ModelGraph model_from_json(const nlohmann::json& doc);

ModelGraph load_model_file(const std::string& path);
void save_model_file(const ModelGraph& graph, const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& doc, const std::string& path);

}  // namespace edgepart

#endif  // EDGEPART_MODEL_IO_HPP
