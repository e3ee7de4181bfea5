/*
 * Copyright (c) 2026, dbmtl-lab authors.
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

#include <string>
#include <vector>

#include <json.hpp>

namespace dbmtl {

struct Edge {
  std::string parent;
  std::string child;
  bool operator==(const Edge&) const = default;
};

// Parses "parent->child".
Edge parse_edge(const std::string& text);
std::string to_string(const Edge& edge);

std::vector<Edge> edges_from_json(const nlohmann::json& list);
nlohmann::json edges_to_json(const std::vector<Edge>& edges);

// Labeled DAG over target names. Construction goes through validate(), which
// rejects self-edges, unknown or duplicate endpoints, and cycles (naming a
// cycle witness), so an instance always has a topological order.
class BayesianStructure {
 public:
  BayesianStructure() = default;

  static BayesianStructure validate(std::vector<std::string> targets, std::vector<Edge> edges);

  const std::vector<std::string>& targets() const { return targets_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& topological_order() const { return topo_; }

  bool has_edge(const std::string& parent, const std::string& child) const;
  // Parents in lexicographic name order: wiring derived from this is
  // invariant under reordering of the declared target list.
  std::vector<std::string> parents_of(const std::string& child) const;
  bool empty() const { return edges_.empty(); }

 private:
  std::vector<std::string> targets_;
  std::vector<Edge> edges_;
  std::vector<std::string> topo_;
};

}  // namespace dbmtl
