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

#include "dbmtl/structure.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "dbmtl/errors.hpp"

namespace dbmtl {

Edge parse_edge(const std::string& text) {
  const auto pos = text.find("->");
  if (pos == std::string::npos || pos == 0 || pos + 2 >= text.size()) {
    throw ConfigError("malformed edge \"" + text + "\", expected \"parent->child\"");
  }
  return Edge{text.substr(0, pos), text.substr(pos + 2)};
}

std::string to_string(const Edge& edge) { return edge.parent + "->" + edge.child; }

std::vector<Edge> edges_from_json(const nlohmann::json& list) {
  std::vector<Edge> out;
  for (const auto& item : list) out.push_back(parse_edge(item.get<std::string>()));
  return out;
}

nlohmann::json edges_to_json(const std::vector<Edge>& edges) {
  nlohmann::json out = nlohmann::json::array();
  for (const Edge& e : edges) out.push_back(to_string(e));
  return out;
}

namespace {

// Depth-first walk that returns the node sequence of the first cycle found.
std::vector<std::string> find_cycle(const std::vector<std::string>& targets,
                                    const std::map<std::string, std::vector<std::string>>& children) {
  std::map<std::string, int> color;  // 0 white, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::vector<std::string> witness;

  std::function<bool(const std::string&)> visit = [&](const std::string& u) {
    color[u] = 1;
    stack.push_back(u);
    auto it = children.find(u);
    if (it != children.end()) {
      for (const std::string& v : it->second) {
        if (color[v] == 1) {
          auto from = std::find(stack.begin(), stack.end(), v);
          witness.assign(from, stack.end());
          return true;
        }
        if (color[v] == 0 && visit(v)) return true;
      }
    }
    stack.pop_back();
    color[u] = 2;
    return false;
  };

  for (const std::string& t : targets) {
    if (color[t] == 0 && visit(t)) return witness;
  }
  return {};
}

}  // namespace

BayesianStructure BayesianStructure::validate(std::vector<std::string> targets,
                                              std::vector<Edge> edges) {
  std::set<std::string> declared(targets.begin(), targets.end());
  if (declared.size() != targets.size()) throw StructureError("duplicate target names");

  std::map<std::string, std::vector<std::string>> children;
  std::set<std::pair<std::string, std::string>> seen;
  for (const Edge& e : edges) {
    if (!declared.count(e.parent)) throw StructureError("unknown target \"" + e.parent + "\"");
    if (!declared.count(e.child)) throw StructureError("unknown target \"" + e.child + "\"");
    if (e.parent == e.child) throw StructureError("self edge on \"" + e.parent + "\"");
    if (!seen.insert({e.parent, e.child}).second) {
      throw StructureError("duplicate edge " + to_string(e));
    }
    children[e.parent].push_back(e.child);
  }

  const auto cycle = find_cycle(targets, children);
  if (!cycle.empty()) {
    std::ostringstream msg;
    msg << "cycle detected: ";
    for (const std::string& t : cycle) msg << t << " -> ";
    msg << cycle.front();
    throw StructureError(msg.str());
  }

  BayesianStructure s;
  s.targets_ = std::move(targets);
  s.edges_ = std::move(edges);

  // Kahn's order with ties broken by declaration position.
  std::map<std::string, int> indegree;
  for (const std::string& t : s.targets_) indegree[t] = 0;
  for (const Edge& e : s.edges_) ++indegree[e.child];
  std::vector<std::string> pending = s.targets_;
  while (!pending.empty()) {
    auto ready = std::find_if(pending.begin(), pending.end(),
                              [&](const std::string& t) { return indegree[t] == 0; });
    s.topo_.push_back(*ready);
    for (const Edge& e : s.edges_) {
      if (e.parent == *ready) --indegree[e.child];
    }
    pending.erase(ready);
  }
  return s;
}

bool BayesianStructure::has_edge(const std::string& parent, const std::string& child) const {
  return std::any_of(edges_.begin(), edges_.end(),
                     [&](const Edge& e) { return e.parent == parent && e.child == child; });
}

std::vector<std::string> BayesianStructure::parents_of(const std::string& child) const {
  std::vector<std::string> out;
  for (const Edge& e : edges_) {
    if (e.child == child) out.push_back(e.parent);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dbmtl
