#include "config.hpp"

#include "commands.hpp"

#include <cmath>
#include <set>

namespace riccati_geo::cli {

Dense Dense::identity(std::size_t n, double scale) {
  Dense d(n, n);
  for (std::size_t i = 0; i < n; ++i) d(i, i) = scale;
  return d;
}

void Node::fail(const std::string& key, const std::string& message) const {
  const std::string where = key.empty() ? (path_.empty() ? "/" : path_) : path_ + "/" + key;
  throw ConfigError(where + ": " + message);
}

bool Node::has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

const nlohmann::json& Node::require(const std::string& key) const {
  if (!j_->is_object()) fail("", "expected an object");
  auto it = j_->find(key);
  if (it == j_->end()) fail(key, "missing required field");
  return *it;
}

Node Node::at(const std::string& key) const { return Node(require(key), path_ + "/" + key); }

Node Node::at(std::size_t index) const {
  if (!j_->is_array() || index >= j_->size()) fail("", "index out of range");
  return Node((*j_)[index], path_ + "/" + std::to_string(index));
}

std::size_t Node::size() const {
  if (!j_->is_array()) fail("", "expected an array");
  return j_->size();
}

void Node::allow(std::initializer_list<const char*> known) const {
  if (!j_->is_object()) fail("", "expected an object");
  const std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, value] : j_->items()) {
    if (!names.count(key)) fail(key, "unknown field");
  }
}

double Node::number(const std::string& key, std::optional<double> fallback) const {
  if (!has(key)) {
    if (fallback) return *fallback;
    require(key);
  }
  const auto& v = require(key);
  if (!v.is_number()) fail(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(key, "expected a finite number");
  return d;
}

double Node::positive(const std::string& key, std::optional<double> fallback) const {
  const double d = number(key, fallback);
  if (!(d > 0.0)) fail(key, "expected a positive number");
  return d;
}

long Node::integer(const std::string& key, std::optional<long> fallback) const {
  if (!has(key)) {
    if (fallback) return *fallback;
    require(key);
  }
  const auto& v = require(key);
  if (!v.is_number_integer()) fail(key, "expected an integer");
  return v.get<long>();
}

std::uint64_t Node::seed(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const auto& v = require(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    fail(key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string Node::string(const std::string& key, std::optional<std::string> fallback) const {
  if (!has(key)) {
    if (fallback) return *fallback;
    require(key);
  }
  const auto& v = require(key);
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

bool Node::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = require(key);
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::vector<double> Node::numbers(const std::string& key) const {
  const auto& v = require(key);
  if (!v.is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(key, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Dense Node::matrix(const std::string& key) const {
  const auto& v = require(key);
  if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of rows");
  Dense m;
  m.rows = v.size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& row = v[i];
    if (!row.is_array()) fail(key, "row " + std::to_string(i) + " is not an array");
    if (i == 0) m.cols = row.size();
    if (row.size() != m.cols || m.cols == 0) fail(key, "rows have inconsistent lengths");
    for (const auto& e : row) {
      if (!e.is_number()) fail(key, "entries must be numbers");
      m.data.push_back(e.get<double>());
    }
  }
  return m;
}

}  // namespace riccati_geo::cli
