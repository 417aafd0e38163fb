#pragma once

// Typed, path-aware access to a JSON config. Every error names the JSON
// pointer of the offending field.

#include <json.hpp>

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

namespace riccati_geo::cli {

/// Dense row-major matrix, the layout the C API expects.
struct Dense {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Dense() = default;
  Dense(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  static Dense identity(std::size_t n, double scale = 1.0);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  const double* ptr() const { return data.data(); }
  double* ptr() { return data.data(); }
};

class Node {
 public:
  Node(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const nlohmann::json& json() const { return *j_; }
  const std::string& path() const { return path_; }
  bool has(const std::string& key) const;
  Node at(const std::string& key) const;
  Node at(std::size_t index) const;
  std::size_t size() const;

  /// Rejects keys outside `known`.
  void allow(std::initializer_list<const char*> known) const;

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  double positive(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  long integer(const std::string& key, std::optional<long> fallback = std::nullopt) const;
  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const;
  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  Dense matrix(const std::string& key) const;

  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  const nlohmann::json& require(const std::string& key) const;
  const nlohmann::json* j_;
  std::string path_;
};

}  // namespace riccati_geo::cli
