#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "maxcorr/autodiff.hpp"
#include "maxcorr/matrix.hpp"

namespace maxcorr {

/// Named trainable matrices in insertion order.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  Matrix& add(const std::string& name, Matrix value);
  bool contains(const std::string& name) const;
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;

  /// Leaf node for `name` on `tape`.
  ad::Var bind(ad::Tape& tape, const std::string& name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value))
        return false;
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

/// Binds store entries to one tape on first use and caches the leaf.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParameterStore& store) : tape_(tape), store_(store) {}

  ad::Var operator()(const std::string& name);
  ad::Tape& tape() noexcept { return tape_; }
  const ParameterStore& store() const noexcept { return store_; }

 private:
  ad::Tape& tape_;
  const ParameterStore& store_;
  std::vector<std::pair<std::string, ad::Var>> bound_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights of shape fan_in x fan_out.
Matrix uniform_fan_in(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace maxcorr
