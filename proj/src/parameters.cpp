#include "maxcorr/parameters.hpp"

#include <cmath>

#include "maxcorr/error.hpp"

namespace maxcorr {

Matrix& ParameterStore::add(const std::string& name, Matrix value) {
  if (contains(name)) throw Error("ParameterStore: duplicate parameter '" + name + "'");
  entries_.push_back({name, std::move(value)});
  return entries_.back().value;
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

Matrix& ParameterStore::at(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.value;
  throw Error("ParameterStore: unknown parameter '" + name + "'");
}

const Matrix& ParameterStore::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw Error("ParameterStore: unknown parameter '" + name + "'");
}

ad::Var ParameterStore::bind(ad::Tape& tape, const std::string& name) const {
  return tape.parameter(name, at(name));
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

ad::Var ParamBinder::operator()(const std::string& name) {
  for (const auto& [n, v] : bound_)
    if (n == name) return v;
  ad::Var v = store_.bind(tape_, name);
  bound_.emplace_back(name, v);
  return v;
}

Matrix uniform_fan_in(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(fan_in, fan_out);
  for (double& v : w.flat()) v = dist(rng);
  return w;
}

}  // namespace maxcorr
