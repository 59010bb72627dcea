#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nbrescore::nnet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ParamId {
  std::size_t index = 0;
  bool operator==(const ParamId&) const = default;
};

/// Named, ordered collection of learnable tensors.
///
/// Insertion order is the canonical order used by checkpoints and the
/// optimizer. Each tensor carries a trainable flag; frozen tensors receive
/// no gradient and no update.
class ParameterSet {
 public:
  ParamId add(std::string name, Matrix value) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter " + name);
    const ParamId id{entries_.size()};
    index_.emplace(name, id.index);
    entries_.push_back({std::move(name), std::move(value), true});
    return id;
  }

  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  std::optional<ParamId> find(std::string_view name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return ParamId{it->second};
  }

  ParamId id(std::string_view name) const {
    if (auto p = find(name)) return *p;
    throw std::out_of_range("unknown parameter " + std::string(name));
  }

  const std::string& name(ParamId p) const { return entries_.at(p.index).name; }
  const Matrix& value(ParamId p) const { return entries_[p.index].value; }
  Matrix& value(ParamId p) { return entries_[p.index].value; }
  bool trainable(ParamId p) const { return entries_[p.index].trainable; }
  void set_trainable(ParamId p, bool on) { entries_.at(p.index).trainable = on; }

  void set_all_trainable(bool on) {
    for (auto& e : entries_) e.trainable = on;
  }

 private:
  struct Entry {
    std::string name;
    Matrix value;
    bool trainable;
  };
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Gradient buffers shaped like a ParameterSet. Untouched buffers stay
// empty (size 0) and count as zero, which keeps per-utterance buffers cheap.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParameterSet& params) : grads_(params.size()) {
    shapes_.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& v = params.value(ParamId{i});
      shapes_.emplace_back(v.rows(), v.cols());
    }
  }

  std::size_t size() const { return grads_.size(); }

  bool touched(ParamId p) const { return grads_[p.index].size() != 0; }

  // Zero-initialized on first access.
  Matrix& at(ParamId p) {
    auto& g = grads_.at(p.index);
    if (g.size() == 0) g = Matrix::Zero(shapes_[p.index].first, shapes_[p.index].second);
    return g;
  }

  // Dense view; zeros when untouched.
  Matrix dense(ParamId p) const {
    if (touched(p)) return grads_[p.index];
    return Matrix::Zero(shapes_[p.index].first, shapes_[p.index].second);
  }

  void clear() {
    for (auto& g : grads_) g.resize(0, 0);
  }

  void add(const GradientSet& other) {
    for (std::size_t i = 0; i < grads_.size(); ++i) {
      if (other.grads_[i].size() == 0) continue;
      at(ParamId{i}) += other.grads_[i];
    }
  }

 private:
  std::vector<Matrix> grads_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes_;
};

}  // namespace nbrescore::nnet
