#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fishdip/errors.hpp"

namespace fishdip {

// All trainable parameters live in one flat double vector made of named,
// contiguous, non-overlapping segments. Flat indices are the coordinate
// system shared by gradients, importance scores and sparsity masks.
class ParamStore {
 public:
  struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
  };

  // Appends a segment and returns its offset. Construction-time API; names
  // must be unique and lengths positive.
  std::size_t add_segment(std::string name, std::size_t length);

  std::size_t size() const { return data.size(); }
  const std::vector<Segment>& segments() const { return segments_; }

  const Segment& segment(std::string_view name) const;
  bool has_segment(std::string_view name) const;

  std::span<double> values(std::string_view name);
  std::span<const double> values(std::string_view name) const;
  std::span<double> grads(std::string_view name);

  // Maps a flat index to (segment index, local offset).
  std::pair<std::size_t, std::size_t> locate(std::size_t flat) const;

  void zero_grad();

  std::vector<double> data;
  std::vector<double> grad;

 private:
  std::vector<Segment> segments_;
};

}  // namespace fishdip
