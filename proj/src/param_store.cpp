#include "fishdip/param_store.hpp"

#include <algorithm>

namespace fishdip {

std::size_t ParamStore::add_segment(std::string name, std::size_t length) {
  if (length == 0) throw contract_error("param segment '" + name + "' has zero length");
  if (has_segment(name)) throw contract_error("duplicate param segment '" + name + "'");
  const std::size_t offset = data.size();
  segments_.push_back({std::move(name), offset, length});
  data.resize(offset + length, 0.0);
  grad.resize(offset + length, 0.0);
  return offset;
}

const ParamStore::Segment& ParamStore::segment(std::string_view name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return s;
  }
  throw contract_error("unknown param segment '" + std::string(name) + "'");
}

bool ParamStore::has_segment(std::string_view name) const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [&](const Segment& s) { return s.name == name; });
}

std::span<double> ParamStore::values(std::string_view name) {
  const Segment& s = segment(name);
  return {data.data() + s.offset, s.length};
}

std::span<const double> ParamStore::values(std::string_view name) const {
  const Segment& s = segment(name);
  return {data.data() + s.offset, s.length};
}

std::span<double> ParamStore::grads(std::string_view name) {
  const Segment& s = segment(name);
  return {grad.data() + s.offset, s.length};
}

std::pair<std::size_t, std::size_t> ParamStore::locate(std::size_t flat) const {
  if (flat >= data.size()) throw contract_error("flat index out of range");
  // Segments are ordered by offset; find the last one starting at or before flat.
  std::size_t lo = 0, hi = segments_.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (segments_[mid].offset <= flat) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {lo, flat - segments_[lo].offset};
}

void ParamStore::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

}  // namespace fishdip
