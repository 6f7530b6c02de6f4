#include "fishdip/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace fishdip {

namespace {

using nlohmann::json;

template <typename T>
void append_le(std::string& out, const T* values, std::size_t count) {
  static_assert(sizeof(T) == 8);
  const std::size_t start = out.size();
  out.resize(start + count * 8);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + start, values, count * 8);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, values + i, 8);
      for (int b = 0; b < 8; ++b)
        out[start + i * 8 + static_cast<std::size_t>(b)] =
            static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
}

template <typename T>
std::vector<T> read_le(const std::string& payload, std::size_t offset, std::size_t count) {
  static_assert(sizeof(T) == 8);
  std::vector<T> out(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), payload.data() + offset, count * 8);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b)
        bits = (bits << 8) |
               static_cast<unsigned char>(payload[offset + i * 8 + static_cast<std::size_t>(b)]);
      std::memcpy(&out[i], &bits, 8);
    }
  }
  return out;
}

void write_file(const std::string& path, const json& header, const std::string& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw io_error("short write to '" + path + "'");
}

// Splits the file into the header JSON (first line) and the raw payload.
json read_file(const std::string& path, const std::string& expected_kind,
               std::string& payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t nl = all.find('\n');
  if (nl == std::string::npos) throw parse_error("'" + path + "': missing header line");
  json header;
  try {
    header = json::parse(all.substr(0, nl));
  } catch (const json::exception& e) {
    throw parse_error("'" + path + "': bad header: " + e.what());
  }
  if (header.value("kind", "") != expected_kind)
    throw parse_error("'" + path + "': expected a " + expected_kind + " file");
  payload = all.substr(nl + 1);
  return header;
}

void require_payload(const std::string& path, const std::string& payload,
                     std::size_t expected_bytes) {
  if (payload.size() != expected_bytes)
    throw parse_error("'" + path + "': payload holds " + std::to_string(payload.size()) +
                      " bytes, expected " + std::to_string(expected_bytes));
}

json segment_table(const ParamStore& store) {
  json segs = json::array();
  for (const auto& s : store.segments())
    segs.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
  return segs;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ParamStore& store) {
  json header{{"kind", "checkpoint"}, {"config", config}, {"segments", segment_table(store)}};
  std::string payload;
  append_le(payload, store.data.data(), store.data.size());
  write_file(path, header, payload);
}

ModelConfig load_checkpoint(const std::string& path, std::vector<double>& data,
                            std::vector<ParamStore::Segment>* segments) {
  std::string payload;
  const json header = read_file(path, "checkpoint", payload);
  ModelConfig config;
  std::vector<ParamStore::Segment> segs;
  try {
    config = header.at("config").get<ModelConfig>();
    for (const auto& s : header.at("segments")) {
      ParamStore::Segment seg;
      seg.name = s.at("name").get<std::string>();
      seg.offset = s.at("offset").get<std::size_t>();
      seg.length = s.at("length").get<std::size_t>();
      segs.push_back(std::move(seg));
    }
  } catch (const json::exception& e) {
    throw parse_error("'" + path + "': bad header: " + e.what());
  }
  std::size_t total = 0;
  for (const auto& s : segs) {
    if (s.offset != total)
      throw parse_error("'" + path + "': segment table is not contiguous");
    total += s.length;
  }
  require_payload(path, payload, total * 8);
  data = read_le<double>(payload, 0, total);
  if (segments) *segments = std::move(segs);
  return config;
}

Seq2SeqModel load_model(const std::string& path) {
  std::vector<double> data;
  std::vector<ParamStore::Segment> segs;
  const ModelConfig config = load_checkpoint(path, data, &segs);
  Seq2SeqModel model(config);
  const auto& expected = model.store().segments();
  if (segs.size() != expected.size())
    throw parse_error("'" + path + "': segment table does not match the configured model");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].name != expected[i].name || segs[i].offset != expected[i].offset ||
        segs[i].length != expected[i].length)
      throw parse_error("'" + path + "': segment '" + segs[i].name +
                        "' does not match the configured model");
  }
  if (data.size() != model.store().size())
    throw parse_error("'" + path + "': parameter count does not match the configured model");
  model.store().data = std::move(data);
  return model;
}

void save_fisher(const std::string& path, const FisherScores& scores) {
  json header{{"kind", "fisher"},
              {"length", scores.scores.size()},
              {"n_samples_used", scores.n_samples_used}};
  std::string payload;
  append_le(payload, scores.scores.data(), scores.scores.size());
  write_file(path, header, payload);
}

FisherScores load_fisher(const std::string& path) {
  std::string payload;
  const json header = read_file(path, "fisher", payload);
  FisherScores f;
  std::size_t length = 0;
  try {
    length = header.at("length").get<std::size_t>();
    f.n_samples_used = header.at("n_samples_used").get<int>();
  } catch (const json::exception& e) {
    throw parse_error("'" + path + "': bad header: " + e.what());
  }
  require_payload(path, payload, length * 8);
  f.scores = read_le<double>(payload, 0, length);
  for (const double s : f.scores)
    if (!(s >= 0.0)) throw parse_error("'" + path + "': negative importance score");
  return f;
}

void save_mask(const std::string& path, const SparsityMask& mask) {
  json header{{"kind", "mask"},
              {"n_bits", mask.size()},
              {"k_percent", mask.k_percent()},
              {"popcount", mask.popcount()}};
  std::string payload;
  append_le(payload, mask.words().data(), mask.words().size());
  write_file(path, header, payload);
}

SparsityMask load_mask(const std::string& path) {
  std::string payload;
  const json header = read_file(path, "mask", payload);
  std::size_t n_bits = 0;
  double k_percent = 0.0;
  std::size_t popcount = 0;
  try {
    n_bits = header.at("n_bits").get<std::size_t>();
    k_percent = header.at("k_percent").get<double>();
    popcount = header.at("popcount").get<std::size_t>();
  } catch (const json::exception& e) {
    throw parse_error("'" + path + "': bad header: " + e.what());
  }
  const std::size_t n_words = (n_bits + 63) / 64;
  require_payload(path, payload, n_words * 8);
  SparsityMask mask;
  try {
    mask = SparsityMask::from_words(n_bits, read_le<std::uint64_t>(payload, 0, n_words),
                                    k_percent);
  } catch (const contract_error& e) {
    throw parse_error("'" + path + "': " + e.what());
  }
  if (mask.popcount() != popcount)
    throw parse_error("'" + path + "': header popcount disagrees with the stored bits");
  return mask;
}

}  // namespace fishdip
