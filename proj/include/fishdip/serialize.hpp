#pragma once

#include <string>
#include <vector>

#include "fishdip/masking.hpp"
#include "fishdip/model.hpp"
#include "fishdip/param_store.hpp"

namespace fishdip {

// On-disk format shared by checkpoints, importance scores, and masks: one
// JSON header line (terminated by '\n') followed by a raw little-endian
// binary payload. Checkpoints and scores store 64-bit floats in flat
// segment order; masks store their packed 64-bit words.
//
// Filesystem failures raise io_error; malformed or truncated content raises
// parse_error.

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ParamStore& store);

// Reads the flat parameter vector and the config; optionally exposes the
// segment table from the header.
ModelConfig load_checkpoint(const std::string& path, std::vector<double>& data,
                            std::vector<ParamStore::Segment>* segments = nullptr);

// Rebuilds a model from a checkpoint: constructs it from the stored config,
// verifies the segment table matches, and installs the stored parameters.
Seq2SeqModel load_model(const std::string& path);

void save_fisher(const std::string& path, const FisherScores& scores);
FisherScores load_fisher(const std::string& path);

void save_mask(const std::string& path, const SparsityMask& mask);
SparsityMask load_mask(const std::string& path);

}  // namespace fishdip
