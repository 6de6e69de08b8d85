// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace codemae::container {

using numcore::DType;
using numcore::Tensor;

// Binary container, magic "CDMF", version u32. Two layouts share the header
// style: a feature file (contiguous row-major [M x D_t] blocks per sample,
// plus a text sidecar mapping sample id -> block offset) and a checkpoint
// (named tensors with shapes). Round trips are bit-exact.

inline constexpr std::uint32_t kVersion = 1;

// ---- teacher feature files ----

struct FeatureFileHeader {
  std::uint64_t sample_count = 0;
  std::uint64_t tokens = 0;   // M
  std::uint64_t width = 0;    // D_t
  bool f32 = true;
};

class FeatureFileWriter {
 public:
  FeatureFileWriter(const std::string& path, std::uint64_t tokens,
                    std::uint64_t width, bool f32 = true);
  ~FeatureFileWriter();
  // rows: M x D_t row-major.
  void append(const std::string& sample_id, const std::vector<double>& rows);
  void finish();  // rewrites the count field and writes the sidecar

 private:
  std::string path_;
  void* file_ = nullptr;
  FeatureFileHeader header_;
  std::map<std::string, std::uint64_t> index_;
  bool finished_ = false;
};

class FeatureFileReader {
 public:
  explicit FeatureFileReader(const std::string& path);
  ~FeatureFileReader();
  const FeatureFileHeader& header() const { return header_; }
  bool contains(const std::string& sample_id) const;
  // Full [M x D_t] block; missing ids raise an ingestion error naming them.
  Tensor read(const std::string& sample_id) const;

 private:
  std::string path_;
  mutable void* file_ = nullptr;
  FeatureFileHeader header_;
  std::map<std::string, std::uint64_t> index_;
};

// ---- named-tensor checkpoints ----

// Text meta header (key: value lines, "---" terminator) then the binary
// tensor table.
void save_checkpoint(const std::string& path,
                     const std::map<std::string, std::string>& meta,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace codemae::container
