// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/container.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace codemae::container {

using numcore::ErrorKind;
using numcore::fail;

namespace {

constexpr char kMagic[4] = {'C', 'D', 'M', 'F'};

void write_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, 4, 1, f); }
void write_u64(std::FILE* f, std::uint64_t v) { std::fwrite(&v, 8, 1, f); }

std::uint32_t read_u32(std::FILE* f) {
  std::uint32_t v = 0;
  if (std::fread(&v, 4, 1, f) != 1) fail(ErrorKind::io, "container: short read");
  return v;
}

std::uint64_t read_u64(std::FILE* f) {
  std::uint64_t v = 0;
  if (std::fread(&v, 8, 1, f) != 1) fail(ErrorKind::io, "container: short read");
  return v;
}

void check_magic(std::FILE* f, const std::string& path) {
  char m[4];
  if (std::fread(m, 1, 4, f) != 4 || std::memcmp(m, kMagic, 4) != 0)
    fail(ErrorKind::io, "not a CDMF container: " + path);
  std::uint32_t ver = read_u32(f);
  if (ver != kVersion)
    fail(ErrorKind::io, "unsupported CDMF version in " + path);
}

void write_values(std::FILE* f, const std::vector<double>& v, bool f32) {
  if (f32) {
    std::vector<float> fv(v.begin(), v.end());
    std::fwrite(fv.data(), 4, fv.size(), f);
  } else {
    std::fwrite(v.data(), 8, v.size(), f);
  }
}

std::vector<double> read_values(std::FILE* f, std::size_t n, bool f32) {
  std::vector<double> out(n);
  if (f32) {
    std::vector<float> fv(n);
    if (std::fread(fv.data(), 4, n, f) != n)
      fail(ErrorKind::io, "container: truncated tensor data");
    for (std::size_t i = 0; i < n; ++i) out[i] = fv[i];
  } else {
    if (std::fread(out.data(), 8, n, f) != n)
      fail(ErrorKind::io, "container: truncated tensor data");
  }
  return out;
}

}  // namespace

// ---- feature files ----

FeatureFileWriter::FeatureFileWriter(const std::string& path,
                                     std::uint64_t tokens, std::uint64_t width,
                                     bool f32)
    : path_(path) {
  header_.tokens = tokens;
  header_.width = width;
  header_.f32 = f32;
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail(ErrorKind::io, "cannot write feature file: " + path);
  file_ = f;
  std::fwrite(kMagic, 1, 4, f);
  write_u32(f, kVersion);
  write_u64(f, 0);  // sample count patched in finish()
  write_u64(f, tokens);
  write_u64(f, width);
  write_u32(f, f32 ? 1 : 0);
}

FeatureFileWriter::~FeatureFileWriter() {
  if (!finished_) finish();
}

void FeatureFileWriter::append(const std::string& sample_id,
                               const std::vector<double>& rows) {
  auto* f = static_cast<std::FILE*>(file_);
  if (!f || finished_) fail(ErrorKind::contract, "feature writer closed");
  if (rows.size() != header_.tokens * header_.width)
    fail(ErrorKind::shape, "feature block size mismatch for " + sample_id);
  if (index_.count(sample_id))
    fail(ErrorKind::contract, "duplicate feature sample id: " + sample_id);
  index_[sample_id] = static_cast<std::uint64_t>(std::ftell(f));
  write_values(f, rows, header_.f32);
  header_.sample_count++;
}

void FeatureFileWriter::finish() {
  auto* f = static_cast<std::FILE*>(file_);
  if (!f) return;
  std::fseek(f, 8, SEEK_SET);
  write_u64(f, header_.sample_count);
  std::fclose(f);
  file_ = nullptr;
  finished_ = true;
  std::ofstream side(path_ + ".idx");
  if (!side) fail(ErrorKind::io, "cannot write feature sidecar");
  for (const auto& [id, off] : index_) side << id << '\t' << off << '\n';
}

FeatureFileReader::FeatureFileReader(const std::string& path) : path_(path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail(ErrorKind::io, "cannot open feature file: " + path);
  file_ = f;
  check_magic(f, path);
  header_.sample_count = read_u64(f);
  header_.tokens = read_u64(f);
  header_.width = read_u64(f);
  header_.f32 = read_u32(f) != 0;

  std::ifstream side(path + ".idx");
  if (!side) fail(ErrorKind::io, "missing feature sidecar: " + path + ".idx");
  std::string id;
  std::uint64_t off;
  while (side >> id >> off) index_[id] = off;
}

FeatureFileReader::~FeatureFileReader() {
  if (file_) std::fclose(static_cast<std::FILE*>(file_));
}

bool FeatureFileReader::contains(const std::string& sample_id) const {
  return index_.count(sample_id) != 0;
}

Tensor FeatureFileReader::read(const std::string& sample_id) const {
  auto it = index_.find(sample_id);
  if (it == index_.end())
    fail(ErrorKind::io, "feature file has no entry for sample " + sample_id);
  auto* f = static_cast<std::FILE*>(file_);
  std::fseek(f, static_cast<long>(it->second), SEEK_SET);
  std::size_t n = header_.tokens * header_.width;
  auto vals = read_values(f, n, header_.f32);
  return Tensor::from_data({header_.tokens, header_.width}, std::move(vals),
                           header_.f32 ? DType::f32 : DType::f64);
}

// ---- checkpoints ----

void save_checkpoint(
    const std::string& path, const std::map<std::string, std::string>& meta,
    const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail(ErrorKind::io, "cannot write checkpoint: " + path);
  for (const auto& [k, v] : meta) {
    std::string line = k + ": " + v + "\n";
    std::fwrite(line.data(), 1, line.size(), f);
  }
  std::fwrite("---\n", 1, 4, f);
  std::fwrite(kMagic, 1, 4, f);
  write_u32(f, kVersion);
  write_u64(f, tensors.size());
  for (const auto& [name, t] : tensors) {
    write_u64(f, name.size());
    std::fwrite(name.data(), 1, name.size(), f);
    write_u32(f, t.dtype() == DType::f32 ? 1 : 0);
    write_u64(f, t.rank());
    for (std::size_t i = 0; i < t.rank(); ++i) write_u64(f, t.dim(i));
    write_values(f, t.data(), t.dtype() == DType::f32);
  }
  std::fclose(f);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail(ErrorKind::io, "cannot open checkpoint: " + path);
  Checkpoint ck;
  // text meta until "---"
  std::string line;
  for (;;) {
    line.clear();
    int c;
    while ((c = std::fgetc(f)) != EOF && c != '\n')
      line.push_back(static_cast<char>(c));
    if (c == EOF) {
      std::fclose(f);
      fail(ErrorKind::io, "checkpoint missing header terminator: " + path);
    }
    if (line == "---") break;
    auto pos = line.find(": ");
    if (pos != std::string::npos)
      ck.meta[line.substr(0, pos)] = line.substr(pos + 2);
  }
  check_magic(f, path);
  std::uint64_t count = read_u64(f);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t name_len = read_u64(f);
    std::string name(name_len, '\0');
    if (std::fread(name.data(), 1, name_len, f) != name_len)
      fail(ErrorKind::io, "checkpoint: truncated name");
    bool f32 = read_u32(f) != 0;
    std::uint64_t rank = read_u64(f);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = read_u64(f);
      n *= d;
    }
    auto vals = read_values(f, n, f32);
    ck.tensors.emplace(name,
                       Tensor::from_data(std::move(shape), std::move(vals),
                                         f32 ? DType::f32 : DType::f64));
  }
  std::fclose(f);
  return ck;
}

}  // namespace codemae::container
