/**
 * Copyright 2026 The dicyr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "dicyr/data.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <ATen/CPUGeneratorImpl.h>
#include <nlohmann/json.hpp>
#include <zlib.h>

#include "dicyr/errors.hpp"

namespace dicyr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RawSource {
  std::string_view name;
  int64_t num_classes;
  int64_t resize_to;  // 0 keeps the staged resolution
};

constexpr std::array<RawSource, 6> kSources = {{
    {"mnist", 10, 0},
    {"usps", 10, 28},
    {"svhn", 10, 0},
    {"shapes3d", 4, 0},
    {"synsigns", 43, 0},
    {"gtsrb", 43, 0},
}};

const RawSource& find_source(std::string_view name, const fs::path& data_dir) {
  for (const auto& s : kSources) {
    if (s.name == name) return s;
  }
  throw FetchError("unknown dataset '" + std::string(name) + "'", (data_dir / "raw" / std::string(name)).string());
}

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FetchError("cannot open file", path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// IDX: two zero bytes, type code (0x08 = unsigned byte), rank, big-endian
// uint32 dims, then the payload.
torch::Tensor read_idx(const fs::path& path) {
  auto bytes = read_file(path);
  if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0 || static_cast<uint8_t>(bytes[2]) != 0x08) {
    throw FetchError("not an unsigned-byte IDX file", path.string());
  }
  const int rank = static_cast<uint8_t>(bytes[3]);
  std::vector<int64_t> dims;
  std::size_t offset = 4;
  int64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    if (offset + 4 > bytes.size()) throw FetchError("truncated IDX header", path.string());
    uint32_t d = 0;
    for (int k = 0; k < 4; ++k) d = (d << 8) | static_cast<uint8_t>(bytes[offset + k]);
    dims.push_back(static_cast<int64_t>(d));
    count *= d;
    offset += 4;
  }
  if (bytes.size() - offset != static_cast<std::size_t>(count)) {
    throw FetchError("IDX payload size does not match its header", path.string());
  }
  auto t = torch::empty(dims, torch::kUInt8);
  std::memcpy(t.data_ptr<uint8_t>(), bytes.data() + offset, static_cast<std::size_t>(count));
  return t;
}

uint32_t tensor_crc(const torch::Tensor& t) {
  auto c = t.contiguous();
  return crc32_bytes(c.data_ptr(), static_cast<std::size_t>(c.nbytes()));
}

struct Processed {
  torch::Tensor images;   // uint8 [N, C, H, W]
  torch::Tensor labels;   // uint8 [N] or undefined
  torch::Tensor factors;  // uint8 [N, F] or undefined
};

void write_blob(std::ofstream& out, const torch::Tensor& t) {
  auto c = t.contiguous();
  out.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(c.nbytes()));
}

Processed build_from_raw(const RawSource& src, std::string_view split, const fs::path& data_dir) {
  const fs::path raw = data_dir / "raw" / std::string(src.name);
  const fs::path images_path = raw / (std::string(split) + "-images.idx");
  if (!fs::exists(images_path)) {
    throw FetchError("dataset " + std::string(src.name) + "/" + std::string(split) +
                         " is not staged; run tools/fetch_datasets.py",
                     images_path.string());
  }
  Processed p;
  auto img = read_idx(images_path);
  if (img.dim() == 3) {
    img = img.unsqueeze(1);  // grayscale [N, 1, H, W]
  } else if (img.dim() == 4 && img.size(3) == 3) {
    img = img.permute({0, 3, 1, 2}).contiguous();
  } else {
    throw FetchError("unsupported image tensor rank in IDX file", images_path.string());
  }
  if (src.resize_to > 0 && (img.size(2) != src.resize_to || img.size(3) != src.resize_to)) {
    auto f = img.to(torch::kFloat32);
    f = torch::nn::functional::interpolate(
        f, torch::nn::functional::InterpolateFuncOptions()
               .size(std::vector<int64_t>{src.resize_to, src.resize_to})
               .mode(torch::kBilinear)
               .align_corners(false));
    img = f.round().clamp(0, 255).to(torch::kUInt8);
  }
  p.images = img.contiguous();

  const fs::path labels_path = raw / (std::string(split) + "-labels.idx");
  if (fs::exists(labels_path)) {
    p.labels = read_idx(labels_path).reshape({-1});
    if (p.labels.size(0) != p.images.size(0)) {
      throw FetchError("label count does not match image count", labels_path.string());
    }
  }
  const fs::path factors_path = raw / (std::string(split) + "-factors.idx");
  if (fs::exists(factors_path)) {
    p.factors = read_idx(factors_path);
    if (p.factors.dim() == 1) p.factors = p.factors.unsqueeze(1);
  }
  return p;
}

void save_processed(const Processed& p, const RawSource& src, std::string_view split, const fs::path& bin,
                    const fs::path& manifest) {
  fs::create_directories(bin.parent_path());
  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    write_blob(out, p.images);
    if (p.labels.defined()) write_blob(out, p.labels);
    if (p.factors.defined()) write_blob(out, p.factors);
  }
  json m;
  m["name"] = src.name;
  m["split"] = split;
  m["count"] = p.images.size(0);
  m["shape"] = {p.images.size(1), p.images.size(2), p.images.size(3)};
  m["num_classes"] = src.num_classes;
  m["has_labels"] = p.labels.defined();
  m["factor_count"] = p.factors.defined() ? p.factors.size(1) : 0;
  m["crc32"] = {{"images", tensor_crc(p.images)},
                {"labels", p.labels.defined() ? tensor_crc(p.labels) : 0},
                {"factors", p.factors.defined() ? tensor_crc(p.factors) : 0}};
  std::ofstream(manifest) << m.dump(2) << "\n";
}

Processed load_processed(const fs::path& bin, const fs::path& manifest) {
  json m;
  try {
    std::ifstream(manifest) >> m;
  } catch (const json::exception& e) {
    throw FetchError(std::string("corrupt dataset manifest: ") + e.what(), manifest.string());
  }
  const int64_t n = m.at("count").get<int64_t>();
  const auto shape = m.at("shape").get<std::vector<int64_t>>();
  const bool has_labels = m.at("has_labels").get<bool>();
  const int64_t nf = m.at("factor_count").get<int64_t>();
  auto bytes = read_file(bin);
  const int64_t img_bytes = n * shape.at(0) * shape.at(1) * shape.at(2);
  const int64_t expected = img_bytes + (has_labels ? n : 0) + n * nf;
  if (static_cast<int64_t>(bytes.size()) != expected) {
    throw FetchError("processed dataset size does not match its manifest", bin.string());
  }
  Processed p;
  auto base = reinterpret_cast<uint8_t*>(bytes.data());
  p.images = torch::from_blob(base, {n, shape[0], shape[1], shape[2]}, torch::kUInt8).clone();
  int64_t off = img_bytes;
  if (has_labels) {
    p.labels = torch::from_blob(base + off, {n}, torch::kUInt8).clone();
    off += n;
  }
  if (nf > 0) {
    p.factors = torch::from_blob(base + off, {n, nf}, torch::kUInt8).clone();
  }
  const auto& crc = m.at("crc32");
  bool ok = tensor_crc(p.images) == crc.at("images").get<uint32_t>();
  if (p.labels.defined()) ok = ok && tensor_crc(p.labels) == crc.at("labels").get<uint32_t>();
  if (p.factors.defined()) ok = ok && tensor_crc(p.factors) == crc.at("factors").get<uint32_t>();
  if (!ok) {
    throw FetchError("checksum mismatch in processed dataset; delete it to rebuild", bin.string());
  }
  return p;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

torch::Generator make_generator(uint64_t seed, uint64_t stream) {
  return at::make_generator<at::CPUGeneratorImpl>(splitmix64(seed ^ splitmix64(stream)));
}

}  // namespace

Dataset Dataset::slice(int64_t begin, int64_t count) const {
  if (begin < 0 || count < 0 || begin + count > size()) {
    throw InvalidArgument("Dataset::slice out of range");
  }
  Dataset out = *this;
  out.images = images.narrow(0, begin, count).clone();
  if (has_labels()) out.labels = labels.narrow(0, begin, count).clone();
  if (has_factors()) out.factors = factors.narrow(0, begin, count).clone();
  return out;
}

Dataset Dataset::select(const torch::Tensor& indices) const {
  Dataset out = *this;
  out.images = images.index_select(0, indices);
  if (has_labels()) out.labels = labels.index_select(0, indices);
  if (has_factors()) out.factors = factors.index_select(0, indices);
  return out;
}

Dataset Dataset::unlabeled() const {
  Dataset out = *this;
  out.labels = torch::Tensor();
  return out;
}

std::vector<std::string> dataset_names() {
  std::vector<std::string> out;
  for (const auto& s : kSources) out.emplace_back(s.name);
  return out;
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("DICYR_DATA"); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return fs::path("data");
}

Dataset load_dataset(std::string_view name, std::string_view split, const fs::path& data_dir) {
  const RawSource& src = find_source(name, data_dir);
  const std::string stem = std::string(name) + "-" + std::string(split);
  const fs::path bin = data_dir / "processed" / (stem + ".bin");
  const fs::path manifest = data_dir / "processed" / (stem + ".json");

  Processed p;
  if (fs::exists(bin) && fs::exists(manifest)) {
    p = load_processed(bin, manifest);
  } else {
    p = build_from_raw(src, split, data_dir);
    save_processed(p, src, split, bin, manifest);
  }

  Dataset ds;
  ds.name = std::string(name);
  ds.split = std::string(split);
  ds.num_classes = src.num_classes;
  auto images = p.images.to(torch::kFloat32).div_(255.0f);
  if (images.size(1) == 1) images = images.expand({-1, 3, -1, -1}).contiguous();
  ds.images = images;
  if (p.labels.defined()) {
    ds.labels = p.labels.to(torch::kInt64);
    if (ds.labels.numel() > 0 && ds.labels.max().item<int64_t>() >= ds.num_classes) {
      throw FetchError("label outside the class range", bin.string());
    }
  }
  if (p.factors.defined()) ds.factors = p.factors.to(torch::kInt64);
  return ds;
}

Dataset filter_classes(const Dataset& ds, const std::vector<int64_t>& classes) {
  if (!ds.has_labels()) {
    throw InvalidArgument("filter_classes needs labels");
  }
  auto keep = torch::zeros({ds.size()}, torch::kBool);
  for (int64_t c : classes) keep |= ds.labels.eq(c);
  return ds.select(keep.nonzero().reshape({-1}));
}

Dataset make_biased_mnist(const Dataset& base, const BiasSpec& spec, uint64_t seed) {
  if (!base.has_labels()) {
    throw InvalidArgument("make_biased_mnist needs labels");
  }
  if (base.size() > 0 && (base.labels.lt(0).any().item<bool>() || base.labels.gt(1).any().item<bool>())) {
    throw InvalidArgument("make_biased_mnist: only labels 0 and 1 are allowed");
  }
  if (!(spec.intensity_low > 0.0 && spec.intensity_low <= spec.intensity_high && spec.intensity_high <= 1.0)) {
    throw InvalidArgument("make_biased_mnist: intensity range must satisfy 0 < low <= high <= 1");
  }
  auto gen = make_generator(seed, 0xB1A5);
  const int64_t n = base.size();
  auto k = torch::empty({n, 1, 1}, torch::kFloat32).uniform_(spec.intensity_low, spec.intensity_high, gen);
  auto gray = base.images.select(1, 0) * k;  // [N, H, W]
  auto yellow = base.labels.eq(1).logical_xor(torch::full({n}, spec.invert, torch::kBool));
  auto yl = yellow.to(torch::kFloat32).view({n, 1, 1});
  Dataset out = base;
  out.name = base.name + (spec.invert ? "-biased-inverted" : "-biased");
  out.images = torch::stack({gray * yl, gray * yl, gray * (1.0f - yl)}, 1).contiguous();
  out.num_classes = 2;
  return out;
}

torch::Tensor seeded_permutation(int64_t n, uint64_t seed, uint64_t stream) {
  auto gen = make_generator(seed, stream);
  return torch::randperm(n, gen, torch::TensorOptions().dtype(torch::kInt64));
}

BatchIterator::BatchIterator(int64_t dataset_size, int64_t batch_size, uint64_t seed, int64_t epoch) {
  if (batch_size < 2) {
    throw InvalidArgument("batch size must be at least 2");
  }
  if (dataset_size < 0) {
    throw InvalidArgument("dataset size must be nonnegative");
  }
  auto perm = seeded_permutation(dataset_size, seed, static_cast<uint64_t>(epoch));
  for (int64_t b = 0; b + batch_size <= dataset_size; b += batch_size) {
    batches_.push_back(perm.narrow(0, b, batch_size));
  }
}

std::pair<torch::Tensor, torch::Tensor> pair_for_cycle(const torch::Tensor& batch) {
  if (!batch.defined() || batch.dim() == 0 || batch.size(0) < 2) {
    throw InvalidArgument("pair_for_cycle needs a batch of at least 2");
  }
  return {batch, batch.roll(-1, 0)};
}

uint32_t crc32_bytes(const void* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = static_cast<const Bytef*>(data);
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    size -= chunk;
  }
  return static_cast<uint32_t>(crc);
}

}  // namespace dicyr
