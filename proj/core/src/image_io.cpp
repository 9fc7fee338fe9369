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
#include "dicyr/image_io.hpp"

#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "dicyr/errors.hpp"

namespace dicyr {

void write_png(const torch::Tensor& image, const std::filesystem::path& path) {
  if (image.dim() != 3) {
    throw InvalidArgument("write_png expects a rank-3 image");
  }
  torch::Tensor hwc = image.size(0) == 3 ? image.permute({1, 2, 0}) : image;
  if (hwc.size(2) != 3) {
    throw InvalidArgument("write_png expects three channels");
  }
  auto bytes = hwc.detach().to(torch::kFloat32).clamp(0, 1).mul(255.0f).round().to(torch::kUInt8).contiguous();
  const auto height = static_cast<png_uint_32>(bytes.size(0));
  const auto width = static_cast<png_uint_32>(bytes.size(1));

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) {
    throw std::runtime_error("cannot write " + path.string());
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  auto* base = bytes.data_ptr<uint8_t>();
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = base + static_cast<std::size_t>(r) * width * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

torch::Tensor tile_grid(const torch::Tensor& cells, int64_t pad) {
  if (cells.dim() != 5 || cells.size(2) != 3) {
    throw InvalidArgument("tile_grid expects [rows, cols, 3, H, W]");
  }
  const int64_t rows = cells.size(0), cols = cells.size(1), h = cells.size(3), w = cells.size(4);
  auto out = torch::ones({3, rows * (h + pad) - pad, cols * (w + pad) - pad}, cells.options());
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) {
      out.narrow(1, r * (h + pad), h).narrow(2, c * (w + pad), w).copy_(cells[r][c]);
    }
  }
  return out;
}

}  // namespace dicyr
