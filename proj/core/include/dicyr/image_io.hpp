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
#pragma once

#include <filesystem>

#include <torch/torch.h>

namespace dicyr {

/// Writes a [3, H, W] or [H, W, 3] float image in [0,1] as an 8-bit RGB PNG.
void write_png(const torch::Tensor& image, const std::filesystem::path& path);

/// Tiles a [rows, cols, 3, H, W] batch into one [3, rows*(H+pad)-pad, ...]
/// image with `pad` pixels of white between cells.
torch::Tensor tile_grid(const torch::Tensor& cells, int64_t pad = 2);

}  // namespace dicyr
