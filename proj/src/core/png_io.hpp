// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace codemae::pngio {

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;        // 1 or 3
  std::vector<double> pixels;      // planar [C][H][W], values in [0,1]
};

// 8/16-bit grayscale or RGB PNG; 16-bit scales by 1/65535, 8-bit by 1/255.
Image load_png(const std::string& path);

// Writes 16-bit PNG (grayscale for 1 channel, RGB for 3), clamping to [0,1].
void save_png16(const std::string& path, const Image& img);

}  // namespace codemae::pngio
