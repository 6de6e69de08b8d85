// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace codemae::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool scatter = false;
};

// Minimal byte-stable line/scatter chart writer.
void write_chart(const std::string& path, const std::string& title,
                 const std::string& x_label, const std::string& y_label,
                 const std::vector<Series>& series, bool log_y = false);

}  // namespace codemae::svg
