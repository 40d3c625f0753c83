#pragma once

#include <string>

#include "ldp/tensor.hpp"

namespace ldp {

// 8-bit PNG I/O. Images are CHW doubles in [0,1]; writes clamp and round.

Tensor read_png_rgb(const std::string& path);   // {3,H,W}; throws LoadError
Tensor read_png_gray(const std::string& path);  // {1,H,W}; RGB collapses to luminance

void write_png_rgb(const std::string& path, const Tensor& image);
void write_png_gray(const std::string& path, const Tensor& image);

}  // namespace ldp
