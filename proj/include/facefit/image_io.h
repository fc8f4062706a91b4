/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/image_io.h
 *
 * Copyright 2026 The facefit authors
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

#include <string>

#include "facefit/image.h"

namespace facefit {

/// 8-bit PNG (gray or RGB). Values are clamped to [0, 1] and quantized with
/// round-half-up on write, divided by 255 on read.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

/// Lossless float64 grids in NumPy .npy v1.0 format ('<f8', C order,
/// shape (H, W, C)); the byte-exact interchange format for test fixtures.
Image read_npy(const std::string& path);
void write_npy(const std::string& path, const Image& image);

/// Dispatch on the file extension (.png or .npy).
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& image);

} // namespace facefit
