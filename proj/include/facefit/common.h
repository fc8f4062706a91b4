/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/common.h
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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace facefit {

/// Base class for all errors raised by the library.
class FaceFitError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the face detector finds no usable foreground. Frames that hit
/// this during a solve are marked failed and handed to the optical-flow
/// infill path.
class DetectionFailed : public FaceFitError
{
public:
    using FaceFitError::FaceFitError;
};

/// Raised on degenerate numeric input (rank-deficient rotation average,
/// degenerate crop boxes, and similar).
class DegenerateInput : public FaceFitError
{
public:
    using FaceFitError::FaceFitError;
};

/// A single sparse cotangent entry on an image: pixel (y, x), channel c.
struct PixelCotangent
{
    int y = 0;
    int x = 0;
    int c = 0;
    double value = 0.0;
};

/// SplitMix64 step; used to derive independent per-frame RNG streams from one
/// user seed so results do not depend on frame processing order.
inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace facefit
