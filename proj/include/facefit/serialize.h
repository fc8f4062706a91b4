/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/serialize.h
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

#include <optional>
#include <string>
#include <vector>

#include "facefit/pipeline.h"
#include "facefit/rig.h"
#include "facefit/shading.h"

namespace facefit {

inline constexpr const char* kVersion = "0.1.0";

/// JSON file formats. Doubles round-trip bit-exactly (shortest-repr dump),
/// object keys are emitted in sorted order, so re-serialization of equal
/// values is byte-identical.
void save_rig(const std::string& path, const FaceRig& rig);
FaceRig load_rig(const std::string& path);

void save_pose(const std::string& path, const PoseParams& pose);
PoseParams load_pose(const std::string& path);

void save_appearance(const std::string& path, const AppearanceModel& appearance);
AppearanceModel load_appearance(const std::string& path);

/// One frame of a capture manifest; images/bboxes are indexed per camera in
/// manifest camera order. Paths are relative to the manifest directory.
struct FrameRecord
{
    int index = 0;
    std::vector<std::string> images;
    std::vector<std::optional<std::array<double, 4>>> bboxes; // min_x, min_y, max_x, max_y
    std::string ground_truth; // optional pose path
};

struct SequenceManifest
{
    std::string base_dir; // set on load; not serialized
    std::string rig_path;
    std::string appearance_path; // empty when the appearance must be fitted
    int fit_frame = 0;
    std::vector<Camera> cameras;
    std::vector<FrameRecord> frames;

    std::string resolve(const std::string& relative) const;
    void validate() const;
    /// Drops all cameras except the named ones (and their image columns).
    void select_cameras(const std::vector<std::string>& names);
};

SequenceManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const SequenceManifest& manifest);

/// Loads the images of the manifest frames into FrameStates, optionally
/// restricted to [frame_begin, frame_end] by frame index.
std::vector<FrameState> load_frames(const SequenceManifest& manifest, int frame_begin = -1,
                                    int frame_end = -1);

/// Result manifest written next to solver outputs; carries the
/// reproducibility header and per-frame statuses.
struct RunManifest
{
    std::string base_dir; // set on load
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    struct Entry
    {
        int index = 0;
        FrameStatus status = FrameStatus::Unsolved;
        std::string params_path;
    };
    std::vector<Entry> frames;

    std::string resolve(const std::string& relative) const;
};

RunManifest load_run_manifest(const std::string& path);
void save_run_manifest(const std::string& path, const RunManifest& manifest);

SolveConfig load_config(const std::string& path);
void save_config(const std::string& path, const SolveConfig& config);

/// FNV-1a hash of the canonical config serialization, hex-encoded; part of
/// every run's reproducibility header.
std::string config_hash(const SolveConfig& config);

} // namespace facefit
