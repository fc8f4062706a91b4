/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/scenario.h
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
#include <vector>

#include "facefit/rig.h"
#include "facefit/serialize.h"
#include "facefit/shading.h"

namespace facefit {

/**
 * Procedural example head: an ellipsoid with the standard 68-landmark layout
 * mapped onto its front hemisphere, a hinged jaw with smooth skin weights,
 * the six jaw DOF entries, and four delta blendshapes (smile, pucker, brow
 * raise, cheek puff). Scaled roughly like a human head, in meters.
 */
FaceRig make_example_head();

/// Procedural skin-tone albedo (lip/brow tinting plus low-frequency
/// variation) and a frontal SH light for the given rig.
AppearanceModel make_example_appearance(const FaceRig& rig);

/// Default 256x192 camera at 0.65 m on the face axis, plus a helper to add
/// more viewpoints around the subject.
Camera make_default_camera(const std::string& name = "camA", int width = 256, int height = 192);
Camera make_orbit_camera(const std::string& name, double azimuth_deg, double distance = 0.65,
                         int width = 256, int height = 192);

struct SyntheticScenario
{
    std::string rig = "preset:example_head"; // or a rig file path
    std::string appearance = "preset:skin";  // or an appearance file path
    std::vector<Camera> cameras = {make_default_camera()};
    std::vector<PoseParams> trajectory;
    double noise_sigma = 0.0;
    bool motion_blur = false;
    bool fiducials = true;
    double fiducial_radius = 4.0;
    double fiducial_alpha = 0.95;
    std::uint64_t seed = 1;
    std::string image_format = "npy"; // or "png"

    void validate() const;
};

SyntheticScenario load_scenario(const std::string& path);
void save_scenario(const std::string& path, const SyntheticScenario& scenario);

/**
 * Renders the scenario into `output_dir`: per-frame per-camera images,
 * ground-truth pose files, the rig and appearance actually used, and a
 * sequence manifest referencing all of it. Deterministic for a fixed seed.
 * Returns the written manifest.
 */
SequenceManifest generate_synthetic(const SyntheticScenario& scenario, const std::string& output_dir);

} // namespace facefit
