#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spectgnn/scene.hpp"

namespace spectgnn {

/// Scene files are line-oriented text: `key=value` header lines
/// (scene_id, t_hist, t_fut, frame_period, optional image and affine),
/// then the column line `agent_id,frame,x,y` and one CSV row per agent
/// per frame. Lines starting with '#' are comments.
///
/// Every agent must cover the same consecutive frames: T_h of them for an
/// inference scene, T_h + T_f when the future is included.
SceneWindow parse_scene(const std::filesystem::path& path, bool load_image = true);
SceneWindow parse_scene_text(const std::string& text, const std::filesystem::path& base_dir = {},
                             bool load_image = true);

/// Writes the scene with 17 significant digits so positions round-trip
/// exactly. When the scene has an image it is written next to the scene
/// file as <stem>.pgm and referenced from the header.
void write_scene(const SceneWindow& scene, const std::filesystem::path& path);
std::string format_scene(const SceneWindow& scene, const std::string& image_ref = {});

/// PGM (P2/P5, 8 or 16 bit) or PNG; colour is reduced by averaging the
/// channels. Intensities are scaled to [0, 1].
Raster read_image(const std::filesystem::path& path);
/// 8-bit binary PGM; values are clamped to [0, 1] and rounded to k/255.
void write_pgm(const Raster& image, const std::filesystem::path& path);

/// Every *.scene file in the directory, ordered by file name.
std::vector<SceneWindow> load_dataset(const std::filesystem::path& dir);
/// Writes scenes as <scene_id>.scene (plus images) into dir.
void save_dataset(const std::vector<SceneWindow>& scenes, const std::filesystem::path& dir);

}  // namespace spectgnn
