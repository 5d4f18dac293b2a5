#pragma once

#include <filesystem>

#include "hybridet/augment.hpp"

namespace hybridet::tools {

// PNG/JPEG decode and encode for image-mode runs. The library itself only
// ever sees ImageBuffer; these helpers live in the CLI layer.
ImageBuffer load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const ImageBuffer& img);
bool image_io_available();

}  // namespace hybridet::tools
