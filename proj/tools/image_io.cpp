#include "image_io.hpp"

#include "hybridet/error.hpp"

#ifdef HYBRIDET_HAVE_OPENCV
#include <opencv2/imgcodecs.hpp>
#endif

namespace hybridet::tools {

#ifdef HYBRIDET_HAVE_OPENCV

ImageBuffer load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw ConfigError("cannot decode image: " + path.string());
  ImageBuffer img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = row[x][2] / 255.0;
      img.at(y, x, 1) = row[x][1] / 255.0;
      img.at(y, x, 2) = row[x][0] / 255.0;
    }
  }
  return img;
}

void save_png(const std::filesystem::path& path, const ImageBuffer& img) {
  cv::Mat bgr(img.h, img.w, CV_8UC3);
  for (int y = 0; y < img.h; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
        row[x][2 - c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  if (!cv::imwrite(path.string(), bgr))
    throw Error("cannot write image: " + path.string());
}

bool image_io_available() { return true; }

#else

ImageBuffer load_image(const std::filesystem::path&) {
  throw Error("built without image support; rebuild with OpenCV to use image mode");
}

void save_png(const std::filesystem::path&, const ImageBuffer&) {
  throw Error("built without image support; rebuild with OpenCV to use image mode");
}

bool image_io_available() { return false; }

#endif

}  // namespace hybridet::tools
