// The only translation unit that touches OpenCV; it is used for PNG/TIFF
// decoding and encoding.
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>
#include <string>

#include "alsf/data.hpp"

namespace alsf::data {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

bool supported(const std::string& ext) {
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

cv::Mat read_raw(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  }
  if (!supported(lower_extension(path))) {
    throw Error(ErrorCode::kUnsupportedFormat, path.string() + " is not PNG or TIFF");
  }
  cv::Mat raw;
  try {
    raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kCorruptImage, path.string() + ": " + e.what());
  }
  if (raw.empty()) throw Error(ErrorCode::kCorruptImage, "cannot decode " + path.string());
  if (raw.depth() != CV_8U && raw.depth() != CV_16U) {
    throw Error(ErrorCode::kUnsupportedFormat, path.string() + " is not 8- or 16-bit");
  }
  return raw;
}

void write_atomic(const cv::Mat& m, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp" + path.extension().string();
  bool ok = false;
  try {
    ok = cv::imwrite(tmp.string(), m);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kIoError, path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  std::filesystem::rename(tmp, path);
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  const cv::Mat raw = read_raw(path);
  const double scale = raw.depth() == CV_8U ? 255.0 : 65535.0;
  const int src_ch = raw.channels();
  if (src_ch != 1 && src_ch != 3 && src_ch != 4) {
    throw Error(ErrorCode::kUnsupportedFormat, path.string() + " has " +
                                                   std::to_string(src_ch) + " channels");
  }
  const int ch = src_ch == 1 ? 1 : 3;
  ImageBuffer img(raw.cols, raw.rows, ch);
  for (int y = 0; y < raw.rows; ++y) {
    for (int x = 0; x < raw.cols; ++x) {
      for (int k = 0; k < ch; ++k) {
        // OpenCV stores colour as BGR.
        const int src = ch == 1 ? 0 : 2 - k;
        const std::size_t offset = static_cast<std::size_t>(x) * src_ch + src;
        const double v = raw.depth() == CV_8U ? raw.ptr<std::uint8_t>(y)[offset]
                                              : raw.ptr<std::uint16_t>(y)[offset];
        img.at(x, y, k) = v / scale;
      }
    }
  }
  return img;
}

RegionMask load_mask(const std::filesystem::path& path) {
  const cv::Mat raw = read_raw(path);
  RegionMask mask(raw.cols, raw.rows, false);
  const int ch = raw.channels();
  for (int y = 0; y < raw.rows; ++y) {
    for (int x = 0; x < raw.cols; ++x) {
      bool on = false;
      for (int k = 0; k < ch; ++k) {
        const std::size_t offset = static_cast<std::size_t>(x) * ch + k;
        on |= raw.depth() == CV_8U ? raw.ptr<std::uint8_t>(y)[offset] != 0
                                   : raw.ptr<std::uint16_t>(y)[offset] != 0;
      }
      mask.set(x, y, on);
    }
  }
  return mask;
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
  if (!supported(lower_extension(path))) {
    throw Error(ErrorCode::kUnsupportedFormat, path.string() + " is not PNG or TIFF");
  }
  if (img.channels != 1 && img.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument, "only 1- or 3-channel images can be saved");
  }
  cv::Mat m(img.height, img.width, img.channels == 1 ? CV_16UC1 : CV_16UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = m.ptr<std::uint16_t>(y);
    for (int x = 0; x < img.width; ++x) {
      for (int k = 0; k < img.channels; ++k) {
        const int dst = img.channels == 1 ? 0 : 2 - k;
        const double v = std::clamp(img.at(x, y, k), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * img.channels + dst] =
            static_cast<std::uint16_t>(std::lround(v * 65535.0));
      }
    }
  }
  write_atomic(m, path);
}

void save_mask(const RegionMask& mask, const std::filesystem::path& path) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask.at(x, y) ? 255 : 0;
  }
  write_atomic(m, path);
}

}  // namespace alsf::data
