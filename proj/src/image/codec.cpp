#include "curator/image/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "curator/core/errors.hpp"

namespace curator::image {
namespace {

cv::Mat to_bgr_mat(const RgbImage& image) {
  cv::Mat mat(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width; ++x) {
      const auto* px = image.at(x, y);
      row[3 * x + 0] = px[2];
      row[3 * x + 1] = px[1];
      row[3 * x + 2] = px[0];
    }
  }
  return mat;
}

Bytes encode(const RgbImage& image, const char* ext, const std::vector<int>& params) {
  if (image.width <= 0 || image.height <= 0) throw DecodeError("cannot encode an empty image");
  std::vector<std::uint8_t> buffer;
  if (!cv::imencode(ext, to_bgr_mat(image), buffer, params)) {
    throw Error(std::string("encoding failed for ") + ext);
  }
  return buffer;
}

bool starts_with(ByteView bytes, std::string_view magic, std::size_t offset = 0) {
  return bytes.size() >= offset + magic.size() &&
         std::memcmp(bytes.data() + offset, magic.data(), magic.size()) == 0;
}

}  // namespace

RgbImage decode(ByteView bytes) {
  if (bytes.empty()) throw DecodeError("empty image buffer");
  cv::Mat encoded(1, static_cast<int>(bytes.size()), CV_8U,
                  const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(encoded, cv::IMREAD_COLOR | cv::IMREAD_IGNORE_ORIENTATION);
  } catch (const cv::Exception& e) {
    throw DecodeError(std::string("image decode failed: ") + e.what());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) throw DecodeError("bytes do not decode as an image");

  RgbImage out;
  out.width = bgr.cols;
  out.height = bgr.rows;
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      auto* px = out.at(x, y);
      px[0] = row[3 * x + 2];
      px[1] = row[3 * x + 1];
      px[2] = row[3 * x + 0];
    }
  }
  return out;
}

bool is_decodable(ByteView bytes) {
  try {
    decode(bytes);
    return true;
  } catch (const DecodeError&) {
    return false;
  }
}

GrayImage to_luma(const RgbImage& image) {
  GrayImage out{image.width, image.height, {}};
  out.values.resize(static_cast<std::size_t>(image.width) * image.height);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const auto* px = &image.pixels[i * 3];
    out.values[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return out;
}

GrayImage area_resize(const GrayImage& source, int width, int height) {
  if (source.width <= 0 || source.height <= 0 || width <= 0 || height <= 0) {
    throw DecodeError("area_resize needs non-empty source and target");
  }
  // Work in target-pixel units: output pixel (ox, oy) covers the source
  // rectangle [ox*sx, (ox+1)*sx) x [oy*sy, (oy+1)*sy).
  const double sx = static_cast<double>(source.width) / width;
  const double sy = static_cast<double>(source.height) / height;

  GrayImage out{width, height, std::vector<double>(static_cast<std::size_t>(width) * height)};
  for (int oy = 0; oy < height; ++oy) {
    const double y0 = oy * sy;
    const double y1 = (oy + 1) * sy;
    const int iy0 = static_cast<int>(y0);
    const int iy1 = std::min(source.height, static_cast<int>(std::ceil(y1)));
    for (int ox = 0; ox < width; ++ox) {
      const double x0 = ox * sx;
      const double x1 = (ox + 1) * sx;
      const int ix0 = static_cast<int>(x0);
      const int ix1 = std::min(source.width, static_cast<int>(std::ceil(x1)));
      double sum = 0.0;
      double weight = 0.0;
      for (int y = iy0; y < iy1; ++y) {
        const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0) continue;
        for (int x = ix0; x < ix1; ++x) {
          const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0) continue;
          sum += wx * wy * source(x, y);
          weight += wx * wy;
        }
      }
      out.values[static_cast<std::size_t>(oy) * width + ox] = sum / weight;
    }
  }
  return out;
}

Bytes encode_png(const RgbImage& image) {
  return encode(image, ".png", {});
}

Bytes encode_jpeg(const RgbImage& image, int quality) {
  return encode(image, ".jpg", {cv::IMWRITE_JPEG_QUALITY, std::clamp(quality, 1, 100)});
}

std::string_view sniff_extension(ByteView bytes) {
  if (starts_with(bytes, "\xFF\xD8\xFF")) return "jpg";
  if (starts_with(bytes, "\x89PNG\r\n\x1a\n")) return "png";
  if (starts_with(bytes, "GIF87a") || starts_with(bytes, "GIF89a")) return "gif";
  if (starts_with(bytes, "RIFF") && starts_with(bytes, "WEBP", 8)) return "webp";
  if (starts_with(bytes, "BM")) return "bmp";
  if (starts_with(bytes, std::string_view("II*\0", 4)) ||
      starts_with(bytes, std::string_view("MM\0*", 4)))
    return "tiff";
  return "bin";
}

}  // namespace curator::image
