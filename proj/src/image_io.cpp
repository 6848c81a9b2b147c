#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sval/errors.hpp"
#include "sval/image.hpp"

namespace sval {
namespace {

// Reads the next whitespace-delimited PPM header token, skipping comments.
std::string next_token(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  return buf.substr(start, pos - start);
}

ImageTensor decode_ppm(const std::string& buf, const std::filesystem::path& path) {
  std::size_t pos = 0;
  if (next_token(buf, pos) != "P6") throw IoError("not a binary PPM: " + path.string());
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token(buf, pos));
    height = std::stoi(next_token(buf, pos));
    maxval = std::stoi(next_token(buf, pos));
  } catch (const std::exception&) {
    throw IoError("malformed PPM header: " + path.string());
  }
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw IoError("invalid PPM dimensions: " + path.string());
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(width) * height * 3 * bytes_per;
  if (buf.size() < pos + need) throw IoError("truncated PPM raster: " + path.string());
  std::vector<double> rgb(static_cast<std::size_t>(width) * height * 3);
  const auto* raw = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    const unsigned v = bytes_per == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    rgb[i] = static_cast<double>(v) / maxval;
  }
  return ImageTensor(height, width, std::move(rgb));
}

ImageTensor decode_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("PNG decode failed for " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> raster(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raster.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("PNG decode failed for " + path.string() + ": " + msg);
  }
  std::vector<double> rgb(raster.size());
  for (std::size_t i = 0; i < raster.size(); ++i) rgb[i] = raster[i] / 255.0;
  return ImageTensor(static_cast<int>(image.height), static_cast<int>(image.width),
                     std::move(rgb));
}

}  // namespace

ImageTensor load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (buf.size() >= 8 && std::memcmp(buf.data(), kPngSig, 8) == 0) return decode_png(path);
  if (buf.size() >= 2 && buf[0] == 'P' && buf[1] == '6') return decode_ppm(buf, path);
  throw IoError("unsupported image format: " + path.string());
}

void save_ppm(const std::filesystem::path& path, const ImageTensor& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::string raster(image.pixels().size(), '\0');
  auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = std::clamp(px[i], 0.0, 1.0);
    raster[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sval
