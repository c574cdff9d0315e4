#include "otbridge/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace otbridge::io {
namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<std::uint8_t> to_bytes(const GrayImage& image) {
  std::vector<std::uint8_t> bytes(image.size());
  std::transform(image.values().begin(), image.values().end(), bytes.begin(), quantize);
  return bytes;
}

GrayImage from_bytes(int width, int height, const std::vector<std::uint8_t>& bytes) {
  GrayImage image(width, height);
  for (std::size_t i = 0; i < bytes.size(); ++i) image[i] = bytes[i] / 255.0;
  return image;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw Error(mode[0] == 'w' ? ErrorKind::DiskWrite : ErrorKind::Io, "cannot open " + path.string());
  }
  return f;
}

// Skips whitespace and '#' comments in a PGM header.
void skip_header_space(std::istream& in) {
  while (true) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::DiskWrite, "cannot open " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  const auto bytes = to_bytes(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::DiskWrite, "short write to " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw Error(ErrorKind::Io, path.string() + " is not a binary PGM");
  int width = 0, height = 0, maxval = 0;
  skip_header_space(in);
  in >> width;
  skip_header_space(in);
  in >> height;
  skip_header_space(in);
  in >> maxval;
  in.get();
  if (!in || width <= 0 || height <= 0 || maxval != 255) {
    throw Error(ErrorKind::Io, path.string() + ": unsupported PGM header");
  }
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw Error(ErrorKind::Io, path.string() + ": truncated PGM");
  return from_bytes(width, height, bytes);
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::DiskWrite, "libpng initialisation failed");
  }
  const auto bytes = to_bytes(image);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::DiskWrite, "libpng failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamp chunk, so output bytes depend only on pixel data.
  png_write_info(png, info);
  for (int r = 0; r < image.height(); ++r) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(r) * image.width()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Io, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Io, "libpng failed reading " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height);
  for (int r = 0; r < height; ++r) png_read_row(png, bytes.data() + static_cast<std::size_t>(r) * width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_bytes(width, height, bytes);
}

void write_image(const std::filesystem::path& path, const GrayImage& image) {
  if (path.extension() == ".csv") {
    std::vector<std::vector<double>> rows(image.height(), std::vector<double>(image.width()));
    for (int r = 0; r < image.height(); ++r)
      for (int c = 0; c < image.width(); ++c) rows[r][c] = image(r, c);
    write_matrix_csv(path, rows);
  } else if (path.extension() == ".png") {
    write_png(path, image);
  } else {
    write_pgm(path, image);
  }
}

GrayImage read_image(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    const auto rows = read_matrix_csv(path);
    if (rows.empty()) throw Error(ErrorKind::Io, path.string() + ": empty image");
    GrayImage out(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
    for (int r = 0; r < out.height(); ++r) {
      if (rows[r].size() != rows[0].size()) throw Error(ErrorKind::Io, path.string() + ": ragged rows");
      for (int c = 0; c < out.width(); ++c) out(r, c) = rows[r][c];
    }
    return out;
  }
  return path.extension() == ".png" ? read_png(path) : read_pgm(path);
}

GrayImage to_gray(const BinaryMask& mask) {
  GrayImage out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1.0 : 0.0;
  return out;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) { write_image(path, to_gray(mask)); }

BinaryMask read_mask(const std::filesystem::path& path) {
  const GrayImage g = read_image(path);
  BinaryMask out(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] >= 128.0 / 255.0 ? 1 : 0;
  return out;
}

void write_csv(const std::filesystem::path& path, const DistanceField& field) {
  std::vector<std::vector<double>> rows(field.height(), std::vector<double>(field.width()));
  for (int r = 0; r < field.height(); ++r) {
    for (int c = 0; c < field.width(); ++c) rows[r][c] = field(r, c);
  }
  write_matrix_csv(path, rows);
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::DiskWrite, "cannot open " + path.string());
  out.precision(17);
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::DiskWrite, "short write to " + path.string());
}

std::vector<std::vector<double>> read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double>& row = rows.emplace_back();
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::Io, path.string() + ": bad number '" + cell + "'");
      }
    }
  }
  return rows;
}

}  // namespace otbridge::io
