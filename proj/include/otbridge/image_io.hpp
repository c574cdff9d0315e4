#pragma once

#include <filesystem>
#include <vector>

#include "otbridge/image.hpp"

namespace otbridge::io {

// 8-bit grayscale. Intensities map to round(255*v); masks are stored as 0/255.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_png(const std::filesystem::path& path);

/// Picks PGM, PNG or CSV from the extension. CSV keeps full double precision.
void write_image(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_image(const std::filesystem::path& path);

void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
/// Pixels >= 128 are foreground.
BinaryMask read_mask(const std::filesystem::path& path);

GrayImage to_gray(const BinaryMask& mask);

void write_csv(const std::filesystem::path& path, const DistanceField& field);
void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> read_matrix_csv(const std::filesystem::path& path);

}  // namespace otbridge::io
