#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "demotion/rng.hpp"
#include "demotion/types.hpp"

namespace demotion {

// NPY (version 1.0) with little-endian scalars. Real writers emit <f8,
// complex writers <c16; readers additionally accept <f4/<c8 and Fortran
// order.
void save_npy(const RealImage& x, const std::string& path);
void save_npy(const ComplexImage& x, const std::string& path);
RealImage load_npy_real(const std::string& path);
ComplexImage load_npy_complex(const std::string& path);

// Binary PGM (P5), 8- or 16-bit; values are clamped to [0, 1] on write and
// divided by maxval on read.
void save_pgm(const RealImage& x, const std::string& path, int bits = 8);
RealImage load_pgm(const std::string& path);

struct Dataset {
  std::vector<RealImage> images;  // values in [0, 1]
  std::vector<std::string> ids;   // source filename stems, sorted
};

// Loads every .pgm/.npy file in the directory in lexicographic filename
// order, center-crops each image square, resizes to size x size, clamps
// negatives, and scales any image whose maximum exceeds 1 by that maximum.
Dataset ingest_dataset(const std::string& path, Eigen::Index size);

RealImage center_crop(const RealImage& x, Eigen::Index rows, Eigen::Index cols);
RealImage resize_bilinear(const RealImage& x, Eigen::Index rows, Eigen::Index cols);

// Random soft-edged ellipse phantom in [0, 1]: one bright head ellipse plus
// a handful of interior ellipses of mixed sign.
RealImage make_phantom(Eigen::Index size, Rng& rng);

// n phantoms with per-image generators seeded by mix(seed, index).
std::vector<RealImage> make_phantom_dataset(int n, Eigen::Index size, std::uint64_t seed);

}  // namespace demotion
