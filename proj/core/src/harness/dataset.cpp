#include "demotion/harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <type_traits>

namespace demotion {

namespace fs = std::filesystem;

namespace {

// I/O and file-format failures are environment errors, not caller bugs.
void io_check(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}


void write_npy_header(std::ofstream& os, const char* descr, Eigen::Index rows,
                      Eigen::Index cols) {
  std::string dict = "{'descr': '" + std::string(descr) +
                     "', 'fortran_order': False, 'shape': (" + std::to_string(rows) +
                     ", " + std::to_string(cols) + "), }";
  const std::size_t base = 10 + dict.size() + 1;  // magic + version + len + '\n'
  const std::size_t padded = (base + 63) / 64 * 64;
  dict.append(padded - base, ' ');
  dict.push_back('\n');
  os.write("\x93NUMPY\x01\x00", 8);
  const std::uint16_t len = static_cast<std::uint16_t>(dict.size());
  os.write(reinterpret_cast<const char*>(&len), 2);
  os.write(dict.data(), static_cast<std::streamsize>(dict.size()));
}

struct NpyInfo {
  std::string descr;
  bool fortran = false;
  Eigen::Index rows = 0, cols = 0;
  std::vector<char> payload;
};

NpyInfo read_npy(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  io_check(is.good(), "cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  io_check(is.good() && std::memcmp(magic, "\x93NUMPY", 6) == 0, path + ": not an NPY file");
  const int major = magic[6];
  std::uint32_t header_len = 0;
  if (major == 1) {
    std::uint16_t len16 = 0;
    is.read(reinterpret_cast<char*>(&len16), 2);
    header_len = len16;
  } else {
    is.read(reinterpret_cast<char*>(&header_len), 4);
  }
  std::string header(header_len, '\0');
  is.read(header.data(), header_len);
  io_check(is.good(), path + ": truncated NPY header");

  NpyInfo info;
  auto grab = [&](const std::string& key) -> std::string {
    const auto pos = header.find("'" + key + "'");
    io_check(pos != std::string::npos, path + ": NPY header misses " + key);
    auto colon = header.find(':', pos);
    auto start = header.find_first_not_of(" ", colon + 1);
    auto end = start;
    if (header[start] == '\'') {
      end = header.find('\'', start + 1) + 1;
    } else if (header[start] == '(') {
      end = header.find(')', start) + 1;
    } else {
      end = header.find_first_of(",}", start);
    }
    return header.substr(start, end - start);
  };
  std::string descr = grab("descr");
  info.descr = descr.substr(1, descr.size() - 2);  // strip quotes
  info.fortran = grab("fortran_order").find("True") != std::string::npos;
  std::string shape = grab("shape");
  shape = shape.substr(1, shape.size() - 2);  // strip parens
  std::vector<Eigen::Index> dims;
  std::size_t p = 0;
  while (p < shape.size()) {
    while (p < shape.size() && !std::isdigit(static_cast<unsigned char>(shape[p]))) ++p;
    if (p >= shape.size()) break;
    std::size_t q = p;
    while (q < shape.size() && std::isdigit(static_cast<unsigned char>(shape[q]))) ++q;
    dims.push_back(std::stoll(shape.substr(p, q - p)));
    p = q;
  }
  io_check(dims.size() == 2, path + ": only 2D arrays are supported");
  info.rows = dims[0];
  info.cols = dims[1];

  std::size_t itemsize = 0;
  if (info.descr == "<f4") itemsize = 4;
  else if (info.descr == "<f8") itemsize = 8;
  else if (info.descr == "<c8") itemsize = 8;
  else if (info.descr == "<c16") itemsize = 16;
  else throw std::runtime_error(path + ": unsupported dtype " + info.descr);

  info.payload.resize(static_cast<std::size_t>(info.rows) * info.cols * itemsize);
  is.read(info.payload.data(), static_cast<std::streamsize>(info.payload.size()));
  io_check(is.good(), path + ": truncated NPY payload");
  return info;
}

template <typename Scalar, typename Out>
void fill_from_payload(const NpyInfo& info, Out& out,
                       int components) {  // 1 real, 2 complex parts
  const Scalar* src = reinterpret_cast<const Scalar*>(info.payload.data());
  for (Eigen::Index r = 0; r < info.rows; ++r)
    for (Eigen::Index c = 0; c < info.cols; ++c) {
      const std::size_t flat =
          info.fortran ? (static_cast<std::size_t>(c) * info.rows + r)
                       : (static_cast<std::size_t>(r) * info.cols + c);
      if constexpr (std::is_same_v<typename Out::Scalar, Complex>) {
        out(r, c) = components == 1
                        ? Complex(static_cast<double>(src[flat]), 0.0)
                        : Complex(static_cast<double>(src[2 * flat]),
                                  static_cast<double>(src[2 * flat + 1]));
      } else {
        (void)components;  // the callers only reach here with one component
        out(r, c) = static_cast<double>(src[flat]);
      }
    }
}

}  // namespace

void save_npy(const RealImage& x, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  io_check(os.good(), "cannot open " + path);
  write_npy_header(os, "<f8", x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double v = x(r, c);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  io_check(os.good(), "failed writing " + path);
}

void save_npy(const ComplexImage& x, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  io_check(os.good(), "cannot open " + path);
  write_npy_header(os, "<c16", x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double v[2] = {x(r, c).real(), x(r, c).imag()};
      os.write(reinterpret_cast<const char*>(v), 16);
    }
  io_check(os.good(), "failed writing " + path);
}

RealImage load_npy_real(const std::string& path) {
  const NpyInfo info = read_npy(path);
  io_check(info.descr == "<f4" || info.descr == "<f8",
          path + ": expected a real-valued array");
  RealImage out(info.rows, info.cols);
  if (info.descr == "<f4")
    fill_from_payload<float>(info, out, 1);
  else
    fill_from_payload<double>(info, out, 1);
  return out;
}

ComplexImage load_npy_complex(const std::string& path) {
  const NpyInfo info = read_npy(path);
  ComplexImage out(info.rows, info.cols);
  if (info.descr == "<f4") fill_from_payload<float>(info, out, 1);
  else if (info.descr == "<f8") fill_from_payload<double>(info, out, 1);
  else if (info.descr == "<c8") fill_from_payload<float>(info, out, 2);
  else fill_from_payload<double>(info, out, 2);
  return out;
}

void save_pgm(const RealImage& x, const std::string& path, int bits) {
  require(bits == 8 || bits == 16, "pgm depth must be 8 or 16 bits");
  std::ofstream os(path, std::ios::binary);
  io_check(os.good(), "cannot open " + path);
  const int maxval = bits == 8 ? 255 : 65535;
  os << "P5\n" << x.cols() << " " << x.rows() << "\n" << maxval << "\n";
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double v = std::min(1.0, std::max(0.0, x(r, c)));
      const unsigned q = static_cast<unsigned>(std::lround(v * maxval));
      if (bits == 8) {
        const unsigned char b = static_cast<unsigned char>(q);
        os.write(reinterpret_cast<const char*>(&b), 1);
      } else {
        const unsigned char b[2] = {static_cast<unsigned char>(q >> 8),
                                    static_cast<unsigned char>(q & 0xFF)};
        os.write(reinterpret_cast<const char*>(b), 2);
      }
    }
  io_check(os.good(), "failed writing " + path);
}

RealImage load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  io_check(is.good(), "cannot open " + path);
  std::string tag;
  is >> tag;
  io_check(tag == "P5", path + ": only binary PGM (P5) is supported");
  auto next_token = [&]() -> long {
    long v = 0;
    // skip whitespace and '#' comment lines
    for (;;) {
      const int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
    is >> v;
    return v;
  };
  const long cols = next_token();
  const long rows = next_token();
  const long maxval = next_token();
  io_check(is.good() && cols > 0 && rows > 0 && maxval > 0 && maxval <= 65535,
          path + ": malformed PGM header");
  is.get();  // single whitespace before payload

  RealImage out(rows, cols);
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols * bytes);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  io_check(is.good(), path + ": truncated PGM payload");
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::size_t i = (static_cast<std::size_t>(r) * cols + c) * bytes;
      const unsigned v = bytes == 1 ? buf[i] : (buf[i] << 8 | buf[i + 1]);
      out(r, c) = static_cast<double>(v) / static_cast<double>(maxval);
    }
  return out;
}

RealImage center_crop(const RealImage& x, Eigen::Index rows, Eigen::Index cols) {
  require(rows >= 1 && cols >= 1 && rows <= x.rows() && cols <= x.cols(),
          "crop larger than image");
  const Eigen::Index r0 = (x.rows() - rows) / 2;
  const Eigen::Index c0 = (x.cols() - cols) / 2;
  return x.block(r0, c0, rows, cols);
}

RealImage resize_bilinear(const RealImage& x, Eigen::Index rows, Eigen::Index cols) {
  require(rows >= 1 && cols >= 1, "resize target must be positive");
  if (rows == x.rows() && cols == x.cols()) return x;
  RealImage out(rows, cols);
  const double sr = static_cast<double>(x.rows()) / rows;
  const double sc = static_cast<double>(x.cols()) / cols;
  for (Eigen::Index r = 0; r < rows; ++r) {
    double fr = (r + 0.5) * sr - 0.5;
    fr = std::min(std::max(fr, 0.0), static_cast<double>(x.rows() - 1));
    const Eigen::Index r0 = static_cast<Eigen::Index>(fr);
    const Eigen::Index r1 = std::min(r0 + 1, x.rows() - 1);
    const double wr = fr - r0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      double fc = (c + 0.5) * sc - 0.5;
      fc = std::min(std::max(fc, 0.0), static_cast<double>(x.cols() - 1));
      const Eigen::Index c0 = static_cast<Eigen::Index>(fc);
      const Eigen::Index c1 = std::min(c0 + 1, x.cols() - 1);
      const double wc = fc - c0;
      out(r, c) = (1 - wr) * ((1 - wc) * x(r0, c0) + wc * x(r0, c1)) +
                  wr * ((1 - wc) * x(r1, c0) + wc * x(r1, c1));
    }
  }
  return out;
}

Dataset ingest_dataset(const std::string& path, Eigen::Index size) {
  require(size >= 4, "target size must be at least 4");
  io_check(fs::is_directory(path), path + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".npy") files.push_back(entry.path());
  }
  io_check(!files.empty(), path + ": no .pgm or .npy images found");
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });

  Dataset ds;
  for (const auto& f : files) {
    RealImage img = f.extension() == ".pgm" ? load_pgm(f.string())
                                            : load_npy_real(f.string());
    io_check(all_finite(img), f.string() + ": non-finite values");
    const Eigen::Index side = std::min(img.rows(), img.cols());
    img = center_crop(img, side, side);
    img = resize_bilinear(img, size, size);
    img = img.max(0.0);
    const double peak = img.maxCoeff();
    if (peak > 1.0) img /= peak;
    ds.images.push_back(std::move(img));
    ds.ids.push_back(f.stem().string());
  }
  return ds;
}

namespace {

// Accumulates one soft-edged ellipse; the edge ramps over about one pixel.
void add_ellipse(RealImage& img, double cy, double cx, double a, double b,
                 double theta, double intensity) {
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  for (Eigen::Index r = 0; r < img.rows(); ++r)
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      const double u = (r - cy) * ct + (c - cx) * st;
      const double v = -(r - cy) * st + (c - cx) * ct;
      const double q = std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
      const double edge = (1.0 - q) * std::min(a, b);  // approx pixel distance
      const double cover = std::min(1.0, std::max(0.0, edge + 0.5));
      img(r, c) += intensity * cover;
    }
}

}  // namespace

RealImage make_phantom(Eigen::Index size, Rng& rng) {
  require(size >= 16, "phantom size must be at least 16");
  RealImage img = RealImage::Zero(size, size);
  const double s = static_cast<double>(size);
  const double cy = 0.5 * s + rng.uniform(-0.03, 0.03) * s;
  const double cx = 0.5 * s + rng.uniform(-0.03, 0.03) * s;
  const double head_a = rng.uniform(0.30, 0.42) * s;
  const double head_b = rng.uniform(0.30, 0.42) * s;
  const double head_t = rng.uniform(0.0, std::numbers::pi);
  add_ellipse(img, cy, cx, head_a, head_b, head_t, rng.uniform(0.6, 0.9));

  const int n_inner = 3 + static_cast<int>(rng.uniform() * 5.0);  // 3..7
  for (int k = 0; k < n_inner; ++k) {
    const double ecy = cy + rng.uniform(-0.45, 0.45) * head_a;
    const double ecx = cx + rng.uniform(-0.45, 0.45) * head_b;
    const double ea = rng.uniform(0.04, 0.18) * s;
    const double eb = rng.uniform(0.04, 0.18) * s;
    const double et = rng.uniform(0.0, std::numbers::pi);
    const double ei = rng.uniform(-0.35, 0.45);
    add_ellipse(img, ecy, ecx, ea, eb, et, ei);
  }
  return img.max(0.0).min(1.0);
}

std::vector<RealImage> make_phantom_dataset(int n, Eigen::Index size, std::uint64_t seed) {
  require(n >= 0, "phantom count must be >= 0");
  std::vector<RealImage> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(i)));
    out.push_back(make_phantom(size, rng));
  }
  return out;
}

}  // namespace demotion
