#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

#include "cryptovit/common.hpp"
#include "cryptovit/imaging.hpp"

namespace cryptovit::imaging {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageBuffer load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(Errc::io_missing, "file not found: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Errc::io_corrupt, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Errc::io_corrupt, "libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  ImageBuffer img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::io_corrupt, "corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  // drop alpha; ciphertexts and plaintexts are plain RGB
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != w * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::io_unsupported, "unsupported PNG layout: " + path);
  }

  img = ImageBuffer(static_cast<int>(h), static_cast<int>(w));
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    row_ptrs[y] = img.data.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_png(const ImageBuffer& img, const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(Errc::io_missing, "cannot write: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Errc::io_corrupt, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Errc::io_corrupt, "libpng init failed");
  }
  std::vector<png_bytep> row_ptrs(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::io_corrupt, "PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  // fixed settings so repeated runs emit identical bytes
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    row_ptrs[y] =
        const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width * 3);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// binary PPM (P6) and PGM (P5); PGM replicates gray across channels
ImageBuffer load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_missing, "file not found: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") fail(Errc::io_unsupported, "unsupported PNM magic: " + path);

  auto next_int = [&](const char* what) {
    // skip whitespace and '#' comments
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
      if (!in) fail(Errc::io_corrupt, std::string("truncated PNM header (") + what + "): " + path);
    }
    long v = -1;
    in >> v;
    if (!in || v < 0) fail(Errc::io_corrupt, std::string("bad PNM header (") + what + "): " + path);
    return v;
  };

  long w = next_int("width");
  long h = next_int("height");
  long maxval = next_int("maxval");
  if (maxval != 255) fail(Errc::io_unsupported, "PNM maxval must be 255: " + path);
  in.get();  // single whitespace after maxval

  ImageBuffer img(static_cast<int>(h), static_cast<int>(w));
  if (magic == "P6") {
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
      fail(Errc::io_corrupt, "truncated PPM data: " + path);
  } else {
    std::vector<uint8_t> gray(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (in.gcount() != static_cast<std::streamsize>(gray.size()))
      fail(Errc::io_corrupt, "truncated PGM data: " + path);
    for (size_t i = 0; i < gray.size(); ++i) {
      img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = gray[i];
    }
  }
  return img;
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail(Errc::io_missing, "file not found: " + path);
  uint8_t sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  probe.close();
  static const uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (std::memcmp(sig, png_sig, 8) == 0) return load_png(path);
  if (sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return load_pnm(path);
  fail(Errc::io_unsupported, "unsupported image format (PNG and binary PPM/PGM only): " + path);
}

void save_ppm(const ImageBuffer& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_missing, "cannot write: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
}

ImageBuffer load_ppm(const std::string& path) { return load_pnm(path); }

void save_image(const ImageBuffer& img, const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".ppm") {
    save_ppm(img, path);
  } else if (ext == ".png") {
    save_png(img, path);
  } else {
    fail(Errc::io_unsupported, "unsupported output extension (use .png or .ppm): " + path);
  }
}

}  // namespace cryptovit::imaging
