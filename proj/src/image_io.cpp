#include "fsenet/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "fsenet/common.hpp"

namespace fsenet {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suf) {
  if (s.size() < suf.size()) return false;
  std::string tail = s.substr(s.size() - suf.size());
  for (auto& ch : tail) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return tail == suf;
}

Image from_rows(const std::vector<std::vector<unsigned char>>& rows, int w, int channels) {
  Image img({static_cast<int>(rows.size()), w, channels});
  for (size_t y = 0; y < rows.size(); ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(static_cast<int>(y), x, c) = rows[y][static_cast<size_t>(x) * channels + c] / 255.0f;
  return img;
}

// ---- PNG ----

Image load_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }

  std::vector<std::vector<unsigned char>> rows;
  int w = 0, h = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt or unreadable PNG: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported bit depth 16 in " + path);
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  channels = static_cast<int>(png_get_channels(png, info));
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported channel count in " + path);
  }

  rows.assign(static_cast<size_t>(h), std::vector<unsigned char>(static_cast<size_t>(w) * channels));
  std::vector<png_bytep> ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) ptrs[static_cast<size_t>(y)] = rows[static_cast<size_t>(y)].data();
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_rows(rows, w, channels);
}

void save_png(const Image& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, f.get());
  const int c = img.channels();
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(static_cast<size_t>(img.width()) * c);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      for (int k = 0; k < c; ++k) {
        float v = img.at(y, x, k);
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        row[static_cast<size_t>(x) * c + k] = static_cast<unsigned char>(v * 255.0f + 0.5f);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---- JPEG ----

struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

Image load_jpeg(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);

  jpeg_decompress_struct cinfo;
  JpegErr jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError("corrupt or unreadable JPEG: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  const int w = static_cast<int>(cinfo.output_width);
  const int h = static_cast<int>(cinfo.output_height);
  const int channels = static_cast<int>(cinfo.output_components);
  std::vector<std::vector<unsigned char>> rows(static_cast<size_t>(h),
                                               std::vector<unsigned char>(static_cast<size_t>(w) * channels));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW ptr = rows[cinfo.output_scanline].data();
    jpeg_read_scanlines(&cinfo, &ptr, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_rows(rows, w, channels);
}

void save_jpeg(const Image& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path);
  jpeg_compress_struct cinfo;
  JpegErr jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw IoError("JPEG write failed: " + path);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = static_cast<JDIMENSION>(img.width());
  cinfo.image_height = static_cast<JDIMENSION>(img.height());
  cinfo.input_components = img.channels();
  cinfo.in_color_space = img.channels() == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 95, TRUE);
  jpeg_start_compress(&cinfo, TRUE);

  const int c = img.channels();
  std::vector<unsigned char> row(static_cast<size_t>(img.width()) * c);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      for (int k = 0; k < c; ++k) {
        float v = img.at(y, x, k);
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        row[static_cast<size_t>(x) * c + k] = static_cast<unsigned char>(v * 255.0f + 0.5f);
      }
    JSAMPROW ptr = row.data();
    jpeg_write_scanlines(&cinfo, &ptr, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

}  // namespace

Image load_image(const std::string& path) {
  if (has_suffix(path, ".png")) return load_png(path);
  if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg")) return load_jpeg(path);
  throw FormatError("unsupported image suffix: " + path);
}

void save_image(const Image& img, const std::string& path) {
  if (img.channels() != 1 && img.channels() != 3)
    throw ShapeError("save_image expects 1 or 3 channels");
  if (has_suffix(path, ".png")) return save_png(img, path);
  if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg")) return save_jpeg(img, path);
  throw FormatError("unsupported image suffix: " + path);
}

}  // namespace fsenet
