#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "stan/errors.hpp"
#include "stan/scene/video.hpp"

namespace stan::scene {

namespace fs = std::filesystem;

void FrameSequence::validate() const {
  if (frames.empty()) throw ContractError("video '" + video_id + "' has no frames");
  const auto h = frames.front().height, w = frames.front().width;
  if (h == 0 || w == 0) throw ContractError("video '" + video_id + "' has empty frames");
  for (const auto& f : frames) {
    if (f.height != h || f.width != w || f.pixels.size() != h * w * 3) {
      throw ContractError("video '" + video_id + "' mixes frame sizes");
    }
  }
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw FormatError("cannot open " + path.string());
  return f;
}

RgbImage read_png(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() || png_sig_cmp(sig.data(), 0, sig.size())) {
    throw FormatError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng initialization failed");
  }
  RgbImage image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  image.height = png_get_image_height(png, info);
  image.width = png_get_image_width(png, info);
  if (png_get_rowbytes(png, info) != image.width * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported PNG layout in " + path.string());
  }
  image.pixels.resize(image.height * image.width * 3);
  std::vector<png_bytep> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + y * image.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

// Skips whitespace and '#' comments between PPM header tokens.
std::size_t read_ppm_number(std::istream& in) {
  int c = in.peek();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else {
      in.get();
    }
    c = in.peek();
  }
  std::size_t value = 0;
  if (!(in >> value)) throw FormatError("bad PPM header");
  return value;
}

RgbImage read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[2];
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6') throw FormatError(path.string() + " is not a P6 PPM");
  RgbImage image;
  image.width = read_ppm_number(in);
  image.height = read_ppm_number(in);
  const std::size_t maxval = read_ppm_number(in);
  if (maxval != 255 || image.width == 0 || image.height == 0) throw FormatError("unsupported PPM " + path.string());
  in.get();
  image.pixels.resize(image.width * image.height * 3);
  if (!in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()))) {
    throw FormatError("truncated PPM " + path.string());
  }
  return image;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                  static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes.data(), 4);
}

std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("unexpected end of stream");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

constexpr char kRawMagic[8] = {'S', 'T', 'A', 'N', 'V', 'I', 'D', '1'};

bool is_frame_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".ppm";
}

}  // namespace

RgbImage read_image(const fs::path& path) {
  if (path.extension() == ".png") return read_png(path);
  if (path.extension() == ".ppm") return read_ppm(path);
  throw FormatError("unsupported image type " + path.string());
}

void write_png(const fs::path& path, const RgbImage& image) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 1);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(image.height);
  auto* base = const_cast<std::uint8_t*>(image.pixels.data());
  for (std::size_t y = 0; y < image.height; ++y) rows[y] = base + y * image.width * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

FrameSequence read_frame_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a frame directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  FrameSequence video;
  video.video_id = dir.filename().string();
  if (video.video_id.empty()) video.video_id = dir.parent_path().filename().string();
  video.frames.reserve(files.size());
  for (const auto& f : files) video.frames.push_back(read_image(f));
  video.validate();
  return video;
}

void write_frame_directory(const fs::path& dir, const FrameSequence& video) {
  video.validate();
  fs::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06zu.png", i);
    write_png(dir / name, video.frames[i]);
  }
}

FrameSequence read_raw_stream(const fs::path& path, std::string video_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kRawMagic, 8) != 0) {
    throw FormatError(path.string() + " is not a STANVID1 stream");
  }
  const std::uint32_t height = read_u32(in), width = read_u32(in), count = read_u32(in);
  FrameSequence video;
  video.video_id = std::move(video_id);
  video.frames.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RgbImage frame(height, width);
    if (!in.read(reinterpret_cast<char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()))) {
      throw FormatError("truncated STANVID1 stream " + path.string());
    }
    video.frames.push_back(std::move(frame));
  }
  video.validate();
  return video;
}

void write_raw_stream(const fs::path& path, const FrameSequence& video) {
  video.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kRawMagic, 8);
  write_u32(out, static_cast<std::uint32_t>(video.frames.front().height));
  write_u32(out, static_cast<std::uint32_t>(video.frames.front().width));
  write_u32(out, static_cast<std::uint32_t>(video.frames.size()));
  for (const auto& f : video.frames) {
    out.write(reinterpret_cast<const char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
  }
}

}  // namespace stan::scene
