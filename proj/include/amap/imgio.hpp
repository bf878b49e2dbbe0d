#pragma once

// Reading microscopy TIFFs and reading/writing the mask artifacts.
//
// TIFF goes through libtiff, PNG through the libpng "simplified" API. Masks
// are always written uncompressed so repeated runs produce identical bytes.

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "amap/error.hpp"
#include "amap/grid.hpp"
#include "amap/types.hpp"

namespace amap {

/// How a multi-page stack is reduced to one plane.
struct ZSelection {
  enum class Mode { MaxProject, Slice };
  Mode mode = Mode::MaxProject;
  std::size_t slice = 0;

  static ZSelection max_project() { return {}; }
  static ZSelection single(std::size_t k) { return {Mode::Slice, k}; }
};

/// Per-pixel maximum over z. Dimensions and pixel size follow slice 0.
inline Image max_project(const ImageStack& stack) {
  if (stack.slices.empty()) {
    throw Error(ErrorCode::InvalidArgument, "max_project needs at least one slice");
  }
  Image out = stack.slices.front();
  for (std::size_t z = 1; z < stack.slices.size(); ++z) {
    const auto& s = stack.slices[z];
    if (!s.pixels.same_shape(out.pixels)) {
      throw Error(ErrorCode::DimensionMismatch, "stack slices differ in size");
    }
    auto dst = out.pixels.values();
    auto src = s.pixels.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], src[i]);
  }
  return out;
}

namespace detail {

inline void silence_libtiff() {
  static std::once_flag once;
  std::call_once(once, [] {
    TIFFSetErrorHandler(nullptr);
    TIFFSetWarningHandler(nullptr);
  });
}

struct TiffCloser {
  void operator()(TIFF* t) const noexcept {
    if (t) TIFFClose(t);
  }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

inline void require_exists(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
}

inline TiffPtr open_tiff(const std::filesystem::path& path, const char* mode) {
  silence_libtiff();
  TiffPtr tif(TIFFOpen(path.string().c_str(), mode));
  return tif;
}

enum class ImageFormat { Png, Tiff };

inline ImageFormat format_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return ImageFormat::Png;
  if (ext == ".tif" || ext == ".tiff") return ImageFormat::Tiff;
  throw Error(ErrorCode::IoError, "unsupported mask extension '" + ext + "' (use .png or .tif)");
}

/// One decoded TIFF directory: every sample plane as raw integer values.
struct TiffPage {
  int width = 0;
  int height = 0;
  int bits = 0;
  int samples = 1;
  bool min_is_white = false;
  std::vector<Grid<std::uint32_t>> planes;
};

template <typename Sample>
void scatter_row(const unsigned char* buf, int count, int stride, int first_sample,
                 std::uint32_t* dst) {
  const auto* p = reinterpret_cast<const Sample*>(buf);
  for (int i = 0; i < count; ++i) dst[i] = p[static_cast<std::size_t>(i) * stride + first_sample];
}

inline void scatter(const unsigned char* buf, int bits, int count, int stride, int sample,
                    std::uint32_t* dst) {
  switch (bits) {
    case 8: scatter_row<std::uint8_t>(buf, count, stride, sample, dst); break;
    case 16: scatter_row<std::uint16_t>(buf, count, stride, sample, dst); break;
    case 32: scatter_row<std::uint32_t>(buf, count, stride, sample, dst); break;
    default: throw Error(ErrorCode::MalformedTiff, "unsupported bit depth");
  }
}

/// Decodes the current directory. Accepts 8/16/32-bit unsigned integer data in
/// strips or tiles, chunky or planar.
inline TiffPage read_tiff_page(TIFF* tif, const std::string& what) {
  std::uint32_t w = 0, h = 0;
  std::uint16_t bits = 1, spp = 1, planar = PLANARCONFIG_CONTIG, fmt = SAMPLEFORMAT_UINT;
  std::uint16_t photometric = PHOTOMETRIC_MINISBLACK;
  if (!TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &w) || !TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &h)) {
    throw Error(ErrorCode::MalformedTiff, what + ": missing image dimensions");
  }
  TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &planar);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &fmt);
  TIFFGetField(tif, TIFFTAG_PHOTOMETRIC, &photometric);
  if (w == 0 || h == 0 || w > (1u << 30) || h > (1u << 30)) {
    throw Error(ErrorCode::MalformedTiff, what + ": empty or oversized extent");
  }
  if (bits != 8 && bits != 16 && bits != 32) {
    throw Error(ErrorCode::MalformedTiff, what + ": unsupported bits per sample " + std::to_string(bits));
  }
  if (fmt != SAMPLEFORMAT_UINT) {
    throw Error(ErrorCode::MalformedTiff, what + ": only unsigned integer samples are supported");
  }
  if (photometric == PHOTOMETRIC_PALETTE || spp == 0) {
    throw Error(ErrorCode::MalformedTiff, what + ": palette images are not supported");
  }

  TiffPage page;
  page.width = static_cast<int>(w);
  page.height = static_cast<int>(h);
  page.bits = bits;
  page.samples = spp;
  page.min_is_white = photometric == PHOTOMETRIC_MINISWHITE;
  page.planes.assign(spp, Grid<std::uint32_t>(page.width, page.height));

  const bool separate = planar == PLANARCONFIG_SEPARATE && spp > 1;
  const int stride = separate ? 1 : spp;

  if (TIFFIsTiled(tif)) {
    std::uint32_t tw = 0, th = 0;
    TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
    if (tw == 0 || th == 0) throw Error(ErrorCode::MalformedTiff, what + ": bad tile size");
    std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFTileSize(tif)));
    const int passes = separate ? spp : 1;
    std::vector<std::uint32_t> tmp(tw);
    for (int pass = 0; pass < passes; ++pass) {
      for (std::uint32_t ty = 0; ty < h; ty += th) {
        for (std::uint32_t tx = 0; tx < w; tx += tw) {
          if (TIFFReadTile(tif, buf.data(), tx, ty, 0, static_cast<std::uint16_t>(pass)) < 0) {
            throw Error(ErrorCode::MalformedTiff, what + ": unreadable tile");
          }
          const int cols = static_cast<int>(std::min(tw, w - tx));
          const int rows = static_cast<int>(std::min(th, h - ty));
          const std::size_t row_bytes = static_cast<std::size_t>(tw) * stride * (bits / 8);
          for (int r = 0; r < rows; ++r) {
            const unsigned char* src = buf.data() + r * row_bytes;
            for (int s = 0; s < (separate ? 1 : spp); ++s) {
              const int plane = separate ? pass : s;
              scatter(src, bits, cols, stride, separate ? 0 : s, tmp.data());
              auto dst = page.planes[plane].row(static_cast<int>(ty) + r);
              std::copy_n(tmp.begin(), cols, dst.begin() + tx);
            }
          }
        }
      }
    }
  } else {
    std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFScanlineSize(tif)));
    const int passes = separate ? spp : 1;
    for (int pass = 0; pass < passes; ++pass) {
      for (int y = 0; y < page.height; ++y) {
        if (TIFFReadScanline(tif, buf.data(), static_cast<std::uint32_t>(y),
                             static_cast<std::uint16_t>(pass)) < 0) {
          throw Error(ErrorCode::MalformedTiff, what + ": unreadable scanline");
        }
        if (separate) {
          scatter(buf.data(), bits, page.width, 1, 0, page.planes[pass].row(y).data());
        } else {
          for (int s = 0; s < spp; ++s) {
            scatter(buf.data(), bits, page.width, spp, s, page.planes[s].row(y).data());
          }
        }
      }
    }
  }
  return page;
}

inline std::vector<TiffPage> read_tiff_pages(const std::filesystem::path& path,
                                             std::optional<int>* imagej_channels = nullptr) {
  require_exists(path);
  auto tif = open_tiff(path, "r");
  if (!tif) throw Error(ErrorCode::MalformedTiff, path.string() + ": not a TIFF file");
  if (imagej_channels) {
    char* desc = nullptr;
    if (TIFFGetField(tif.get(), TIFFTAG_IMAGEDESCRIPTION, &desc) && desc) {
      std::string_view d(desc);
      if (d.starts_with("ImageJ=")) {
        auto pos = d.find("\nchannels=");
        if (pos != std::string_view::npos) {
          int c = 0;
          auto start = d.data() + pos + 10;
          auto [ptr, ec] = std::from_chars(start, d.data() + d.size(), c);
          if (ec == std::errc{} && c > 0) *imagej_channels = c;
        }
      }
    }
  }
  std::vector<TiffPage> pages;
  do {
    pages.push_back(read_tiff_page(tif.get(), path.string()));
  } while (TIFFReadDirectory(tif.get()));
  return pages;
}

template <typename T>
void write_tiff_plane(const Grid<T>& grid, const std::filesystem::path& path) {
  static_assert(std::is_unsigned_v<T> && (sizeof(T) == 1 || sizeof(T) == 2 || sizeof(T) == 4));
  if (grid.empty()) throw Error(ErrorCode::IoError, "refusing to write an empty image");
  auto tif = open_tiff(path, "w");
  if (!tif) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  TIFF* t = tif.get();
  TIFFSetField(t, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(grid.width()));
  TIFFSetField(t, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(grid.height()));
  TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(8 * sizeof(T)));
  TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(1));
  TIFFSetField(t, TIFFTAG_SAMPLEFORMAT, static_cast<std::uint16_t>(SAMPLEFORMAT_UINT));
  TIFFSetField(t, TIFFTAG_PHOTOMETRIC, static_cast<std::uint16_t>(PHOTOMETRIC_MINISBLACK));
  TIFFSetField(t, TIFFTAG_PLANARCONFIG, static_cast<std::uint16_t>(PLANARCONFIG_CONTIG));
  TIFFSetField(t, TIFFTAG_COMPRESSION, static_cast<std::uint16_t>(COMPRESSION_NONE));
  TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(t, 0));
  std::vector<T> line(static_cast<std::size_t>(grid.width()));
  for (int y = 0; y < grid.height(); ++y) {
    auto r = grid.row(y);
    std::copy(r.begin(), r.end(), line.begin());
    if (TIFFWriteScanline(t, line.data(), static_cast<std::uint32_t>(y), 0) < 0) {
      throw Error(ErrorCode::IoError, "write failed: " + path.string());
    }
  }
  if (!TIFFWriteDirectory(t)) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline void write_png_gray8(const Grid<std::uint8_t>& grid, const std::filesystem::path& path) {
  if (grid.empty()) throw Error(ErrorCode::IoError, "refusing to write an empty image");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(grid.width());
  img.height = static_cast<png_uint_32>(grid.height());
  img.format = PNG_FORMAT_GRAY;
  auto values = grid.values();
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, values.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::IoError, path.string() + ": " + msg);
  }
}

/// Reads an 8-bit single-channel image. Anything that does not decode as such
/// is reported with `malformed`.
inline Grid<std::uint8_t> read_gray8(const std::filesystem::path& path, ErrorCode malformed) {
  require_exists(path);
  if (format_for(path) == ImageFormat::Png) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
      std::string msg = img.message;
      png_image_free(&img);
      throw Error(malformed, path.string() + ": " + msg);
    }
    if (img.format != PNG_FORMAT_GRAY || img.width == 0 || img.height == 0) {
      png_image_free(&img);
      throw Error(malformed, path.string() + ": expected 8-bit single-channel PNG");
    }
    Grid<std::uint8_t> out(static_cast<int>(img.width), static_cast<int>(img.height));
    auto values = out.values();
    if (!png_image_finish_read(&img, nullptr, values.data(), 0, nullptr)) {
      std::string msg = img.message;
      png_image_free(&img);
      throw Error(malformed, path.string() + ": " + msg);
    }
    return out;
  }
  std::vector<TiffPage> pages;
  try {
    pages = read_tiff_pages(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FileNotFound) throw;
    throw Error(malformed, e.what());
  }
  const auto& p = pages.front();
  if (p.bits != 8 || p.samples != 1) {
    throw Error(malformed, path.string() + ": expected 8-bit single-channel TIFF");
  }
  Grid<std::uint8_t> out(p.width, p.height);
  auto src = p.planes[0].values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<std::uint8_t>(src[i]);
  return out;
}

inline void write_gray8(const Grid<std::uint8_t>& grid, const std::filesystem::path& path) {
  if (format_for(path) == ImageFormat::Png) {
    write_png_gray8(grid, path);
  } else {
    write_tiff_plane(grid, path);
  }
}

}  // namespace detail

/// Loads one nephrin-channel plane from a TIFF.
///
/// Channels come from samples-per-pixel when a page has more than one sample.
/// Otherwise an ImageJ hyperstack description (`channels=N`) is honored, with
/// pages ordered channel-fastest. Without either, every page is a z slice of
/// a single channel. 8- and 16-bit data are scaled to [0, 1].
inline Image load_tiff(const std::filesystem::path& path, std::size_t channel = 0,
                       ZSelection z = ZSelection::max_project(),
                       double pixel_size_um = kDefaultPixelSizeUm) {
  if (!(pixel_size_um > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "pixel size must be positive");
  }
  std::optional<int> imagej_channels;
  auto pages = detail::read_tiff_pages(path, &imagej_channels);
  const auto& first = pages.front();
  for (const auto& p : pages) {
    if (p.width != first.width || p.height != first.height || p.bits != first.bits ||
        p.samples != first.samples) {
      throw Error(ErrorCode::MalformedTiff, path.string() + ": pages differ in layout");
    }
  }
  if (first.bits == 32) {
    throw Error(ErrorCode::MalformedTiff, path.string() + ": intensity images must be 8 or 16 bit");
  }

  std::size_t channels = 1;
  std::size_t pages_per_channel_step = 1;
  if (first.samples > 1) {
    channels = static_cast<std::size_t>(first.samples);
  } else if (imagej_channels && *imagej_channels > 1) {
    channels = static_cast<std::size_t>(*imagej_channels);
    pages_per_channel_step = channels;
    if (pages.size() % channels != 0) {
      throw Error(ErrorCode::MalformedTiff, path.string() + ": page count is not a multiple of channels");
    }
  }
  if (channel >= channels) {
    throw Error(ErrorCode::ChannelOutOfRange, "channel " + std::to_string(channel) + " of " +
                                                  std::to_string(channels));
  }
  const std::size_t depth = pages.size() / pages_per_channel_step;
  if (z.mode == ZSelection::Mode::Slice && z.slice >= depth) {
    throw Error(ErrorCode::SliceOutOfRange, "slice " + std::to_string(z.slice) + " of " +
                                                std::to_string(depth));
  }

  const double scale = first.bits == 8 ? 255.0 : first.bits == 16 ? 65535.0 : 4294967295.0;
  auto to_image = [&](const detail::TiffPage& p) {
    const auto& plane = first.samples > 1 ? p.planes[channel] : p.planes[0];
    Image img{Grid<float>(p.width, p.height), pixel_size_um};
    auto src = plane.values();
    auto dst = img.pixels.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
      double v = static_cast<double>(src[i]) / scale;
      dst[i] = static_cast<float>(p.min_is_white ? 1.0 - v : v);
    }
    return img;
  };
  auto page_index = [&](std::size_t zi) {
    return first.samples > 1 ? zi : zi * pages_per_channel_step + channel;
  };

  if (z.mode == ZSelection::Mode::Slice) return to_image(pages[page_index(z.slice)]);
  ImageStack stack;
  stack.slices.reserve(depth);
  for (std::size_t zi = 0; zi < depth; ++zi) stack.slices.push_back(to_image(pages[page_index(zi)]));
  return max_project(stack);
}

inline SemanticMap read_semantic_map(const std::filesystem::path& path) {
  auto raw = detail::read_gray8(path, ErrorCode::MalformedMask);
  if (raw.empty()) throw Error(ErrorCode::MalformedMask, path.string() + ": empty extent");
  SemanticMap map{Grid<SemanticClass>(raw.width(), raw.height()), 1};
  auto src = raw.values();
  auto dst = map.labels.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] > 2) {
      throw Error(ErrorCode::MalformedMask,
                  path.string() + ": class value " + std::to_string(src[i]) + " outside {0,1,2}");
    }
    dst[i] = static_cast<SemanticClass>(src[i]);
  }
  return map;
}

inline void write_semantic_map(const SemanticMap& map, const std::filesystem::path& path) {
  Grid<std::uint8_t> raw(map.width(), map.height());
  auto src = map.labels.values();
  auto dst = raw.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<std::uint8_t>(src[i]);
  detail::write_gray8(raw, path);
}

/// Instance maps are always 32-bit TIFF.
inline void write_instance_map(const InstanceMap& map, const std::filesystem::path& path) {
  detail::write_tiff_plane(map.labels, path);
}

/// Reads a 32-bit instance map. Labels must be contiguous 1..max.
inline InstanceMap read_instance_map(const std::filesystem::path& path) {
  std::vector<detail::TiffPage> pages;
  try {
    pages = detail::read_tiff_pages(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FileNotFound) throw;
    throw Error(ErrorCode::MalformedMask, e.what());
  }
  auto& p = pages.front();
  if (p.samples != 1) throw Error(ErrorCode::MalformedMask, path.string() + ": expected one channel");
  InstanceMap map{std::move(p.planes[0]), 0};
  std::uint32_t max_label = 0;
  for (auto v : map.labels.values()) max_label = std::max(max_label, v);
  std::vector<bool> seen(static_cast<std::size_t>(max_label) + 1, false);
  for (auto v : map.labels.values()) seen[v] = true;
  for (std::uint32_t k = 1; k <= max_label; ++k) {
    if (!seen[k]) {
      throw Error(ErrorCode::MalformedMask,
                  path.string() + ": instance labels are not contiguous (missing " + std::to_string(k) + ")");
    }
  }
  map.count = max_label;
  return map;
}

/// ROI masks are stored as 0/255.
inline void write_roi_mask(const RoiMask& roi, const std::filesystem::path& path) {
  Grid<std::uint8_t> raw(roi.width(), roi.height());
  auto src = roi.bits.values();
  auto dst = raw.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 255 : 0;
  detail::write_gray8(raw, path);
}

inline RoiMask read_roi_mask(const std::filesystem::path& path) {
  auto raw = detail::read_gray8(path, ErrorCode::MalformedMask);
  BinaryMask bits(raw.width(), raw.height());
  auto src = raw.values();
  auto dst = bits.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] != 0 && src[i] != 255) {
      throw Error(ErrorCode::MalformedMask, path.string() + ": ROI values must be 0 or 255");
    }
    dst[i] = src[i] ? 1 : 0;
  }
  return make_roi(std::move(bits));
}

}  // namespace amap
