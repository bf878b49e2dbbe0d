#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "amap/imgio.hpp"
#include "test_util.hpp"

using namespace amap;
using testutil::RawPage;
using testutil::TempDir;
using testutil::write_tiff;
using testutil::expect_code;

namespace {

Image image_of(int w, int h, std::vector<float> v) {
  Image img{Grid<float>(w, h), kDefaultPixelSizeUm};
  std::copy(v.begin(), v.end(), img.pixels.values().begin());
  return img;
}

// Little-endian TIFF whose single IFD declares a 0 x 0 image.
void write_empty_extent_tiff(const std::filesystem::path& p) {
  std::vector<unsigned char> b = {'I', 'I', 42, 0, 8, 0, 0, 0};
  auto u16 = [&](std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back(v >> 8);
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
  };
  auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t value) {
    u16(tag);
    u16(type);
    u32(1);
    if (type == 3) {
      u16(static_cast<std::uint16_t>(value));
      u16(0);
    } else {
      u32(value);
    }
  };
  u16(7);
  entry(256, 4, 0);
  entry(257, 4, 0);
  entry(258, 3, 8);
  entry(262, 3, 1);
  entry(273, 4, 0);
  entry(277, 3, 1);
  entry(279, 4, 0);
  u32(0);
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(MaxProject, DepthOneIsIdentity) {
  ImageStack s{{image_of(2, 1, {0.25f, 0.75f})}};
  EXPECT_EQ(max_project(s), s.slices[0]);
}

TEST(MaxProject, PerPixelMaximum) {
  ImageStack s{{image_of(2, 2, {1, 0, 0, 1}), image_of(2, 2, {0, 1, 1, 0})}};
  EXPECT_EQ(max_project(s), image_of(2, 2, {1, 1, 1, 1}));
}

TEST(MaxProject, AllZeroStack) {
  ImageStack s{{image_of(3, 2, std::vector<float>(6, 0)), image_of(3, 2, std::vector<float>(6, 0)),
                image_of(3, 2, std::vector<float>(6, 0))}};
  EXPECT_EQ(max_project(s), image_of(3, 2, std::vector<float>(6, 0)));
}

TEST(MaxProject, RandomStacksDominateEverySliceAndHitOne) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    ImageStack s;
    const int depth = 1 + trial % 5;
    for (int z = 0; z < depth; ++z) {
      Image img{Grid<float>(5, 4), kDefaultPixelSizeUm};
      for (auto& v : img.pixels.values()) v = u(rng);
      s.slices.push_back(img);
    }
    const auto m = max_project(s);
    for (std::size_t i = 0; i < m.pixels.size(); ++i) {
      bool hit = false;
      for (const auto& sl : s.slices) {
        EXPECT_GE(m.pixels[i], sl.pixels[i]);
        hit |= m.pixels[i] == sl.pixels[i];
      }
      EXPECT_TRUE(hit);
    }
  }
}

TEST(MaxProject, RejectsMismatchedSlices) {
  ImageStack s{{image_of(2, 1, {0, 0}), image_of(1, 2, {0, 0})}};
  EXPECT_THROW(max_project(s), Error);
  EXPECT_THROW(max_project(ImageStack{}), Error);
}

TEST(LoadTiff, SinglePageIsReturnedAsIs) {
  TempDir dir;
  write_tiff<std::uint8_t>(dir / "a.tif", {{3, 2, 1, {0, 51, 102, 153, 204, 255}}});
  const auto img = load_tiff(dir / "a.tif");
  ASSERT_EQ(img.width(), 3);
  ASSERT_EQ(img.height(), 2);
  EXPECT_FLOAT_EQ(img.pixels(1, 0), 0.2f);
  EXPECT_FLOAT_EQ(img.pixels(2, 1), 1.0f);
  EXPECT_DOUBLE_EQ(img.pixel_size_um, 0.0227);
}

TEST(LoadTiff, TwoSliceStackMaxProjects) {
  // slice0 = [[0.1, 0.5]], slice1 = [[0.3, 0.2]] in 16-bit units
  auto q = [](double v) { return static_cast<std::uint16_t>(std::lround(v * 65535)); };
  TempDir dir;
  write_tiff<std::uint16_t>(dir / "z.tif", {{2, 1, 1, {q(0.1), q(0.5)}}, {2, 1, 1, {q(0.3), q(0.2)}}});
  const auto img = load_tiff(dir / "z.tif");
  EXPECT_NEAR(img.pixels(0, 0), 0.3, 2e-5);
  EXPECT_NEAR(img.pixels(1, 0), 0.5, 2e-5);

  const auto s1 = load_tiff(dir / "z.tif", 0, ZSelection::single(1));
  EXPECT_NEAR(s1.pixels(0, 0), 0.3, 2e-5);
  EXPECT_NEAR(s1.pixels(1, 0), 0.2, 2e-5);
  expect_code(ErrorCode::SliceOutOfRange, [&] { load_tiff(dir / "z.tif", 0, ZSelection::single(2)); });
}

TEST(LoadTiff, SamplesPerPixelAreChannels) {
  TempDir dir;
  // 2x1 pixels, 3 samples: pixel0 = (10, 20, 30), pixel1 = (40, 50, 60)
  RawPage<std::uint8_t> page{2, 1, 3, {10, 20, 30, 40, 50, 60}};
  write_tiff<std::uint8_t>(dir / "rgb.tif", {page});
  write_tiff<std::uint8_t>(dir / "planar.tif", {page}, "", true);
  for (const char* name : {"rgb.tif", "planar.tif"}) {
    const auto c1 = load_tiff(dir / name, 1);
    EXPECT_FLOAT_EQ(c1.pixels(0, 0), 20.0f / 255.0f) << name;
    EXPECT_FLOAT_EQ(c1.pixels(1, 0), 50.0f / 255.0f) << name;
    expect_code(ErrorCode::ChannelOutOfRange, [&] { load_tiff(dir / name, 3); });
  }
}

TEST(LoadTiff, SamplesTakePrecedenceOverPages) {
  TempDir dir;
  // Two pages, each 2 samples: channel 1 of the max projection.
  write_tiff<std::uint8_t>(dir / "zc.tif", {{1, 1, 2, {0, 100}}, {1, 1, 2, {255, 50}}});
  EXPECT_FLOAT_EQ(load_tiff(dir / "zc.tif", 1).pixels(0, 0), 100.0f / 255.0f);
  EXPECT_FLOAT_EQ(load_tiff(dir / "zc.tif", 0).pixels(0, 0), 1.0f);
}

TEST(LoadTiff, ImageJHyperstackPagesAreChannelFastest) {
  TempDir dir;
  // pages: z0c0, z0c1, z1c0, z1c1
  write_tiff<std::uint8_t>(dir / "ij.tif", {{1, 1, 1, {10}}, {1, 1, 1, {200}}, {1, 1, 1, {30}}, {1, 1, 1, {100}}},
                           "ImageJ=1.53t\nimages=4\nchannels=2\nslices=2\n");
  EXPECT_FLOAT_EQ(load_tiff(dir / "ij.tif", 0).pixels(0, 0), 30.0f / 255.0f);
  EXPECT_FLOAT_EQ(load_tiff(dir / "ij.tif", 1).pixels(0, 0), 200.0f / 255.0f);
  EXPECT_FLOAT_EQ(load_tiff(dir / "ij.tif", 1, ZSelection::single(1)).pixels(0, 0), 100.0f / 255.0f);
  expect_code(ErrorCode::ChannelOutOfRange, [&] { load_tiff(dir / "ij.tif", 2); });
}

TEST(LoadTiff, Errors) {
  TempDir dir;
  expect_code(ErrorCode::FileNotFound, [&] { load_tiff(dir / "missing.tif"); });
  std::ofstream(dir / "junk.tif") << "definitely not a tiff";
  expect_code(ErrorCode::MalformedTiff, [&] { load_tiff(dir / "junk.tif"); });
  write_tiff<std::uint32_t>(dir / "wide.tif", {{1, 1, 1, {5}}});
  expect_code(ErrorCode::MalformedTiff, [&] { load_tiff(dir / "wide.tif"); });
  write_tiff<std::uint8_t>(dir / "one.tif", {{1, 1, 1, {5}}});
  expect_code(ErrorCode::ChannelOutOfRange, [&] { load_tiff(dir / "one.tif", 1); });
}

TEST(LoadTiff, SameBytesSameImage) {
  TempDir dir;
  write_tiff<std::uint16_t>(dir / "d.tif", {{3, 3, 1, {0, 1, 2, 3, 4, 5, 6, 7, 65535}}});
  EXPECT_EQ(load_tiff(dir / "d.tif"), load_tiff(dir / "d.tif"));
}

TEST(SemanticMapIo, RoundTripTiffAndPng) {
  TempDir dir;
  const auto m = testutil::semantic_from({"0120", "2101", "1111", "0002"});
  for (const char* name : {"m.tif", "m.png", "m.TIFF"}) {
    write_semantic_map(m, dir / name);
    EXPECT_EQ(read_semantic_map(dir / name), m) << name;
  }
}

TEST(SemanticMapIo, RejectsOutOfRangeValue) {
  TempDir dir;
  write_tiff<std::uint8_t>(dir / "bad.tif", {{2, 1, 1, {1, 7}}});
  expect_code(ErrorCode::MalformedMask, [&] { read_semantic_map(dir / "bad.tif"); });
}

TEST(SemanticMapIo, RejectsEmptyExtent) {
  TempDir dir;
  write_empty_extent_tiff(dir / "empty.tif");
  expect_code(ErrorCode::MalformedMask, [&] { read_semantic_map(dir / "empty.tif"); });
}

TEST(SemanticMapIo, MissingFile) {
  TempDir dir;
  expect_code(ErrorCode::FileNotFound, [&] { read_semantic_map(dir / "nope.png"); });
}

TEST(SemanticMapIo, RejectsSixteenBitAndUnknownExtension) {
  TempDir dir;
  write_tiff<std::uint16_t>(dir / "w.tif", {{1, 1, 1, {1}}});
  expect_code(ErrorCode::MalformedMask, [&] { read_semantic_map(dir / "w.tif"); });
  expect_code(ErrorCode::IoError,
              [&] { write_semantic_map(testutil::semantic_from({"0"}), dir / "m.bmp"); });
}

TEST(InstanceMapIo, AllBackgroundRoundTrips) {
  TempDir dir;
  InstanceMap m{Grid<std::uint32_t>(5, 3), 0};
  write_instance_map(m, dir / "i.tif");
  EXPECT_EQ(read_instance_map(dir / "i.tif"), m);
}

TEST(InstanceMapIo, LabelsBeyondEightBitsRoundTrip) {
  TempDir dir;
  InstanceMap m{Grid<std::uint32_t>(20, 16), 300};
  for (std::uint32_t k = 1; k <= 300; ++k) m.labels[k - 1] = k;
  write_instance_map(m, dir / "i.tif");
  const auto back = read_instance_map(dir / "i.tif");
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.labels(19, 14), 300u);
}

TEST(InstanceMapIo, GapsInLabelsAreMalformed) {
  TempDir dir;
  InstanceMap m{Grid<std::uint32_t>(2, 1), 3};
  m.labels[0] = 1;
  m.labels[1] = 3;
  write_instance_map(m, dir / "gap.tif");
  expect_code(ErrorCode::MalformedMask, [&] { read_instance_map(dir / "gap.tif"); });
}

TEST(RoiMaskIo, RoundTripAndStoredAs255) {
  TempDir dir;
  const auto roi = make_roi(testutil::mask_from({"0110", "1111"}));
  for (const char* name : {"r.tif", "r.png"}) {
    write_roi_mask(roi, dir / name);
    EXPECT_EQ(read_roi_mask(dir / name), roi);
  }
  const auto raw = detail::read_gray8(dir / "r.tif", ErrorCode::MalformedMask);
  EXPECT_EQ(raw(1, 0), 255);
  EXPECT_EQ(raw(0, 0), 0);
}

TEST(RoiMaskIo, RejectsIntermediateValues) {
  TempDir dir;
  write_tiff<std::uint8_t>(dir / "r.tif", {{2, 1, 1, {0, 128}}});
  expect_code(ErrorCode::MalformedMask, [&] { read_roi_mask(dir / "r.tif"); });
}
