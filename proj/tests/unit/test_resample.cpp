#include <gtest/gtest.h>

#include "voxsketch/resample.hpp"

using namespace voxsketch;

namespace {

double smooth_field(const Vec3& p) {
  return 0.5 + 0.25 * std::sin(1.3 * p.x + 0.4) * std::cos(0.9 * p.y - 0.2) +
         0.2 * std::sin(0.7 * p.z + 1.0);
}

WorldGrid sample_field(int n, const GridFrame& f) {
  WorldGrid g(n, f);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) g.at(i, j, k) = static_cast<float>(smooth_field(f.voxel_center(n, i, j, k)));
  return g;
}

}  // namespace

TEST(Resample, ConstantWorldFieldPreservedInsideGrid) {
  const GridFrame frame;
  const WorldGrid w(16, frame, 0.625f);
  const Camera cam = viewpoint_camera(ViewpointId(0), frame);
  const FrustumGrid fr = resample_world_to_frustum(w, cam, 16, 32, 32);
  const Vec3 lo = frame.lo(), hi = frame.hi();
  int inside = 0;
  for (int s = 0; s < 16; ++s)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const Vec3 p = fr.cell_center(s, y, x);
        const bool in = p.x >= lo.x && p.y >= lo.y && p.z >= lo.z && p.x <= hi.x && p.y <= hi.y && p.z <= hi.z;
        EXPECT_EQ(fr.at(s, y, x), in ? 0.625f : 0.0f);
        inside += in;
      }
  EXPECT_GT(inside, 1000);
}

TEST(Resample, ConstantFrustumFieldPreservedInsideFrustum) {
  const GridFrame frame;
  const Camera cam = viewpoint_camera(ViewpointId(6), frame);
  FrustumGrid fr = make_frustum(cam, frame, 16, 16, 16);
  for (float& v : fr.values()) v = 0.375f;
  const WorldGrid w = resample_frustum_to_world(fr, frame, 16, 0.0f);
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        const Projection p = project(cam, frame.voxel_center(16, i, j, k), 16, 16);
        const bool in = p.px >= 0 && p.px <= 16 && p.py >= 0 && p.py <= 16;
        EXPECT_EQ(w.at(i, j, k), in ? 0.375f : 0.0f);
      }
}

TEST(Resample, EmptyFrustumGivesEmptyWorld) {
  const GridFrame frame;
  const FrustumGrid fr = make_frustum(viewpoint_camera(ViewpointId(3), frame), frame, 8, 8, 8);
  const WorldGrid w = resample_frustum_to_world(fr, frame, 12);
  EXPECT_EQ(w.occupied_count(0.0f + 1e-9f), 0u);
}

TEST(Resample, SmoothRoundTrip) {
  const GridFrame frame{{0.2, -0.1, 0.4}, 1.6};
  const WorldGrid w = sample_field(16, frame);
  for (int id : {0, 5, 8, 12}) {
    const Camera cam = viewpoint_camera(ViewpointId(id), frame);
    const FrustumGrid fr = resample_world_to_frustum(w, cam, 32, 64, 64);
    const WorldGrid back = resample_frustum_to_world(fr, w);
    double err = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) err += std::abs(back.values()[i] - w.values()[i]);
    EXPECT_LT(err / w.size(), 0.05) << "view " << id;
  }
}

TEST(Resample, DoubleRoundTripIdempotent) {
  const GridFrame frame;
  const WorldGrid w = sample_field(16, frame);
  const Camera cam = viewpoint_camera(ViewpointId(1), frame);
  const FrustumGrid f1 = resample_world_to_frustum(w, cam, 16, 32, 32);
  const WorldGrid w1 = resample_frustum_to_world(f1, frame, 16);
  const FrustumGrid f2 = resample_world_to_frustum(w1, cam, 16, 32, 32);
  double err = 0.0;
  for (std::size_t i = 0; i < f1.values().size(); ++i) err += std::abs(f1.values()[i] - f2.values()[i]);
  EXPECT_LT(err / f1.values().size(), 0.05);
}

TEST(Resample, SingleVoxelLandsOnItsProjection) {
  const GridFrame frame;
  const int n = 16;
  WorldGrid w(n, frame);
  w.at(11, 4, 9) = 1.0f;
  const Vec3 c = frame.voxel_center(n, 11, 4, 9);
  for (int id = 0; id < 13; ++id) {
    const Camera cam = viewpoint_camera(ViewpointId(id), frame);
    const FrustumGrid fr = resample_world_to_frustum(w, cam, 32, 64, 64);
    const Projection pc = project(cam, c, 64, 64);
    int nonzero = 0;
    for (int s = 0; s < 32; ++s)
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
          if (fr.at(s, y, x) == 0.0f) continue;
          ++nonzero;
          // Trilinear support is one voxel either way; bound by its image footprint.
          const Projection pp = project(cam, fr.cell_center(s, y, x), 64, 64);
          const double footprint = frame.voxel_size(n) * 64 / (2 * cam.tan_half_fov() * pp.depth) * std::sqrt(3.0);
          EXPECT_LE(std::abs(pp.px - pc.px), footprint + 1.0);
          EXPECT_LE(std::abs(pp.py - pc.py), footprint + 1.0);
        }
    EXPECT_GT(nonzero, 0) << "view " << id;
  }
}

TEST(Resample, ValuesStayInUnitInterval) {
  Rng rng(5);
  const GridFrame frame;
  WorldGrid w(12, frame);
  for (float& v : w.values()) v = static_cast<float>(rng.uniform());
  const Camera cam = viewpoint_camera(ViewpointId(4), frame);
  const FrustumGrid fr = resample_world_to_frustum(w, cam, 12, 20, 20);
  for (float v : fr.values()) EXPECT_TRUE(v >= 0.0f && v <= 1.0f);
  const WorldGrid back = resample_frustum_to_world(fr, frame, 12);
  for (float v : back.values()) EXPECT_TRUE(v >= 0.0f && v <= 1.0f);
}

TEST(Resample, CameraInsideBoundingSphereThrows) {
  const GridFrame frame;
  Camera cam;
  cam.eye = {0.2, -1.0, 0.0};
  cam.target = {0, 0, 0};
  EXPECT_THROW(resample_world_to_frustum(WorldGrid(8, frame), cam, 8, 8, 8), Error);
}
