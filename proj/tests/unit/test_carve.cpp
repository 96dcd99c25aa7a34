#include <gtest/gtest.h>

#include <cmath>

#include "voxsketch/carve.hpp"
#include "voxsketch/dataset.hpp"
#include "voxsketch/render.hpp"

using namespace voxsketch;

namespace {

WorldGrid cuboid(int n, int i0, int i1, int j0, int j1, int k0, int k1) {
  WorldGrid g(n, GridFrame{}, 0.0f);
  for (int k = k0; k <= k1; ++k)
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) g.at(i, j, k) = 1.0f;
  return g;
}

CarveJob exact_job(const WorldGrid& truth, const std::vector<int>& views, ProjectionMode mode, int size,
                   double half_height = 0.0) {
  CarveJob job;
  job.mode = mode;
  job.frame = truth.frame();
  job.resolution = truth.resolution();
  job.ortho_half_height = half_height;
  for (int v : views) {
    const Camera cam = viewpoint_camera(ViewpointId(v), truth.frame());
    job.views.push_back({exact_mask(truth, cam, size, size, mode, half_height), cam});
  }
  return job;
}

/// Independent count of voxels set in both / either grid.
double oracle_iou(const WorldGrid& a, const WorldGrid& b) {
  long both = 0, either = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.values()[i] >= 0.5f, y = b.values()[i] >= 0.5f;
    both += x && y;
    either += x || y;
  }
  return either ? static_cast<double>(both) / either : 1.0;
}

bool is_superset(const WorldGrid& carved, const WorldGrid& truth) {
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth.values()[i] >= 0.5f && carved.values()[i] < 0.5f) return false;
  return true;
}

std::vector<WorldGrid> grammar_fixtures(int count) {
  const DatasetConfig dc = DatasetConfig::toy();
  std::vector<WorldGrid> out;
  for (int s = 0; s < count; ++s) {
    const ShapeProgram p = symmetrize(generate_program(mix_seed(31, s), dc.grammar));
    out.push_back(realize(p, 16));
  }
  return out;
}

}  // namespace

TEST(Carve, AxisAlignedCuboidFromThreeOrthographicViewsIsExact) {
  const WorldGrid truth = cuboid(16, 3, 10, 5, 12, 2, 7);
  // Window equal to the frame so pixel columns align with voxel columns.
  const CarveJob job = exact_job(truth, {8, 11, 12}, ProjectionMode::Orthographic, 64, truth.frame().half_extent());
  const WorldGrid carved = carve(job);
  EXPECT_EQ(oracle_iou(carved, truth), 1.0);
  EXPECT_EQ(iou(carved, truth), 1.0);
}

TEST(Carve, SphereFromThreeOrthographicViewsMatchesTriCylinderRatio) {
  const int n = 48;
  WorldGrid sphere(n, GridFrame{}, 0.0f);
  const double r = 0.8;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (norm(sphere.frame().voxel_center(n, i, j, k)) <= r) sphere.at(i, j, k) = 1.0f;
  const WorldGrid carved =
      carve(exact_job(sphere, {8, 11, 12}, ProjectionMode::Orthographic, 192, sphere.frame().half_extent()));
  EXPECT_TRUE(is_superset(carved, sphere));
  // Sphere volume over the intersection of three orthogonal cylinders.
  const double expected = (4.0 / 3.0 * M_PI) / (8.0 * (2.0 - std::sqrt(2.0)));
  EXPECT_NEAR(iou(carved, sphere), expected, 0.03);
}

TEST(Carve, ExactMasksNeverCarveTrueVoxelsAndAddingViewsOnlyHelps) {
  const auto fixtures = grammar_fixtures(12);
  for (ProjectionMode mode : {ProjectionMode::Perspective, ProjectionMode::Orthographic}) {
    for (std::size_t s = 0; s < fixtures.size(); ++s) {
      const WorldGrid& truth = fixtures[s];
      Rng rng(s);
      std::vector<int> order(13);
      for (int i = 0; i < 13; ++i) order[i] = i;
      for (int i = 12; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
      double prev = -1.0;
      std::size_t prev_count = truth.size() + 1;
      for (int count = 1; count <= 5; ++count) {
        const WorldGrid carved =
            carve(exact_job(truth, std::vector<int>(order.begin(), order.begin() + count), mode, 64));
        EXPECT_TRUE(is_superset(carved, truth)) << s << " views " << count;
        const double q = iou(carved, truth);
        EXPECT_GE(q, prev) << s << " views " << count;
        EXPECT_LE(carved.occupied_count(), prev_count);
        prev = q;
        prev_count = carved.occupied_count();
      }
    }
  }
}

TEST(Carve, Idempotent) {
  const WorldGrid truth = grammar_fixtures(1)[0];
  const CarveJob job = exact_job(truth, {0, 9, 12}, ProjectionMode::Perspective, 64);
  EXPECT_EQ(carve(job), carve(job));
}

TEST(Carve, HiddenCavityIsNeverRecovered) {
  WorldGrid truth = cuboid(16, 3, 12, 3, 12, 3, 12);
  for (int k = 6; k <= 9; ++k)
    for (int j = 6; j <= 9; ++j)
      for (int i = 6; i <= 9; ++i) truth.at(i, j, k) = 0.0f;
  std::vector<int> all(13);
  for (int i = 0; i < 13; ++i) all[i] = i;
  const WorldGrid persp = carve(exact_job(truth, all, ProjectionMode::Perspective, 128));
  EXPECT_TRUE(is_superset(persp, truth));
  EXPECT_LT(iou(persp, truth), 1.0);
  // Aligned orthographic axis views carve exactly the solid box.
  const WorldGrid ortho =
      carve(exact_job(truth, {8, 9, 10, 11, 12}, ProjectionMode::Orthographic, 64, truth.frame().half_extent()));
  const double solid = 1000.0, hollow = 1000.0 - 64.0;
  EXPECT_NEAR(iou(ortho, truth), hollow / solid, 1e-12);
}

TEST(Carve, CornerViewDrawingOfACubeGivesASupersetCone) {
  const GridFrame frame{};
  const Mesh cube = make_box({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5});
  const WorldGrid truth = voxelize_mesh_in_frame(cube, frame, 16);
  const Camera cam = viewpoint_camera(ViewpointId(0), frame);
  const LineDrawing d = draw_mesh(cube, cam, frame, 64, 64, ContourConfig{});
  const WorldGrid carved = carve_from_drawings({{d, cam}}, ProjectionMode::Perspective, frame, 16);
  EXPECT_TRUE(is_superset(carved, truth));
  EXPECT_GT(carved.occupied_count(), truth.occupied_count());  // one view leaves the depth extrusion
}

TEST(Carve, Errors) {
  EXPECT_THROW(carve(CarveJob{}), Error);
  EXPECT_THROW(carve_from_drawings({}, ProjectionMode::Perspective, GridFrame{}, 16), Error);
  EXPECT_THROW(parse_projection_mode("fisheye"), Error);
  EXPECT_EQ(parse_projection_mode("orthographic"), ProjectionMode::Orthographic);
}

TEST(Carve, OffImageVoxelsAreCarved) {
  WorldGrid truth(16, GridFrame{}, 1.0f);
  // A tiny orthographic window sees only the central columns.
  CarveJob job;
  job.mode = ProjectionMode::Orthographic;
  job.ortho_half_height = 0.25;
  const Camera cam = viewpoint_camera(ViewpointId(12), job.frame);
  job.views.push_back({Mask(8, 8, 1), cam});
  const WorldGrid carved = carve(job);
  EXPECT_GT(carved.occupied_count(), 0u);
  EXPECT_LT(carved.occupied_count(), truth.size());
}
