#pragma once

#include "voxsketch/camera.hpp"
#include "voxsketch/grid.hpp"

namespace voxsketch {

/// Empty frustum lattice for `cam`, with near/far tangent to the frame's
/// bounding sphere and slices uniform in view-axis depth.
FrustumGrid make_frustum(const Camera& cam, const GridFrame& frame, int depth, int height,
                         int width);

/// Trilinear lookup of the world grid at every frustum cell center; cells
/// outside the grid's cube receive 0.
FrustumGrid resample_world_to_frustum(const WorldGrid& world, const Camera& cam, int depth,
                                      int height, int width);

/// Trilinear lookup of the frustum at every world voxel center; voxels the
/// frustum does not cover receive `fill`.
WorldGrid resample_frustum_to_world(const FrustumGrid& frustum, const GridFrame& frame,
                                    int resolution, float fill = 0.0f);

/// As above, but uncovered voxels keep their value from `background`.
WorldGrid resample_frustum_to_world(const FrustumGrid& frustum, const WorldGrid& background);

}  // namespace voxsketch
