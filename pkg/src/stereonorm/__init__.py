"""Dense surface-normal estimation from rectified-stereo disparity maps.

The estimation pipeline fits a local affine model to disparity
differences around each pixel (a fixed precomputed-kernel convolution or
an adaptive star-shaped support that stops at depth discontinuities) and
converts the fitted parameters to a unit, camera-facing surface normal in
closed form.  PCA plane fitting and a tangent cross product are included
as reference baselines, together with a raycasting ground-truth bench and
an angular-error evaluation harness.
"""

from .adaptive import (StarConfig, depth_laplacian, estimate_affine_adaptive,
                       estimate_normals_adaptive, ray_offsets, star_trace)
from .baselines import (eig3_symmetric, estimate_normals_cross,
                        estimate_normals_pca)
from .bench import FrameTimeStats, run_bench, time_callable
from .config import load_rig, load_scene, parse_rig, parse_scene
from .estimators import (AdaptiveNormalEstimator, AffineNormalEstimator,
                         BaseNormalEstimator, CrossProductNormalEstimator,
                         PCANormalEstimator, as_rig, as_scalar_field)
from .evaluation import (ErrorStats, angular_error_map, compare_table,
                         depth_discontinuity_band, stats_records, summarize)
from .fields import AffineField, NormalField, ScalarField
from .formats import FormatError
from .geometry import (StereoRig, affine_from_normal, affine_gradient_to_model,
                       depth_field, depth_to_disparity, disparity_to_depth,
                       normal_from_affine, orient_toward_camera, pixel_grid,
                       project_left, project_right, triangulate,
                       triangulate_grid)
from .kernels import (DegenerateSupportError, KernelSpec, PrecomputedKernels,
                      build_kernels, convolve_affine, estimate_affine_direct,
                      estimate_normals_fixed, format_kernel_dump)
from .synth import (Box, GroundTruth, Plane, SceneSpec, Sphere,
                    add_gaussian_noise, make_plane_scene, raycast)

__version__ = "0.1.0"
