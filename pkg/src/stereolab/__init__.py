"""stereolab: stereo-vision geometry and dataset-analysis toolkit.

Library layout:

- camera: pinhole stereo model, disparity/depth/3D conversions, rig JSON
- maps: dense disparity / depth / normal map types with validity masks
- d2n: disparity-to-normal transform and the (alpha, beta) angle encoding
- stats: dataset distribution histograms and overexposure summaries
- metrics: endpoint error and normal angle error statistics
- losses: smooth-L1 kernels, gt pyramids, multi-scale and normal losses
- scene: analytic ray-cast stereo renderer with exact ground truth
- pointcloud: reconstruction and PLY import/export
- formats: PFM and PNG readers/writers
- cli: batch command-line front end
"""

from .camera import (
    EPSILON_DISPARITY,
    CameraIntrinsics,
    Pixel,
    Point3D,
    StereoRig,
    backproject,
    backproject_depth_map,
    depth_map_to_disparity_map,
    depth_to_disparity,
    disparity_map_to_depth_map,
    disparity_to_depth,
    load_rig,
    project,
    rig_from_dict,
    rig_to_dict,
    save_rig,
)
from .d2n import (
    D2NConfig,
    NormalAngles,
    angles_to_normal,
    d2n_transform,
    normal_map_angles,
    normal_to_angles,
    normalize_normals,
)
from .losses import (
    DEFAULT_LOSS_WEIGHTS,
    PYRAMID_LEVELS,
    LossPyramid,
    build_gt_pyramid,
    multiscale_disparity_loss,
    normal_loss,
    scale_loss,
    smooth_l1,
)
from .maps import DepthMap, DisparityMap, NormalMap, erode_mask
from .metrics import (
    NormalErrorStats,
    angle_error_map,
    disparity_error_map,
    epe,
    normal_angle_errors,
)
from .pointcloud import (
    PlyParseError,
    PointCloud,
    export_ply,
    export_ply_file,
    import_ply,
    import_ply_file,
    reconstruct,
)
from .scene import (
    Box,
    Plane,
    RenderOutput,
    SceneSpec,
    Sphere,
    analytic_normal_map,
    analytic_normal_oracle,
    load_scene,
    render_stereo,
    save_scene,
    scene_from_dict,
    scene_to_dict,
)
from .stats import (
    GrayImage,
    Histogram1D,
    Histogram2D,
    OverexposureStats,
    brightness_joint_histogram,
    disparity_histogram_single,
    merge_histograms,
    normal_angle_histogram,
    normal_angle_histogram_single,
    normalized_disparity_histogram,
    overexposure_stats,
    rgb_to_gray,
)

__version__ = "0.1.0"
