"""synthperson: synthetic pedestrian datasets with pixel-perfect annotation.

A self-contained simulator that generates parametric pedestrians, walks
them through multi-camera virtual scenes, rasterizes RGB + instance-ID
frames, crops filtered labeled samples into a Market-style dataset, and
evaluates cross-camera retrieval (CMC / mAP) with classical features.
"""

from .annotate import (
    FilterPolicy,
    InstanceObservation,
    apply_filter,
    crop_sample,
    enlarge_bbox,
    extract_instances,
    occlusion_ratio,
)
from .dataset import (
    CroppedSample,
    DatasetManifest,
    DatasetStats,
    compute_stats,
    emit_dataset,
    load_manifest,
    select_per_identity,
)
from .errors import (
    ConfigurationError,
    IntegrityError,
    SynthPersonError,
    UndefinedVisibilityError,
    ValidationError,
)
from .evalkit import (
    Batch,
    EvalResult,
    balanced_batches,
    camera_normalize,
    evaluate,
    extract_features,
)
from .identities import (
    ACCESSORY_KINDS,
    CLOTHING_KINDS,
    IdentitySpec,
    generate_identities,
    load_cohort,
    make_hard_group,
    save_cohort,
)
from .pipeline import SynthRun, synthesize
from .render import Frame, SceneRenderer, portrait_frame, render_prims
from .textures import TextureCorpus, TextureRef, rasterize_texture, sample_texture
from .world import (
    AnimationCycle,
    CameraSpec,
    IlluminationSchedule,
    Obstacle,
    PathSpec,
    SceneSpec,
    World,
    WorldState,
    assign_paths,
    build_world,
    illumination_at,
    step,
)

__version__ = "0.1.0"
