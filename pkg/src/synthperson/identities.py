"""Parametric pedestrian identity generation.

Cohorts are fully determined by (seed, arguments, corpus): every identity's
randomness is keyed by its id, so partitioned or parallel generation yields
the same specs.  Hard-sample groups are sets of near-identical identities
that differ pairwise in one or two appearance slots only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ValidationError
from .seeding import rng_for
from .textures import PatchSource, ProceduralSource, TextureCorpus, TextureRef, sample_texture

CLOTHING_KINDS = ("tshirt", "jacket", "dress", "shorts", "trousers", "skirt")
ACCESSORY_KINDS = (
    "mask",
    "glasses",
    "hat",
    "earphones",
    "scarf",
    "bag",
    "backpack",
    "handbag",
    "umbrella",
)
MAX_ACCESSORIES = 3
ACCESSORY_PROB = 0.15
HARD_GROUP_SIZE = 5

# Fixed 8-entry skin palette, light to dark.
SKIN_PALETTE = (
    (0.96, 0.87, 0.78),
    (0.93, 0.80, 0.68),
    (0.88, 0.72, 0.58),
    (0.80, 0.62, 0.47),
    (0.70, 0.52, 0.38),
    (0.58, 0.42, 0.30),
    (0.46, 0.32, 0.22),
    (0.35, 0.24, 0.16),
)


@dataclass(frozen=True)
class IdentitySpec:
    id: int
    group_id: Optional[int]
    height: float  # meters
    build: float  # 0 slim .. 1 heavy
    skin_tone: int  # index into SKIN_PALETTE
    clothing_kind: str
    upper_texture: TextureRef
    lower_texture: TextureRef
    accessories: frozenset
    hue_shift: float  # degrees, applied to both textures

    def __post_init__(self):
        if self.id < 1:
            raise ValidationError(f"identity id must be >= 1, got {self.id}")
        if not 1.45 <= self.height <= 1.95:
            raise ValidationError(f"height {self.height} outside [1.45, 1.95]")
        if not 0.0 <= self.build <= 1.0:
            raise ValidationError(f"build {self.build} outside [0, 1]")
        if not 0 <= self.skin_tone < len(SKIN_PALETTE):
            raise ValidationError(f"skin_tone {self.skin_tone} outside palette")
        if self.clothing_kind not in CLOTHING_KINDS:
            raise ValidationError(f"unknown clothing kind {self.clothing_kind!r}")
        if len(self.accessories) > MAX_ACCESSORIES:
            raise ValidationError("at most 3 accessories per identity")
        for a in self.accessories:
            if a not in ACCESSORY_KINDS:
                raise ValidationError(f"unknown accessory {a!r}")
        if not -180.0 <= self.hue_shift < 180.0:
            raise ValidationError(f"hue_shift {self.hue_shift} outside [-180, 180)")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "group_id": self.group_id,
            "height": self.height,
            "build": self.build,
            "skin_tone": self.skin_tone,
            "clothing_kind": self.clothing_kind,
            "upper_texture": self.upper_texture.to_json(),
            "lower_texture": self.lower_texture.to_json(),
            "accessories": sorted(self.accessories),
            "hue_shift": self.hue_shift,
        }

    @staticmethod
    def from_json(obj: dict) -> "IdentitySpec":
        return IdentitySpec(
            id=obj["id"],
            group_id=obj["group_id"],
            height=obj["height"],
            build=obj["build"],
            skin_tone=obj["skin_tone"],
            clothing_kind=obj["clothing_kind"],
            upper_texture=TextureRef.from_json(obj["upper_texture"]),
            lower_texture=TextureRef.from_json(obj["lower_texture"]),
            accessories=frozenset(obj["accessories"]),
            hue_shift=obj["hue_shift"],
        )


def cohort_to_json(specs) -> str:
    """Canonical JSON array; byte-identical for identical cohorts."""
    return json.dumps([s.to_json() for s in specs], sort_keys=True, separators=(",", ":"))


def save_cohort(specs, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(cohort_to_json(specs))


def load_cohort(path: str):
    with open(path) as fh:
        return [IdentitySpec.from_json(o) for o in json.load(fh)]


def _wrap_hue(deg: float) -> float:
    return float((deg + 180.0) % 360.0 - 180.0)


def _sample_accessories(rng: np.random.Generator) -> frozenset:
    picked = [k for k in ACCESSORY_KINDS if rng.uniform() < ACCESSORY_PROB]
    if len(picked) > MAX_ACCESSORIES:
        keep = rng.choice(len(picked), size=MAX_ACCESSORIES, replace=False)
        picked = [picked[i] for i in sorted(keep)]
    return frozenset(picked)


def _corpus_for_mode(mode, corpus, random_corpus):
    if mode == "real":
        return corpus
    if mode == "random":
        return random_corpus
    return None


def _sample_base(
    ident: int,
    group_id,
    rng: np.random.Generator,
    texture_mode: str,
    accessories_enabled: bool,
    corpus,
    random_corpus,
    palette_preset: str,
) -> IdentitySpec:
    mode_corpus = _corpus_for_mode(texture_mode, corpus, random_corpus)
    return IdentitySpec(
        id=ident,
        group_id=group_id,
        height=float(rng.uniform(1.45, 1.95)),
        build=float(rng.uniform(0.0, 1.0)),
        skin_tone=int(rng.integers(0, len(SKIN_PALETTE))),
        clothing_kind=CLOTHING_KINDS[int(rng.integers(0, len(CLOTHING_KINDS)))],
        upper_texture=sample_texture(mode_corpus, texture_mode, rng, palette_preset),
        lower_texture=sample_texture(mode_corpus, texture_mode, rng, palette_preset),
        accessories=_sample_accessories(rng) if accessories_enabled else frozenset(),
        hue_shift=float(rng.uniform(-180.0, 180.0)),
    )


def _patch_slot_usable(ref: TextureRef, group_size: int) -> bool:
    if isinstance(ref.source, ProceduralSource):
        return True
    return ref.source.w > group_size


def _near_texture(ref: TextureRef, member: int) -> TextureRef:
    """Near-neighbor texture variant; distinct for distinct member indices."""
    src = ref.source
    if isinstance(src, ProceduralSource):
        first = list(src.palette[0])
        first[0] = (first[0] + (member + 1) * 0.04) % 1.0
        palette = (tuple(first),) + src.palette[1:]
        return TextureRef(ref.mode, ProceduralSource(palette, src.pattern))
    return TextureRef(
        ref.mode, PatchSource(src.path, src.x, src.y, max(1, src.w - (member + 1)), src.h)
    )


def _hue_delta(member: int, group_size: int) -> float:
    # Distinct nonzero offsets within +/-15 degrees, alternating sign.
    magnitude = 15.0 * (member + 1) / group_size
    return magnitude if member % 2 == 0 else -magnitude


def _toggle_accessory(accessories: frozenset, rng: np.random.Generator) -> frozenset:
    kind = ACCESSORY_KINDS[int(rng.integers(0, len(ACCESSORY_KINDS)))]
    toggled = set(accessories) ^ {kind}
    while len(toggled) > MAX_ACCESSORIES:
        toggled.remove(sorted(k for k in toggled if k != kind)[0])
    return frozenset(toggled)


def make_hard_group(base: IdentitySpec, group_size: int = HARD_GROUP_SIZE, seed: int = 0):
    """Spin one base identity into `group_size` near-identical variants.

    All members keep the base body parameters and clothing kind.  The group
    picks one primary slot (hue or one texture) that takes a distinct value
    per member, plus at most one secondary slot perturbed for roughly half
    the members, so pairwise spec differences stay within two slots.
    """
    if group_size < 2:
        raise ValidationError(f"hard group size must be >= 2, got {group_size}")
    rng = rng_for(seed, "hard-group", base.id)

    primary_slots = ["hue_shift"]
    if _patch_slot_usable(base.upper_texture, group_size):
        primary_slots.append("upper_texture")
    if _patch_slot_usable(base.lower_texture, group_size):
        primary_slots.append("lower_texture")
    primary = primary_slots[int(rng.integers(0, len(primary_slots)))]

    secondary_slots = [s for s in primary_slots if s != primary]
    if base.accessories:
        secondary_slots.append("accessories")
    secondary = (
        secondary_slots[int(rng.integers(0, len(secondary_slots)))] if secondary_slots else None
    )

    members = []
    for j in range(group_size):
        spec = replace(base, id=base.id + j)
        if primary == "hue_shift":
            spec = replace(spec, hue_shift=_wrap_hue(base.hue_shift + _hue_delta(j, group_size)))
        elif primary == "upper_texture":
            spec = replace(spec, upper_texture=_near_texture(base.upper_texture, j))
        else:
            spec = replace(spec, lower_texture=_near_texture(base.lower_texture, j))

        if secondary is not None and rng.uniform() < 0.5:
            if secondary == "hue_shift":
                delta = float(rng.uniform(3.0, 15.0)) * (1.0 if rng.uniform() < 0.5 else -1.0)
                spec = replace(spec, hue_shift=_wrap_hue(spec.hue_shift + delta))
            elif secondary == "accessories":
                spec = replace(spec, accessories=_toggle_accessory(base.accessories, rng))
            elif secondary == "upper_texture":
                spec = replace(spec, upper_texture=_near_texture(base.upper_texture, group_size))
            else:
                spec = replace(spec, lower_texture=_near_texture(base.lower_texture, group_size))
        members.append(spec)
    return members


def generate_identities(
    count: int,
    seed: int,
    texture_mode: str = "real",
    accessories_enabled: bool = True,
    hard_fraction: float = 0.0,
    corpus: Optional[TextureCorpus] = None,
    random_corpus: Optional[TextureCorpus] = None,
    palette_preset: str = "normal",
):
    """Generate `count` identity specs with ids 1..count.

    floor(hard_fraction * count / 5) hard groups of five lead the cohort;
    the remaining identities are independent.
    """
    if count < 0:
        raise ValidationError(f"count must be >= 0, got {count}")
    if not 0.0 <= hard_fraction <= 1.0:
        raise ValidationError(f"hard_fraction {hard_fraction} outside [0, 1]")
    if texture_mode == "real" and (corpus is None or len(corpus) == 0):
        raise ConfigurationError("texture mode 'real' requires a non-empty clothing corpus")
    if texture_mode == "random" and random_corpus is None:
        random_corpus = TextureCorpus.builtin("universal")

    n_groups = int(math.floor(hard_fraction * count / HARD_GROUP_SIZE + 1e-9))
    specs = []
    next_id = 1
    for g in range(n_groups):
        base = _sample_base(
            next_id,
            g + 1,
            rng_for(seed, "group-base", g),
            texture_mode,
            accessories_enabled,
            corpus,
            random_corpus,
            palette_preset,
        )
        specs.extend(make_hard_group(base, HARD_GROUP_SIZE, seed))
        next_id += HARD_GROUP_SIZE
    while next_id <= count:
        specs.append(
            _sample_base(
                next_id,
                None,
                rng_for(seed, "identity", next_id),
                texture_mode,
                accessories_enabled,
                corpus,
                random_corpus,
                palette_preset,
            )
        )
        next_id += 1
    return specs
