"""Dataset index, deterministic generation, and validation.

A dataset is a directory tree of scenes (one clean ground truth plus an
N-frame flicker burst each) indexed by a single ``manifest.json``.  The
manifest records every sampled parameter -- waveform, frequencies, phases,
per-channel ambient ratios, realized shake -- so a dataset can be
regenerated byte-for-byte from the manifest seed alone, and diffed when it
cannot.  Externally captured scenes slot into the same schema by carrying
``"spec": "real-capture"`` instead of synthetic provenance.

Split assignment (train/test, default 8/2) is a seeded shuffle of the
sorted scene ids, so it depends on nothing else: not file mtimes, not
directory order, not the number of frames.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ValidationError, substream, validate_seed
from .pngio import ImageIOError, read_png, write_png
from .synth import BurstSpec, synth_burst
from .waveform import DUTY_GRID, FlickerSpec, WaveformMode

MANIFEST_VERSION = "1"
MANIFEST_NAME = "manifest.json"
REAL_CAPTURE = "real-capture"

_STREAM_SCENE = 11
_STREAM_SPLIT = 12


@dataclass(frozen=True)
class DatasetConfig:
    """Knobs for generate_dataset; defaults mirror the burst generator.

    frow_range is the row-scan frequency range at a 512-row output; unless
    scale_frow_with_height is off it is multiplied by height/512 so the
    banding keeps the same on-screen scale at other resolutions.
    """

    frames_per_scene: int = 10
    split_ratio: float = 0.8
    enf_choices: tuple[float, ...] = (50.0, 60.0)
    frow_range: tuple[float, float] = (100_000.0, 160_000.0)
    scale_frow_with_height: bool = True
    ambient_max: float = 1.0
    channel_jitter: tuple[float, float] = (0.8, 1.25)
    rotation_max_deg: float = 3.0
    translation_max_px: float = 5.0
    bits: int = 16
    gamma: str = "srgb"

    def __post_init__(self):
        if self.frames_per_scene < 1:
            raise ValidationError("frames_per_scene must be >= 1")
        if not 0.0 <= self.split_ratio <= 1.0:
            raise ValidationError("split_ratio must lie in [0, 1]")
        if self.frow_range[0] <= 0 or self.frow_range[1] < self.frow_range[0]:
            raise ValidationError(f"bad frow_range {self.frow_range}")
        if self.gamma not in ("srgb", "linear"):
            raise ValidationError(f"gamma must be 'srgb' or 'linear', "
                                  f"got {self.gamma!r}")
        if self.bits not in (8, 16):
            raise ValidationError(f"bits must be 8 or 16, got {self.bits}")

    def to_dict(self) -> dict:
        return {
            "frames_per_scene": self.frames_per_scene,
            "split_ratio": self.split_ratio,
            "enf_choices": list(self.enf_choices),
            "frow_range": list(self.frow_range),
            "scale_frow_with_height": self.scale_frow_with_height,
            "ambient_max": self.ambient_max,
            "channel_jitter": list(self.channel_jitter),
            "rotation_max_deg": self.rotation_max_deg,
            "translation_max_px": self.translation_max_px,
            "bits": self.bits,
            "gamma": self.gamma,
        }


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_manifest: empty violations means a clean pass."""

    violations: list[str] = field(default_factory=list)
    scenes_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def _sample_spec(rng: np.random.Generator, height: int,
                 config: DatasetConfig) -> FlickerSpec:
    kind = ("full", "half", "pwm")[int(rng.integers(3))]
    if kind == "pwm":
        mode = WaveformMode.pwm(DUTY_GRID[int(rng.integers(len(DUTY_GRID)))])
    else:
        mode = WaveformMode(kind)
    enf = float(config.enf_choices[int(rng.integers(len(config.enf_choices)))])
    lo, hi = config.frow_range
    if config.scale_frow_with_height:
        scale = height / 512.0
        lo, hi = lo * scale, hi * scale
    frow = float(rng.uniform(lo, hi))
    base_k = float(rng.uniform(0.0, config.ambient_max))
    jitter = rng.uniform(*config.channel_jitter, size=3)
    k = tuple(float(base_k * j) for j in jitter)
    return FlickerSpec(mode=mode, enf_hz=enf, row_hz=frow, phase=0.0,
                       ambient_ratio=k)


def _scene_entry(scene_id: str, rel_dir: Path, config: DatasetConfig,
                 burst: BurstSpec, result) -> dict:
    return {
        "scene_id": scene_id,
        "clean": str(rel_dir / "clean.png"),
        "frames": [str(rel_dir / f"frame_{i:02d}.png")
                   for i in range(config.frames_per_scene)],
        "spec": {
            "base": burst.base.to_dict(),
            "frame_count": burst.frame_count,
            "phases": [s.phase for s in result.specs],
            "rotation_max_deg": burst.rotation_max_deg,
            "translation_max_px": burst.translation_max_px,
            "seed": burst.seed,
            "shakes": [list(s) for s in result.shakes],
        },
    }


def generate_dataset(backgrounds, out_dir, seed: int,
                     config: DatasetConfig | None = None) -> dict:
    """Build a flicker dataset under out_dir and return its manifest.

    backgrounds may be a directory (its PNGs are used in sorted-name
    order, making generation independent of filesystem order) or an
    explicit list of paths.  Each background becomes one scene with a
    freshly sampled flicker spec and a seeded burst; unreadable
    backgrounds are skipped with a warning and listed in the manifest.
    The manifest is also written to out_dir/manifest.json.
    """
    cfg = config or DatasetConfig()
    validate_seed(seed)
    if isinstance(backgrounds, (str, Path)):
        bg_paths = sorted(Path(backgrounds).glob("*.png"))
    else:
        bg_paths = [Path(p) for p in backgrounds]
    if not bg_paths:
        raise ValidationError("no background images found")

    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    scenes, skipped = [], []
    index = 0
    for bg_path in bg_paths:
        try:
            clean = read_png(bg_path, gamma=cfg.gamma)
        except (ImageIOError, ValidationError) as exc:
            warnings.warn(f"skipping unreadable background {bg_path}: {exc}",
                          stacklevel=2)
            skipped.append(str(bg_path))
            continue
        scene_id = f"scene_{index:04d}_{bg_path.stem}"
        rng = substream(seed, _STREAM_SCENE, index)
        spec = _sample_spec(rng, clean.shape[0], cfg)
        burst = BurstSpec(base=spec, frame_count=cfg.frames_per_scene,
                          rotation_max_deg=cfg.rotation_max_deg,
                          translation_max_px=cfg.translation_max_px,
                          seed=int(rng.integers(0, 2 ** 63)))
        result = synth_burst(clean, burst)
        rel_dir = Path("scenes") / scene_id
        scene_dir = out_root / rel_dir
        scene_dir.mkdir(parents=True, exist_ok=True)
        write_png(scene_dir / "clean.png", clean, bits=cfg.bits,
                  gamma=cfg.gamma)
        for i, frame in enumerate(result.frames):
            write_png(scene_dir / f"frame_{i:02d}.png", frame,
                      bits=cfg.bits, gamma=cfg.gamma)
        entry = _scene_entry(scene_id, rel_dir, cfg, burst, result)
        (scene_dir / "spec.json").write_text(
            json.dumps(entry["spec"], indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        scenes.append(entry)
        index += 1

    if not scenes:
        raise ValidationError("every background was unreadable")
    for scene_id, split in assign_splits(
            [s["scene_id"] for s in scenes], seed, cfg.split_ratio).items():
        next(s for s in scenes if s["scene_id"] == scene_id)["split"] = split

    manifest = {
        "version": MANIFEST_VERSION,
        "seed": seed,
        "config": cfg.to_dict(),
        "scenes": scenes,
        "skipped": skipped,
    }
    (out_root / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return manifest


def assign_splits(scene_ids: list[str], seed: int,
                  ratio: float = 0.8) -> dict[str, str]:
    """Deterministic train/test split from (seed, sorted ids) alone."""
    if len(set(scene_ids)) != len(scene_ids):
        raise ValidationError("scene ids must be unique")
    ordered = sorted(scene_ids)
    perm = substream(seed, _STREAM_SPLIT).permutation(len(ordered))
    n_train = int(round(ratio * len(ordered)))
    shuffled = [ordered[i] for i in perm]
    return {sid: ("train" if pos < n_train else "test")
            for pos, sid in enumerate(shuffled)}


def _check_scene(scene: dict, root: Path, pos: int,
                 violations: list[str]) -> None:
    where = f"scenes[{pos}]"
    scene_id = scene.get("scene_id")
    if not scene_id:
        violations.append(f"{where}: missing scene_id")
        return
    where = f"{where} ({scene_id})"
    if scene.get("split") not in ("train", "test"):
        violations.append(f"{where}: split must be 'train' or 'test', "
                          f"got {scene.get('split')!r}")
    paths = [scene.get("clean")] + list(scene.get("frames", []))
    if len(paths) < 2:
        violations.append(f"{where}: needs a clean image and >= 1 frame")
    dims = {}
    for rel in paths:
        if rel is None:
            violations.append(f"{where}: missing clean path")
            continue
        full = root / rel
        if not full.is_file():
            violations.append(f"{where}: missing file {rel}")
            continue
        try:
            img = read_png(full, gamma="linear")
        except (ImageIOError, ValidationError) as exc:
            violations.append(f"{where}: unreadable file {rel}: {exc}")
            continue
        dims[rel] = img.shape[:2]
    if len(set(dims.values())) > 1:
        detail = ", ".join(f"{r}={h}x{w}" for r, (h, w) in sorted(dims.items()))
        violations.append(f"{where}: inconsistent dimensions ({detail})")

    spec = scene.get("spec")
    if spec == REAL_CAPTURE:
        return
    if not isinstance(spec, dict):
        violations.append(f"{where}: spec must be provenance dict or "
                          f"'{REAL_CAPTURE}', got {type(spec).__name__}")
        return
    try:
        base = FlickerSpec.from_dict(spec["base"])
        phases = spec["phases"]
        if len(phases) != len(scene.get("frames", [])):
            violations.append(f"{where}: {len(phases)} phases for "
                              f"{len(scene.get('frames', []))} frames")
        _ = base.cycles_per_row
    except (KeyError, TypeError, ValidationError) as exc:
        violations.append(f"{where}: bad spec provenance: {exc}")


def validate_manifest(path) -> ValidationReport:
    """Check a manifest and its files; returns a report of violations.

    Verifies the schema version, unique scene ids, file existence,
    per-scene dimension consistency, and that synthetic provenance parses
    back into a valid spec (real-capture scenes are exempt).  Parse errors
    are reported with their line/column context rather than raised.
    """
    path = Path(path)
    root = path.parent
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        return ValidationReport([f"manifest not found: {path}"])
    except json.JSONDecodeError as exc:
        return ValidationReport(
            [f"manifest parse error at line {exc.lineno}, "
             f"column {exc.colno}: {exc.msg}"])

    violations: list[str] = []
    if data.get("version") != MANIFEST_VERSION:
        violations.append(f"unsupported manifest version "
                          f"{data.get('version')!r}")
    scenes = data.get("scenes", [])
    if not isinstance(scenes, list) or not scenes:
        violations.append("manifest lists no scenes")
        scenes = []
    ids = [s.get("scene_id") for s in scenes]
    dupes = {i for i in ids if i is not None and ids.count(i) > 1}
    for d in sorted(dupes):
        violations.append(f"duplicate scene_id {d!r}")
    for pos, scene in enumerate(scenes):
        _check_scene(scene, root, pos, violations)
    return ValidationReport(violations=violations, scenes_checked=len(scenes))
