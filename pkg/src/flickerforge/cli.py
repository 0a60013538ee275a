"""Command-line front end.

Exit codes follow the usual Unix convention: 0 on success, 1 for usage
errors (bad flags, missing required arguments), 2 for data errors
(unreadable files, invalid parameters, failed estimation).  Diagnostics go
to stderr; the only stdout output is machine-readable JSON for commands
whose --out is omitted.  File outputs are written atomically.

Sampling commands (burst, manifest generate) require an explicit --seed:
there is no wall-clock fallback, which is what keeps every invocation
reproducible.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .composite import ForegroundClip, Placement, composite_dynamic_pair
from .core import (EstimationError, FlickerForgeError, ValidationError,
                   substream, validate_seed)
from .deflicker import FusionConfig, deflicker_burst, frame_gains
from .estimate import estimate_frequency, fit_flicker, row_profile
from .manifest import (DatasetConfig, generate_dataset, validate_manifest)
from .metrics import evaluate_pair, summarize
from .pngio import png_bit_depth, read_matte_png, read_png, write_png
from .synth import BurstSpec, apply_flicker, synth_burst
from .waveform import DUTY_GRID, FlickerSpec, WaveformMode

_STREAM_CLI_SPEC = 21


class _UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _write_json(path, obj) -> None:
    """Atomic JSON write (temp file + rename), or stdout when path is None."""
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(suffix=".json", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_k(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.split(",") if p.strip()]
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise _UsageError(f"--k expects numbers, got {text!r}") from exc
    if len(values) == 1:
        values = values * 3
    if len(values) != 3:
        raise _UsageError(f"--k expects 1 or 3 comma-separated values, "
                          f"got {len(values)}")
    return tuple(values)


def _mode_from_args(args) -> WaveformMode:
    if args.mode == "pwm":
        return WaveformMode.pwm(args.duty)
    return WaveformMode(args.mode)


def _json_safe(value):
    """math.inf doesn't survive strict JSON; use the string sentinel."""
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def _load_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: parse error at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}")


def _specs_from_provenance(path, n_frames: int) -> list[FlickerSpec]:
    """Per-frame specs from a burst's spec.json provenance."""
    data = _load_json(path)
    try:
        base = FlickerSpec.from_dict(data["base"])
        phases = [float(p) for p in data["phases"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: bad spec provenance ({exc})")
    if len(phases) != n_frames:
        raise ValidationError(f"{path}: provenance holds {len(phases)} "
                              f"phases but {n_frames} frames were given")
    return [base.with_phase(p) for p in phases]


# ---------------------------------------------------------------- commands


def _cmd_synth(args) -> int:
    spec = FlickerSpec(mode=_mode_from_args(args), enf_hz=args.enf,
                       row_hz=args.frow, phase=args.phase,
                       ambient_ratio=_parse_k(args.k))
    bits = args.bits if args.bits is not None else png_bit_depth(args.in_path)
    clean = read_png(args.in_path, gamma=args.gamma)
    banded = apply_flicker(clean, spec)
    clipped = write_png(args.out, banded, bits=bits, gamma=args.gamma)
    if clipped > 0:
        print(f"warning: {clipped:.2%} of pixels clipped on write",
              file=sys.stderr)
    return 0


def _sample_cli_spec(args, height: int) -> FlickerSpec:
    """Fill in any of mode/enf/frow/k the user left unspecified."""
    rng = substream(args.seed, _STREAM_CLI_SPEC)
    kind = args.mode or ("full", "half", "pwm")[int(rng.integers(3))]
    duty = args.duty
    if kind == "pwm" and duty is None:
        duty = DUTY_GRID[int(rng.integers(len(DUTY_GRID)))]
    mode = WaveformMode.pwm(duty) if kind == "pwm" else WaveformMode(kind)
    enf = args.enf if args.enf is not None else (50.0, 60.0)[int(rng.integers(2))]
    frow = args.frow
    if frow is None:
        scale = height / 512.0
        frow = float(rng.uniform(100_000.0 * scale, 160_000.0 * scale))
    if args.k is not None:
        k = _parse_k(args.k)
    else:
        k = tuple(float(rng.uniform(0.0, 1.0) * j)
                  for j in rng.uniform(0.8, 1.25, size=3))
    return FlickerSpec(mode=mode, enf_hz=enf, row_hz=frow, phase=0.0,
                       ambient_ratio=k)


def _cmd_burst(args) -> int:
    validate_seed(args.seed)
    bits = args.bits if args.bits is not None else png_bit_depth(args.in_path)
    clean = read_png(args.in_path, gamma=args.gamma)
    base = _sample_cli_spec(args, clean.shape[0])
    burst = BurstSpec(base=base, frame_count=args.frames,
                      rotation_max_deg=args.shake_rot,
                      translation_max_px=args.shake_trans, seed=args.seed)
    result = synth_burst(clean, burst)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(result.frames):
        write_png(out_dir / f"frame_{i:02d}.png", frame, bits=bits,
                  gamma=args.gamma)
    _write_json(out_dir / "spec.json", {
        "base": base.to_dict(),
        "frame_count": burst.frame_count,
        "phases": [s.phase for s in result.specs],
        "rotation_max_deg": burst.rotation_max_deg,
        "translation_max_px": burst.translation_max_px,
        "seed": burst.seed,
        "shakes": [list(s) for s in result.shakes],
    })
    return 0


def _load_clip(path, n_frames: int) -> ForegroundClip:
    data = _load_json(path)
    if isinstance(data, list):
        entries, placement = data, Placement()
    else:
        entries = data.get("frames", [])
        p = data.get("placement", {})
        placement = Placement(scale=float(p.get("scale", 1.0)),
                              offset=tuple(p.get("offset", (0, 0))))
    if not entries:
        raise ValidationError(f"{path}: clip lists no frames")
    if len(entries) == 1 and n_frames > 1:
        entries = entries * n_frames
    if len(entries) < n_frames:
        raise ValidationError(f"{path}: clip has {len(entries)} frames, "
                              f"need {n_frames}")
    root = Path(path).parent
    frames, alphas = [], []
    for e in entries[:n_frames]:
        try:
            frames.append(read_png(root / e["frame"], gamma="srgb"))
            alphas.append(read_matte_png(root / e["alpha"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: bad clip entry {e!r} ({exc})")
    return ForegroundClip(frames=frames, alphas=alphas, placement=placement)


def _cmd_composite(args) -> int:
    bg_dir = Path(args.bg_dir)
    frame_paths = sorted(bg_dir.glob("frame_*.png"))[:args.frames]
    if len(frame_paths) < args.frames:
        raise ValidationError(f"{bg_dir} holds {len(frame_paths)} frames, "
                              f"need {args.frames}")
    flicker_bg = [read_png(p, gamma=args.gamma) for p in frame_paths]
    clean_bg = read_png(args.clean, gamma=args.gamma)
    clip = _load_clip(args.clip, args.frames)
    specs = None
    if args.flicker_on_fg:
        specs = _specs_from_provenance(bg_dir / "spec.json", args.frames)
    pair = composite_dynamic_pair(flicker_bg, clean_bg, clip, specs=specs,
                                  flicker_on_fg=args.flicker_on_fg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.frames):
        write_png(out_dir / f"flicker_{i:02d}.png", pair.flicker_frames[i],
                  bits=args.bits, gamma=args.gamma)
        write_png(out_dir / f"clean_{i:02d}.png", pair.clean_frames[i],
                  bits=args.bits, gamma=args.gamma)
    return 0


def _cmd_estimate(args) -> int:
    frames = [read_png(p, gamma=args.gamma) for p in args.frames]
    nu = args.nu
    if nu is None:
        nu = estimate_frequency([row_profile(f) for f in frames])
    est = fit_flicker(frames, nu)
    _write_json(args.out, est.to_dict())
    return 0


def _cmd_deflicker(args) -> int:
    frames = [read_png(p, gamma=args.gamma) for p in args.frames]
    models = None
    if args.spec is not None:
        models = _specs_from_provenance(args.spec, len(frames))
    result = deflicker_burst(frames, models)
    clipped = write_png(args.out, result.image, bits=args.bits,
                        gamma=args.gamma)
    if clipped > 0:
        print(f"warning: {clipped:.2%} of pixels clipped on write",
              file=sys.stderr)
    if args.report is not None:
        h, w, _ = result.image.shape
        gains = [frame_gains(models[i], h, i) if models is not None
                 else result.estimate.gain_values(h, i)
                 for i in range(len(frames))]
        cfg = FusionConfig()
        coverage, residuals = [], []
        for img, g in zip(frames, gains):
            valid = ((g >= cfg.gain_floor)[:, None, :]
                     & (img < cfg.clip_ceiling))
            coverage.append(float(valid.mean()))
            g_full = np.broadcast_to(g[:, None, :], img.shape)
            diff = np.where(valid, img / g_full - result.image, 0.0)
            n_valid = int(valid.sum())
            residuals.append(
                float(np.sqrt((diff ** 2).sum() / n_valid))
                if n_valid else math.nan)
        _write_json(args.report, {
            "coverage": coverage,
            "fallback_fraction": result.fallback_fraction,
            "per_frame_residuals": residuals,
            "estimate": (result.estimate.to_dict()
                         if result.estimate is not None else None),
        })
    return 0


def _cmd_evaluate(args) -> int:
    data = _load_json(args.manifest)
    gt_root = Path(args.gt_dir)
    pred_dir = Path(args.pred_dir)
    scenes_out = {}
    by_split: dict[str, list] = {}
    for scene in data.get("scenes", []):
        sid = scene["scene_id"]
        pred_path = pred_dir / f"{sid}.png"
        if not pred_path.is_file():
            raise ValidationError(f"missing prediction: {pred_path}")
        pred = read_png(pred_path, gamma=args.gamma)
        gt = read_png(gt_root / scene["clean"], gamma=args.gamma)
        report = evaluate_pair(pred, gt)
        split = scene.get("split", "all")
        scenes_out[sid] = {"psnr_db": _json_safe(report.psnr),
                           "ssim": report.ssim, "split": split}
        by_split.setdefault(split, []).append(report)
        by_split.setdefault("all", []).append(report)
    if not scenes_out:
        raise ValidationError(f"{args.manifest}: no scenes to evaluate")
    aggregate = {}
    for split, reports in sorted(by_split.items()):
        agg = summarize(reports)
        aggregate[split] = {"count": agg["count"],
                            "psnr_db": _json_safe(agg["mean_psnr"]),
                            "ssim": agg["mean_ssim"]}
    _write_json(args.out, {"scenes": scenes_out, "aggregate": aggregate})
    return 0


def _cmd_manifest_generate(args) -> int:
    validate_seed(args.seed)
    config = DatasetConfig(frames_per_scene=args.frames,
                           split_ratio=args.split,
                           rotation_max_deg=args.shake_rot,
                           translation_max_px=args.shake_trans,
                           bits=args.bits, gamma=args.gamma)
    manifest = generate_dataset(args.backgrounds, args.out, args.seed,
                                config)
    print(f"generated {len(manifest['scenes'])} scenes under {args.out}",
          file=sys.stderr)
    return 0


def _cmd_manifest_validate(args) -> int:
    report = validate_manifest(args.manifest)
    for v in report.violations:
        print(f"violation: {v}", file=sys.stderr)
    if report.violations:
        return 2
    print(f"ok: {report.scenes_checked} scenes, zero violations",
          file=sys.stderr)
    return 0


# ----------------------------------------------------------------- parser


def _add_gamma(p, default="srgb"):
    p.add_argument("--gamma", choices=("srgb", "linear"), default=default,
                   help="PNG transfer curve (default %(default)s)")


def _add_bits(p, default=8):
    if default is None:
        p.add_argument("--bits", type=int, choices=(8, 16), default=None,
                       help="PNG bit depth for outputs "
                            "(default: match the input file)")
    else:
        p.add_argument("--bits", type=int, choices=(8, 16), default=default,
                       help="PNG bit depth for outputs (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flickerforge",
                     description="Rolling-shutter flicker synthesis, "
                                 "estimation, and removal.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("synth", help="apply flicker to one image")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--mode", choices=("full", "half", "pwm"), required=True)
    p.add_argument("--duty", type=float, default=0.5)
    p.add_argument("--enf", type=float, default=50.0)
    p.add_argument("--frow", type=float, default=100_000.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--k", default="0,0,0",
                   help="ambient ratio, one value or R,G,B")
    p.add_argument("--out", required=True)
    _add_gamma(p)
    _add_bits(p, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("burst", help="synthesize a seeded flicker burst")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--shake-rot", type=float, default=3.0)
    p.add_argument("--shake-trans", type=float, default=5.0)
    p.add_argument("--mode", choices=("full", "half", "pwm"))
    p.add_argument("--duty", type=float)
    p.add_argument("--enf", type=float)
    p.add_argument("--frow", type=float)
    p.add_argument("--k")
    _add_gamma(p)
    _add_bits(p, default=None)
    p.set_defaults(func=_cmd_burst)

    p = sub.add_parser("composite",
                       help="composite a foreground clip over a burst")
    p.add_argument("--bg-dir", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--clip", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--flicker-on-fg", action="store_true")
    _add_gamma(p)
    _add_bits(p, default=16)
    p.set_defaults(func=_cmd_composite)

    p = sub.add_parser("estimate", help="fit a flicker model to a burst")
    p.add_argument("--frames", nargs="+", required=True)
    p.add_argument("--nu", type=float,
                   help="known pattern frequency (cycles/row); skips "
                        "spectral search")
    p.add_argument("--out", help="output JSON path (default: stdout)")
    _add_gamma(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("deflicker", help="remove flicker from a burst")
    p.add_argument("--frames", nargs="+", required=True)
    p.add_argument("--spec", help="burst spec.json for known-model removal")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write coverage/residual JSON here")
    _add_gamma(p)
    _add_bits(p, default=16)
    p.set_defaults(func=_cmd_deflicker)

    p = sub.add_parser("evaluate", help="score predictions against a manifest")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_gamma(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("manifest", help="dataset generation and validation")
    msub = p.add_subparsers(dest="manifest_command", required=True,
                            parser_class=_Parser)
    g = msub.add_parser("generate", help="build a dataset from backgrounds")
    g.add_argument("--backgrounds", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--frames", type=int, default=10)
    g.add_argument("--split", type=float, default=0.8)
    g.add_argument("--shake-rot", type=float, default=3.0)
    g.add_argument("--shake-trans", type=float, default=5.0)
    _add_gamma(g)
    _add_bits(g, default=16)
    g.set_defaults(func=_cmd_manifest_generate)
    v = msub.add_parser("validate", help="check a manifest and its files")
    v.add_argument("manifest")
    v.set_defaults(func=_cmd_manifest_validate)

    return parser


def dispatch(argv) -> int:
    """Run one CLI invocation; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:          # --help and friends
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FlickerForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
