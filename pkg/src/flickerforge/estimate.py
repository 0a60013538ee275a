"""Blind flicker estimation from a burst.

Scene content is unknown, but it is shared across the burst: the log-ratio
of two frames' row profiles cancels the scene exactly and leaves only the
ratio of their gain profiles.  Estimation then proceeds in two stages:

1. estimate_frequency finds the banding pattern's fundamental spatial
   frequency from windowed Fourier peaks of the log-ratios, disambiguating
   harmonics (a pulse-width pattern often peaks on an overtone) by fitting
   a small harmonic model at each plausible fundamental and keeping the
   highest frequency that explains the data.
2. fit_flicker classifies the waveform and recovers per-frame phases plus
   per-channel modulation depth by coordinate descent over a candidate
   set: full wave, half wave, and pulse-width drive on a fixed duty grid.

Phases are only identifiable modulo the waveform's intensity period (pi
for full rectification, 2*pi otherwise), and only when frames actually
differ: identical phases leave nothing to compare.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import EstimationError, ValidationError, as_image
from .waveform import (DUTY_GRID, TWO_PI, WaveformMode, effective_value,
                       waveform_value)

#: floor added inside logs so zero-gain rows (full wave with no ambient
#: light) do not produce infinities
LOG_EPS = 1e-6

#: rows where any profile drops below this are excluded from model fitting
PROFILE_FLOOR = 1e-3

#: a frame pair with log-ratio spread below this carries no usable signal
RATIO_SPREAD_MIN = 1e-4

#: harmonics included in the frequency-refinement model
_N_HARMONICS = 6

#: don't trust spectral peaks below this many visible cycles
_MIN_CYCLES = 1.5

_GAIN_LOG_FLOOR = 1e-9
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0

_MODE_ORDER = {"full": 0, "half": 1, "pwm": 2}


@dataclass(frozen=True)
class RowProfile:
    """Per-row means of one frame: luminance (rows,) and per-channel (rows, 3)."""

    luminance: np.ndarray = field(repr=False)
    per_channel: np.ndarray = field(repr=False)

    @property
    def rows(self) -> int:
        return self.luminance.shape[0]


@dataclass(frozen=True)
class EstimatedFlicker:
    """Fitted flicker model for a burst.

    nu:      fundamental spatial frequency of the intensity pattern, in
             cycles per row (0 < nu < 0.5).
    phases:  per-frame phase at row 0, reduced modulo the mode's
             intensity period.
    beta:    per-channel modulation depth in (0, 1]; the ambient ratio is
             recoverable as k = 1/beta - 1.
    residual: root-mean-square misfit of the gain-ratio model.
    """

    mode: WaveformMode
    nu: float
    phases: tuple[float, ...]
    beta: tuple[float, float, float]
    residual: float

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValidationError(f"nu must lie in (0, 0.5), got {self.nu}")
        if any(not 0.0 < b <= 1.0 for b in self.beta):
            raise ValidationError(f"beta must lie in (0, 1], got {self.beta}")
        if not np.isfinite(self.residual) or self.residual < 0:
            raise ValidationError("residual must be finite and >= 0")

    @property
    def ac_cycles_per_row(self) -> float:
        """AC cycles per row: half of nu for full rectification."""
        return self.nu / 2.0 if self.mode.kind == "full" else self.nu

    def gain_values(self, rows: int, frame: int) -> np.ndarray:
        """Reconstruct the (rows, 3) gain profile for one burst frame.

        A pwm gain is binary, so rows within a safety margin of a
        predicted on/off edge are zeroed: a sub-row phase error flips the
        gain there entirely, and a zero marks the row as one no inversion
        should trust.  The margin is one row pitch plus a phase-estimate
        allowance.
        """
        y = np.arange(rows, dtype=np.float64)
        nu_ac = self.ac_cycles_per_row
        theta = TWO_PI * nu_ac * y + self.phases[frame]
        wnorm = waveform_value(self.mode, theta) / effective_value(self.mode)
        b = np.asarray(self.beta, dtype=np.float64)
        gains = 1.0 + b[None, :] * (wnorm[:, None] - 1.0)
        if self.mode.kind == "pwm" and self.mode.duty < 1.0:
            margin = TWO_PI * nu_ac + 0.02
            switch = np.pi * self.mode.duty
            for target in (switch, TWO_PI - switch):
                dist = np.abs((theta - target + np.pi) % TWO_PI - np.pi)
                gains[dist < margin, :] = 0.0
        return gains

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.to_dict(),
            "nu": self.nu,
            "ac_cycles_per_row": self.ac_cycles_per_row,
            "phases": list(self.phases),
            "beta": list(self.beta),
            "residual": self.residual,
        }


def row_profile(image) -> RowProfile:
    """Row-mean profiles of a frame; exact means, no windowing."""
    img = as_image(image)
    per_channel = img.mean(axis=1)
    return RowProfile(luminance=per_channel.mean(axis=1),
                      per_channel=per_channel)


def _pair_ratios(signals: list[np.ndarray]) -> dict[tuple[int, int], np.ndarray]:
    """log(p_i + eps) - log(p_j + eps) for all i < j, dropping flat pairs."""
    logs = [np.log(s + LOG_EPS) for s in signals]
    out = {}
    for i in range(len(logs)):
        for j in range(i + 1, len(logs)):
            r = logs[i] - logs[j]
            if float(r.max() - r.min()) >= RATIO_SPREAD_MIN:
                out[(i, j)] = r
    return out


def _golden(func, lo: float, hi: float, tol: float):
    """Golden-section minimize func on [lo, hi]; returns (x, func(x))."""
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = func(c), func(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = func(d)
    mid = 0.5 * (a + b)
    return mid, func(mid)


def _harmonic_residual(nu: float, ratios: np.ndarray) -> float:
    """LS misfit of a DC + folded-harmonic sinusoid model at fundamental nu.

    ratios: (rows, P) stacked pair log-ratios.  Harmonics above the row
    Nyquist fold back as real sinusoids, so they are modeled at their
    folded frequency.
    """
    rows = ratios.shape[0]
    y = np.arange(rows, dtype=np.float64)
    cols = [np.ones(rows)]
    seen = set()
    for h in range(1, _N_HARMONICS + 1):
        f = h * nu
        f -= np.floor(f)
        if f > 0.5:
            f = 1.0 - f
        key = round(f, 9)
        if f < 1e-4 or f > 0.4999 or key in seen:
            continue
        seen.add(key)
        cols.append(np.cos(TWO_PI * f * y))
        cols.append(np.sin(TWO_PI * f * y))
    basis = np.column_stack(cols)
    q, _ = np.linalg.qr(basis)
    resid = ratios - q @ (q.T @ ratios)
    return float(np.einsum("rp,rp->", resid, resid))


def _parabolic_peak(mag: np.ndarray, k: int) -> float:
    """Refine a spectral peak index by fitting a parabola to 3 bins."""
    if not 1 <= k < len(mag) - 1:
        return float(k)
    a, b, c = mag[k - 1], mag[k], mag[k + 1]
    denom = a - 2.0 * b + c
    if denom == 0.0:
        return float(k)
    return k + 0.5 * (a - c) / denom


def estimate_frequency(profiles: list[RowProfile], *, pad: int = 16) -> float:
    """Fundamental spatial frequency (cycles/row) of the banding pattern.

    Needs at least two profiles of at least 64 rows.  Pipeline: detrended,
    Hann-windowed, zero-padded Fourier magnitudes of the pairwise
    luminance log-ratios are summed over pairs; the peak bin is refined by
    parabolic interpolation; candidate fundamentals peak/d (d = 1..6) are
    each polished against a harmonic least-squares model and the highest
    frequency within 5% of the best misfit wins.  Raises EstimationError
    when no pair shows usable contrast ("no flicker or identical phases").
    """
    if len(profiles) < 2:
        raise EstimationError("need at least 2 profiles to estimate flicker")
    rows = profiles[0].rows
    if rows < 64:
        raise EstimationError(f"need at least 64 rows, got {rows}")
    if any(p.rows != rows for p in profiles):
        raise ValidationError("profiles disagree on row count")
    for p in profiles:
        if not np.all(np.isfinite(p.luminance)):
            raise ValidationError("profiles contain non-finite values")

    pairs = _pair_ratios([p.luminance for p in profiles])
    if not pairs:
        raise EstimationError("no flicker or identical phases")
    ratio_stack = np.column_stack(list(pairs.values()))  # (rows, P)

    window = np.hanning(rows)
    nfft = pad * (1 << int(np.ceil(np.log2(rows))))
    mag = np.zeros(nfft // 2 + 1)
    for r in pairs.values():
        mag += np.abs(np.fft.rfft((r - r.mean()) * window, nfft))

    kmin = max(1, int(np.floor(_MIN_CYCLES * nfft / rows)))
    kpeak = kmin + int(np.argmax(mag[kmin:]))
    nu_peak = _parabolic_peak(mag, kpeak) / nfft

    nu_min = _MIN_CYCLES / rows
    candidates = [nu_peak / d for d in range(1, 7)
                  if nu_peak / d >= 0.999 * nu_min]
    if not candidates:
        # the peak sits at or below the minimum visible frequency (well
        # under two cycles in view): polish from the search floor rather
        # than fail; the low-cycle warning below qualifies the result
        candidates = [max(nu_peak, nu_min)]
    half_width = 0.35 / rows
    polished = []
    for nu_c in candidates:
        lo = max(0.5 * nu_min, nu_c - half_width)
        hi = min(0.4999, nu_c + half_width)
        nu_p, res = _golden(lambda v: _harmonic_residual(v, ratio_stack),
                            lo, hi, tol=max(1e-9, 1e-4 * nu_c))
        polished.append((nu_p, res))
    best_res = min(res for _, res in polished)
    energy = float(np.einsum("rp,rp->", ratio_stack, ratio_stack))
    nu_best = max(nu for nu, res in polished
                  if res <= 1.05 * best_res + 1e-9 * energy)
    nu_best, _ = _golden(lambda v: _harmonic_residual(v, ratio_stack),
                         nu_best - 0.05 / rows, nu_best + 0.05 / rows,
                         tol=1e-6 / rows)

    if nu_best * rows < _MIN_CYCLES:
        warnings.warn(
            f"fewer than {_MIN_CYCLES} pattern cycles visible "
            f"({nu_best * rows:.2f}); the estimate may be unreliable",
            stacklevel=2)
    return float(nu_best)


class _CandidateFit:
    """Coordinate-descent fit of one waveform candidate.

    Parameters are the per-frame phases (shared across channels) and a
    per-channel modulation depth; for pulse-width drive the duty cycle can
    join the cycle.  The residual compares observed per-channel pair
    log-ratios against the model on rows where every profile is bright
    enough to trust.
    """

    def __init__(self, mode: WaveformMode, nu_ac: float,
                 ratios: dict[tuple[int, int], np.ndarray],
                 row_index: np.ndarray, n_frames: int):
        self.mode = mode
        self.nu_ac = nu_ac
        self.period = mode.intensity_period
        self.ratios = ratios
        self.pairs = list(ratios.keys())
        self.n_frames = n_frames
        self.base = TWO_PI * nu_ac * row_index  # theta minus phase, masked rows
        self.n_channels = ratios[self.pairs[0]].shape[1]

    def _wnorm(self, phase: float, duty: float | None = None) -> np.ndarray:
        mode = self.mode if duty is None else WaveformMode(self.mode.kind, duty)
        return waveform_value(mode, self.base + phase) / effective_value(mode)

    @staticmethod
    def _log_gain(wnorm: np.ndarray, betas: np.ndarray) -> np.ndarray:
        g = 1.0 + betas[None, :] * (wnorm[:, None] - 1.0)
        return np.log(np.maximum(g, _GAIN_LOG_FLOOR))

    def _residual(self, log_gains: list[np.ndarray]) -> float:
        total = 0.0
        for (i, j) in self.pairs:
            err = self.ratios[(i, j)] - (log_gains[i] - log_gains[j])
            total += float(np.einsum("rc,rc->", err, err))
        return total

    def coarse(self, beta_grid=(0.25, 0.5, 0.75, 0.95), n_grid: int = 64):
        """Grid-search initial phases against the pivot frame (frame 0).

        For each trial depth, model log-gains are tabulated on an n_grid
        phase comb; pair residuals against the pivot then reduce to matrix
        products, so the joint (phase_i, phase_0) search is exhaustive.
        """
        mean_ratios = {ij: r.mean(axis=1) for ij, r in self.ratios.items()}
        grid = self.period * np.arange(n_grid) / n_grid
        theta = self.base[None, :] + grid[:, None]
        wnorm_grid = (waveform_value(self.mode, theta)
                      / effective_value(self.mode))
        pivot_pairs = [(i, 0) for i in range(1, self.n_frames)]
        best = None
        for b0 in beta_grid:
            table = np.log(np.maximum(1.0 + b0 * (wnorm_grid - 1.0),
                                      _GAIN_LOG_FLOOR))
            gram = table @ table.T
            diag = np.diag(gram)
            total_by_pivot = np.zeros(n_grid)
            argmins = []
            for (i, j) in pivot_pairs:
                r = mean_ratios.get((i, j))
                if r is None:
                    r = -mean_ratios[(j, i)]
                proj = table @ r
                grid_res = (-2.0 * proj[:, None] + 2.0 * proj[None, :]
                            + diag[:, None] - 2.0 * gram + diag[None, :])
                amin = np.argmin(grid_res, axis=0)
                argmins.append(amin)
                total_by_pivot += grid_res[amin, np.arange(n_grid)]
            pivot = int(np.argmin(total_by_pivot))
            phases = np.empty(self.n_frames)
            phases[0] = grid[pivot]
            for idx, (i, _) in enumerate(pivot_pairs):
                phases[i] = grid[argmins[idx][pivot]]
            if best is None or total_by_pivot[pivot] < best[0]:
                best = (float(total_by_pivot[pivot]), phases, b0)
        return best[1], best[2]

    def refine(self, phases, beta0: float, *, refine_duty: bool = False,
               max_sweeps: int = 100, tol: float = 1e-6,
               abandon_above: float | None = None):
        """Cycle golden-section refinement over phases, depths(, duty).

        Brackets start at the coarse grid pitch and shrink each sweep;
        convergence is declared when no parameter moves more than tol.
        abandon_above stops a hopeless candidate early (residual far above
        the best already-refined candidate) to save time; the returned
        residual is still its true value at that point.
        """
        phases = np.array(phases, dtype=np.float64)
        betas = np.full(self.n_channels, float(beta0))
        duty = self.mode.duty
        wnorms = [self._wnorm(p, duty) for p in phases]
        log_gains = [self._log_gain(w, betas) for w in wnorms]
        phase_step = self.period / 64 * 1.2
        beta_step = 0.3
        duty_step = 0.06
        residual = self._residual(log_gains)
        for sweep in range(max_sweeps):
            moved = 0.0
            gtol = max(0.3 * tol, phase_step * 0.01)
            if refine_duty and self.mode.kind == "pwm":
                def duty_obj(d):
                    lg = [self._log_gain(self._wnorm(p, d), betas)
                          for p in phases]
                    return self._residual(lg)
                new_duty, _ = _golden(duty_obj,
                                      max(0.02, duty - duty_step),
                                      min(0.999, duty + duty_step),
                                      tol=gtol)
                moved = max(moved, abs(new_duty - duty))
                duty = new_duty
                self.mode = WaveformMode("pwm", duty)
                wnorms = [self._wnorm(p) for p in phases]
                log_gains = [self._log_gain(w, betas) for w in wnorms]
            for i in range(self.n_frames):
                pairs_i = [(a, b) for (a, b) in self.pairs if i in (a, b)]
                if not pairs_i:
                    continue

                def phase_obj(p, i=i):
                    lg_i = self._log_gain(self._wnorm(p), betas)
                    total = 0.0
                    for (a, b) in pairs_i:
                        la = lg_i if a == i else log_gains[a]
                        lb = lg_i if b == i else log_gains[b]
                        err = self.ratios[(a, b)] - (la - lb)
                        total += float(np.einsum("rc,rc->", err, err))
                    return total
                new_p, _ = _golden(phase_obj, phases[i] - phase_step,
                                   phases[i] + phase_step, tol=gtol)
                moved = max(moved, abs(new_p - phases[i]))
                phases[i] = new_p
                wnorms[i] = self._wnorm(new_p)
                log_gains[i] = self._log_gain(wnorms[i], betas)
            for c in range(self.n_channels):
                def beta_obj(bv, c=c):
                    logs = [np.log(np.maximum(1.0 + bv * (w - 1.0),
                                              _GAIN_LOG_FLOOR))
                            for w in wnorms]
                    total = 0.0
                    for (a, b) in self.pairs:
                        err = self.ratios[(a, b)][:, c] - (logs[a] - logs[b])
                        total += float(err @ err)
                    return total
                new_b, _ = _golden(beta_obj,
                                   max(0.02, betas[c] - beta_step),
                                   min(1.0, betas[c] + beta_step),
                                   tol=gtol)
                moved = max(moved, abs(new_b - betas[c]))
                betas[c] = new_b
            log_gains = [self._log_gain(w, betas) for w in wnorms]
            residual = self._residual(log_gains)
            phase_step = max(phase_step * 0.4, 40 * tol)
            beta_step = max(beta_step * 0.4, 40 * tol)
            duty_step = max(duty_step * 0.4, 40 * tol)
            if moved < tol:
                break
            if (abandon_above is not None and sweep >= 1
                    and residual > abandon_above):
                break
        return phases % self.period, betas, residual, duty


def fit_flicker(frames, nu: float, *, max_sweeps: int = 100,
                tol: float = 1e-6) -> EstimatedFlicker:
    """Classify the waveform and fit phases/depths for a burst.

    frames: >= 2 images sharing one flicker pattern (phases may differ);
    nu: fundamental pattern frequency in cycles/row, e.g. from
    estimate_frequency.  Candidates are full wave, half wave, and
    pulse-width drive over the fixed duty grid; each gets a coarse phase
    grid then golden-section coordinate descent, and the smallest residual
    wins (ties break toward full, then half, then smaller duty).  The duty
    cycle of a winning pulse-width fit is refined beyond the grid.
    """
    if not 0.0 < nu < 0.5:
        raise ValidationError(f"nu must lie in (0, 0.5), got {nu}")
    if len(frames) < 2:
        raise EstimationError("need at least 2 frames to fit flicker")
    profiles = [row_profile(f) for f in frames]
    rows = profiles[0].rows
    if any(p.rows != rows for p in profiles):
        raise ValidationError("frames disagree on height")

    stacked = np.stack([p.per_channel for p in profiles])  # (F, rows, 3)
    bright = np.all(stacked > PROFILE_FLOOR, axis=(0, 2))
    if not bright.any():
        raise EstimationError("profiles are too dark to compare")
    row_index = np.nonzero(bright)[0].astype(np.float64)

    logs = np.log(stacked[:, bright, :] + LOG_EPS)
    ratios = {}
    for i in range(len(frames)):
        for j in range(i + 1, len(frames)):
            r = logs[i] - logs[j]
            if float(r.max() - r.min()) >= RATIO_SPREAD_MIN:
                ratios[(i, j)] = r
    if not ratios:
        raise EstimationError("no flicker or identical phases")

    candidates = [(WaveformMode.full_wave(), nu / 2.0),
                  (WaveformMode.half_wave(), nu)]
    candidates += [(WaveformMode.pwm(d), nu) for d in DUTY_GRID]

    fits = []
    coarse_order = []
    for mode, nu_ac in candidates:
        fitter = _CandidateFit(mode, nu_ac, ratios, row_index, len(frames))
        phases0, beta0 = fitter.coarse()
        coarse_order.append((fitter, phases0, beta0))

    best_residual = np.inf
    for fitter, phases0, beta0 in coarse_order:
        phases, betas, residual, duty = fitter.refine(
            phases0, beta0, max_sweeps=max_sweeps, tol=tol,
            abandon_above=25.0 * best_residual if np.isfinite(best_residual)
            else None)
        best_residual = min(best_residual, residual)
        fits.append({"mode": fitter.mode, "nu_ac": fitter.nu_ac,
                     "phases": phases, "betas": betas, "residual": residual})

    fits.sort(key=lambda f: (f["residual"], _MODE_ORDER[f["mode"].kind],
                             f["mode"].duty or 0.0))
    win = fits[0]

    if win["mode"].kind == "pwm":
        fitter = _CandidateFit(win["mode"], win["nu_ac"], ratios,
                               row_index, len(frames))
        phases, betas, residual, duty = fitter.refine(
            win["phases"], float(np.mean(win["betas"])), refine_duty=True,
            max_sweeps=max_sweeps, tol=tol)
        if residual <= win["residual"]:
            win = {"mode": WaveformMode.pwm(duty), "nu_ac": win["nu_ac"],
                   "phases": phases, "betas": betas, "residual": residual}

    n_terms = sum(r.size for r in ratios.values())
    rms = float(np.sqrt(win["residual"] / n_terms))
    mode = win["mode"]
    nu_pattern = win["nu_ac"] * 2.0 if mode.kind == "full" else win["nu_ac"]
    return EstimatedFlicker(
        mode=mode,
        nu=float(nu_pattern),
        phases=tuple(float(p) for p in win["phases"]),
        beta=tuple(float(np.clip(b, 1e-9, 1.0)) for b in win["betas"]),
        residual=rms)
