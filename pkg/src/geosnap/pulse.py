"""Multi-tone pulse synthesis for geometric SNAP gates.

Two loop constructions are provided, both driving every addressed Fock
subspace through a closed cycle on its Bloch sphere so that only a
geometric phase is imprinted:

* the two-segment slice loop (``OrangeSlice``): two resonant half-loops
  down and up a pair of meridians whose opening angle sets the phase;
* the three-segment loop (``PathDesigned``): descend a meridian to polar
  angle ``lam``, sweep along that latitude under a constant detuning,
  and return on a second meridian.  The enclosed-wedge area again sets
  the phase, at roughly half the pulse area of the slice loop.

All envelopes are half-period sine arches, so amplitudes vanish at
segment boundaries.  Angles are stored in radians, amplitudes and
detunings in rad/s, times in seconds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SnapTarget",
    "ToneSegment",
    "DriveTone",
    "PulseSchedule",
    "PathSegments",
    "ErrorModel",
    "Scheme",
    "sine_envelope",
    "orange_slice_schedule",
    "path_designed_schedule",
    "path_segments",
    "gate_time",
    "apply_error",
]


def wrap_angle(theta: float) -> float:
    """Map an angle to the branch (-pi, pi]."""
    w = (theta + math.pi) % (2.0 * math.pi) - math.pi
    if w == -math.pi:
        w = math.pi
    return w


class Scheme(enum.Enum):
    ORANGE_SLICE = "oss"
    PATH_DESIGNED = "pd"


@dataclass(frozen=True)
class SnapTarget:
    """Target phases theta_n, one per addressed Fock level n = 0 .. d-1."""

    thetas: tuple[float, ...]

    def __post_init__(self):
        if len(self.thetas) < 1:
            raise ValueError("a SNAP target needs at least one phase")
        object.__setattr__(
            self, "thetas", tuple(wrap_angle(float(t)) for t in self.thetas)
        )

    @property
    def d(self) -> int:
        return len(self.thetas)


@dataclass(frozen=True)
class ToneSegment:
    """One segment of one drive tone.

    The envelope is ``peak * sin(pi (t - t_start) / dur)``.  The phase is
    ``phase_const + phase_ramp*(t - t_start) + phase_bend*(1 - cos(pi (t - t_start)/dur))``;
    the bend term lets the latitude segment track the precessing azimuth
    exactly for a sine envelope.  ``detuning`` is constant over the
    segment and acts only in the tone's own subspace.
    """

    t_start: float
    t_end: float
    peak: float
    phase_const: float
    phase_ramp: float = 0.0
    phase_bend: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("segment must have positive duration")
        if self.peak < 0.0:
            raise ValueError("envelope peak must be nonnegative")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def area(self) -> float:
        # closed form for the sine arch
        return 2.0 * self.peak * self.duration / math.pi

    def envelope(self, t):
        s = (np.asarray(t) - self.t_start) / self.duration
        return self.peak * np.sin(np.pi * np.clip(s, 0.0, 1.0))

    def phase(self, t):
        dt = np.asarray(t) - self.t_start
        s = np.clip(dt / self.duration, 0.0, 1.0)
        return self.phase_const + self.phase_ramp * dt + self.phase_bend * (
            1.0 - np.cos(np.pi * s)
        )


@dataclass(frozen=True)
class DriveTone:
    """All segments of the drive addressing one Fock level."""

    target_level: int
    segments: tuple[ToneSegment, ...]

    def _locate(self, t: np.ndarray) -> np.ndarray:
        """Segment index per sample (last segment owns its right edge)."""
        starts = np.array([s.t_start for s in self.segments])
        idx = np.searchsorted(starts, t, side="right") - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def sample(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized (envelope, phase, detuning) at times ``t``."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        omega = np.zeros_like(t)
        phase = np.zeros_like(t)
        delta = np.zeros_like(t)
        idx = self._locate(t)
        for k, seg in enumerate(self.segments):
            m = (idx == k) & (t >= seg.t_start) & (t <= seg.t_end)
            if not m.any():
                continue
            omega[m] = seg.envelope(t[m])
            phase[m] = seg.phase(t[m])
            delta[m] = seg.detuning
        if scalar:
            return omega[0], phase[0], delta[0]
        return omega, phase, delta

    def envelope(self, t):
        return self.sample(t)[0]

    def phase(self, t):
        return self.sample(t)[1]

    def detuning(self, t):
        return self.sample(t)[2]


@dataclass(frozen=True)
class PulseSchedule:
    """A full multi-tone schedule on a shared segment grid."""

    tones: tuple[DriveTone, ...]
    segment_boundaries: tuple[float, ...]
    scheme_tag: Scheme
    omega_max: float
    target: SnapTarget

    def __post_init__(self):
        b = self.segment_boundaries
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])) or (b and b[0] <= 0.0):
            raise ValueError("segment boundaries must be strictly increasing")

    @property
    def duration(self) -> float:
        return self.segment_boundaries[-1]

    def tone_for_level(self, n: int) -> DriveTone | None:
        for tone in self.tones:
            if tone.target_level == n:
                return tone
        return None


@dataclass(frozen=True)
class PathSegments:
    """Per-subspace geometry of the three-segment loop.

    ``kappa = xi_b - xi_a`` is the azimuthal span of the latitude sweep;
    the enclosed wedge gives ``kappa * (1 - cos(lam)) / 2 = theta``.
    """

    lam: float
    kappa: float
    xi_a: float
    xi_b: float
    t1: float
    t2: float
    tp: float


@dataclass(frozen=True)
class ErrorModel:
    """Static control errors: amplitude fraction and per-subspace drifts.

    ``epsilon`` rescales every envelope by (1 + epsilon); ``etas[n]``
    shifts the detuning of the tone addressing level n by
    ``-etas[n] * omega_max``.
    """

    epsilon: float
    etas: tuple[float, ...]

    def __post_init__(self):
        if not math.isfinite(self.epsilon) or not all(
            math.isfinite(e) for e in self.etas
        ):
            raise ValueError("error fractions must be finite")


def sine_envelope(omega_max: float, tau: float) -> Callable[[float], np.ndarray]:
    """Half-period sine arch ``t -> omega_max * sin(pi t / tau)`` on [0, tau].

    Zero outside the support; the pulse area is ``2 * omega_max * tau / pi``.
    """
    if omega_max <= 0.0 or tau <= 0.0:
        raise ValueError("omega_max and tau must be positive")

    def env(t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= tau)
        return np.where(inside, omega_max * np.sin(np.pi * t / tau), 0.0)

    return env


def orange_slice_schedule(target: SnapTarget, omega_max: float) -> PulseSchedule:
    """Two-segment slice-loop schedule.

    Each addressed level gets one resonant tone with two sine arches of
    area pi each (segment duration pi^2 / (2 omega_max)).  The first
    segment drives down the meridian at azimuth theta_n, the second back
    up the azimuth-zero meridian, enclosing a wedge of angle theta_n.
    """
    if omega_max <= 0.0:
        raise ValueError("omega_max must be positive")
    tau = math.pi**2 / (2.0 * omega_max)
    tones = []
    for n, theta in enumerate(target.thetas):
        segs = (
            ToneSegment(0.0, tau, omega_max, -theta - math.pi / 2.0),
            ToneSegment(tau, 2.0 * tau, omega_max, math.pi / 2.0),
        )
        tones.append(DriveTone(n, segs))
    return PulseSchedule(
        tuple(tones), (tau, 2.0 * tau), Scheme.ORANGE_SLICE, omega_max, target
    )


def path_segments(
    target: SnapTarget, lam: float, omega_max: float
) -> tuple[PathSegments, ...]:
    """Loop geometry of the three-segment scheme, one record per level.

    All subspaces share one segment grid; the latitude-segment duration
    is set by the subspace needing the largest sweep area at the
    amplitude cap, and the meridian segments carry area ``lam`` each.
    """
    if omega_max <= 0.0:
        raise ValueError("omega_max must be positive")
    if not (0.0 < lam <= math.pi) or lam == math.pi / 2.0:
        raise ValueError("lam must lie in (0, pi/2) or (pi/2, pi]")
    cl, sl = math.cos(lam), math.sin(lam)
    kappas = [2.0 * th / (1.0 - cl) for th in target.thetas]
    sweep_areas = [abs(k) * abs(sl * cl) for k in kappas]
    a2max = max(sweep_areas)
    t1 = math.pi * lam / (2.0 * omega_max)
    tau2 = math.pi * a2max / (2.0 * omega_max) if a2max > 0.0 else t1
    t2 = t1 + tau2
    tp = t2 + t1
    return tuple(
        PathSegments(lam, k, 0.0, k, t1, t2, tp) for k in kappas
    )


def path_designed_schedule(
    target: SnapTarget, lam: float, omega_max: float
) -> PulseSchedule:
    """Three-segment loop schedule with shared timing across subspaces.

    Per level with theta != 0: meridian descent to polar angle ``lam``
    (area lam), a constant-detuning latitude sweep of azimuth -kappa
    whose drive phase tracks the azimuth, then meridian ascent (area
    lam).  Levels with theta = 0 carry a zero-amplitude tone so block
    bookkeeping stays uniform.
    """
    geos = path_segments(target, lam, omega_max)
    cl, sl = math.cos(lam), math.sin(lam)
    t1, t2, tp = geos[0].t1, geos[0].t2, geos[0].tp
    tau2 = t2 - t1
    # lam = pi: the latitude collapses onto the pole and the azimuth jump
    # happens in the pole crossing itself, leaving a two-segment loop
    degenerate = max(abs(g.kappa) for g in geos) * abs(sl * cl) < 1e-9 * lam
    tones = []
    for n, (theta, geo) in enumerate(zip(target.thetas, geos)):
        if theta == 0.0:
            tones.append(
                DriveTone(n, (ToneSegment(0.0, tp, 0.0, 0.0),))
            )
            continue
        down = ToneSegment(0.0, t1, omega_max, -geo.xi_b - math.pi / 2.0)
        up_phase = math.pi / 2.0 - geo.xi_a
        if degenerate:
            tones.append(DriveTone(n, (down, ToneSegment(t1, tp, omega_max, up_phase))))
            continue
        kappa = geo.kappa
        sweep_area = abs(kappa) * abs(sl * cl)
        peak2 = math.pi * sweep_area / (2.0 * tau2)
        delta2 = kappa * sl * sl / tau2
        # the azimuth precesses as xi(t) = xi_b - delta2*(t-t1) + s*cot(lam)*A(t)
        # with A the running envelope area; the drive phase is -xi(t) + offset.
        if kappa * cl < 0.0:
            offset, s = math.pi, 1.0
        else:
            offset, s = 0.0, -1.0
        bend = -s * (cl / sl) * (sweep_area / 2.0)
        segs = (
            down,
            ToneSegment(
                t1,
                t2,
                peak2,
                offset - geo.xi_b,
                phase_ramp=delta2,
                phase_bend=bend,
                detuning=delta2,
            ),
            ToneSegment(t2, tp, omega_max, up_phase),
        )
        tones.append(DriveTone(n, segs))
    boundaries = (t1, tp) if degenerate else (t1, t2, tp)
    return PulseSchedule(
        tuple(tones), boundaries, Scheme.PATH_DESIGNED, omega_max, target
    )


def gate_time(
    scheme_tag: Scheme,
    omega_max: float,
    lam: float | None = None,
    target: SnapTarget | None = None,
) -> float:
    """Total gate duration for a scheme at amplitude cap ``omega_max``.

    The slice loop takes pi^2 / omega_max.  The three-segment loop time
    depends on the target through the largest latitude sweep, so
    ``target`` (and ``lam``) are required for it.
    """
    if omega_max <= 0.0:
        raise ValueError("omega_max must be positive")
    if scheme_tag is Scheme.ORANGE_SLICE:
        return math.pi**2 / omega_max
    if lam is None or target is None:
        raise ValueError("path-designed gate time needs lam and target")
    return path_segments(target, lam, omega_max)[0].tp


def apply_error(
    schedule: PulseSchedule, err: ErrorModel, omega_max: float
) -> PulseSchedule:
    """Inject static control errors into a schedule.

    Envelopes scale by (1 + epsilon); the detuning of the tone
    addressing level n shifts by ``-etas[n] * omega_max`` in every
    segment.  Phases are untouched.
    """
    scale = 1.0 + err.epsilon
    if scale < 0.0:
        raise ValueError("epsilon below -1 would flip envelope sign")
    tones = []
    for tone in schedule.tones:
        eta = (
            err.etas[tone.target_level]
            if tone.target_level < len(err.etas)
            else 0.0
        )
        segs = tuple(
            replace(
                seg,
                peak=seg.peak * scale,
                detuning=seg.detuning - eta * omega_max,
            )
            for seg in tone.segments
        )
        tones.append(DriveTone(tone.target_level, segs))
    return replace(schedule, tones=tuple(tones))


def segment_intervals(schedule: PulseSchedule) -> list[tuple[float, float]]:
    """Consecutive (start, end) intervals between segment boundaries."""
    edges = [0.0, *schedule.segment_boundaries]
    return list(zip(edges[:-1], edges[1:]))


def tone_areas(schedule: PulseSchedule, n: int) -> tuple[float, ...]:
    """Closed-form per-segment pulse areas of the tone addressing level n."""
    tone = schedule.tone_for_level(n)
    if tone is None:
        raise ValueError(f"no tone addresses level {n}")
    return tuple(seg.area for seg in tone.segments)
