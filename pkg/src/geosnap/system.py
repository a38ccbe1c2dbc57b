"""Physical constants and per-subspace Hamiltonians.

A qubit dispersively coupled to a cavity splits into independent
two-level blocks span{|g,n>, |e,n>}, one per photon number n.  In the
frame rotating with each tone's carrier the block-n Hamiltonian reads

    H_n = (delta_n/2) sigma_z + c_n(t) |g,n><e,n| + h.c.

with sigma_z = |e,n><e,n| - |g,n><g,n|, so a positive detuning raises
|e,n>.  The resonant tone contributes c = (omega_n/2) e^{i phi_n};
off-resonant tones add counterrotating terms rotating at (n - m) chi.
Basis ordering inside each block is (|g,n>, |e,n>).

Three model levels are supported (``BlockMode``): the rotating-wave
approximation keeps only each block's own tone; the full model adds all
cross-tone terms; the higher-order model additionally applies the
residual per-block precession exp(+i chi' (n^2 - n) t / 2) that appears
when the drives are tuned to the bare dispersive resonances while the
level ladder also carries a second-order dispersive shift.  The cavity
self-Kerr shifts |g,n> and |e,n> alike and therefore drops out of the
block dynamics entirely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .pulse import PulseSchedule

__all__ = [
    "SystemParams",
    "BlockMode",
    "build_block_hamiltonian",
    "full_space_hamiltonian",
    "block_coefficients",
    "effective_block_controls",
    "BlockControls",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemParams:
    """Angular-frequency constants of the coupled system.

    All rates are angular (rad/s); configuration layers that accept
    "MHz over 2pi" style inputs must multiply by 2*pi*1e6 before
    constructing this object.  ``n_max`` is the number of simulated
    cavity levels; the drive conserves photon number, so truncation
    only removes unused blocks.
    """

    chi: float
    gamma_decay: float = 0.0
    gamma_phi: float = 0.0
    kerr: float = 0.0
    chi_prime: float = 0.0
    n_max: int = 10
    gamma_cavity: float = 0.0

    def __post_init__(self):
        if self.chi <= 0.0:
            raise ValueError("chi must be positive")
        if self.gamma_decay < 0.0 or self.gamma_phi < 0.0 or self.gamma_cavity < 0.0:
            raise ValueError("decoherence rates must be nonnegative")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")

    @classmethod
    def from_linear_frequencies(
        cls,
        chi_mhz: float,
        gamma_decay_khz: float = 0.0,
        gamma_phi_khz: float = 0.0,
        kerr_khz: float = 0.0,
        chi_prime_khz: float = 0.0,
        n_max: int = 10,
    ) -> "SystemParams":
        """Build from frequencies quoted as (value / 2 pi) in MHz / kHz."""
        return cls(
            chi=TWO_PI * 1e6 * chi_mhz,
            gamma_decay=TWO_PI * 1e3 * gamma_decay_khz,
            gamma_phi=TWO_PI * 1e3 * gamma_phi_khz,
            kerr=TWO_PI * 1e3 * kerr_khz,
            chi_prime=TWO_PI * 1e3 * chi_prime_khz,
            n_max=n_max,
        )


class BlockMode(enum.Enum):
    RWA = "rwa"
    FULL = "full"
    FULL_HIGHER_ORDER = "full+ho"

    @classmethod
    def parse(cls, text: str) -> "BlockMode":
        for mode in cls:
            if mode.value == text:
                return mode
        raise ValueError(f"unknown mode {text!r}; expected rwa, full, or full+ho")


def _check_block_args(n: int, schedule: PulseSchedule, t: float, params: SystemParams):
    if not 0 <= n < params.n_max:
        raise ValueError(f"block index {n} outside truncation n_max={params.n_max}")
    if not 0.0 <= t <= schedule.duration:
        raise ValueError(f"time {t} outside schedule duration {schedule.duration}")
    for tone in schedule.tones:
        if tone.target_level >= params.n_max:
            raise ValueError(
                f"tone targets level {tone.target_level} beyond n_max={params.n_max}"
            )


def block_coefficients(
    blocks: np.ndarray,
    schedule: PulseSchedule,
    times: np.ndarray,
    params: SystemParams,
    mode: BlockMode,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (delta, c) for every requested block at every time.

    Returns arrays of shape (len(blocks), len(times)): the block
    detuning delta_n(t) and the complex |g,n><e,n| coefficient c_n(t).
    """
    blocks = np.atleast_1d(np.asarray(blocks, dtype=int))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    deltas = np.zeros((blocks.size, times.size))
    cs = np.zeros((blocks.size, times.size), dtype=complex)
    chi = params.chi
    for tone in schedule.tones:
        m = tone.target_level
        omega, phase, delta = tone.sample(times)
        carrier = 0.5 * omega * np.exp(1j * phase)
        for i, n in enumerate(blocks):
            if n == m:
                deltas[i] += delta
                cs[i] += carrier
            elif mode is not BlockMode.RWA:
                cs[i] += carrier * np.exp(1j * (n - m) * chi * times)
    if mode is BlockMode.FULL_HIGHER_ORDER and params.chi_prime != 0.0:
        for i, n in enumerate(blocks):
            cs[i] *= np.exp(0.5j * params.chi_prime * (n * n - n) * times)
    return deltas, cs


def build_block_hamiltonian(
    n: int,
    schedule: PulseSchedule,
    t: float,
    params: SystemParams,
    mode: BlockMode,
) -> np.ndarray:
    """2x2 Hermitian Hamiltonian of block n at time t (basis |g,n>, |e,n>)."""
    _check_block_args(n, schedule, t, params)
    deltas, cs = block_coefficients(np.array([n]), schedule, np.array([t]), params, mode)
    delta, c = deltas[0, 0], cs[0, 0]
    return np.array(
        [[-0.5 * delta, c], [np.conj(c), 0.5 * delta]], dtype=complex
    )


def full_space_hamiltonian(
    schedule: PulseSchedule,
    t: float,
    params: SystemParams,
    mode: BlockMode,
) -> np.ndarray:
    """Direct sum of all block Hamiltonians, ordered |g,0>, |e,0>, |g,1>, ...

    The drive never changes photon number, so the matrix is exactly
    block diagonal; this assembly is the consistency oracle for the
    per-block construction.
    """
    _check_block_args(0, schedule, t, params)
    dim = 2 * params.n_max
    H = np.zeros((dim, dim), dtype=complex)
    deltas, cs = block_coefficients(
        np.arange(params.n_max), schedule, np.array([t]), params, mode
    )
    for n in range(params.n_max):
        H[2 * n, 2 * n] = -0.5 * deltas[n, 0]
        H[2 * n + 1, 2 * n + 1] = 0.5 * deltas[n, 0]
        H[2 * n, 2 * n + 1] = cs[n, 0]
        H[2 * n + 1, 2 * n] = np.conj(cs[n, 0])
    return H


@dataclass(frozen=True)
class BlockControls:
    """Effective single-block controls as callables of time.

    ``drive(t)`` is the complex |g><e| coefficient c(t) (rad/s), from
    which amplitude and phase follow as 2|c| and arg c; ``delta(t)`` is
    the block detuning.  ``breakpoints`` lists interior times where the
    controls are discontinuous (segment edges).
    """

    drive: callable
    delta: callable
    breakpoints: tuple[float, ...] = ()

    @classmethod
    def from_polar(cls, omega, phi, delta, breakpoints=()):
        """Build from amplitude/phase/detuning callables."""
        return cls(
            drive=lambda t: 0.5 * omega(t) * np.exp(1j * phi(t)),
            delta=delta,
            breakpoints=tuple(breakpoints),
        )


def effective_block_controls(
    n: int,
    schedule: PulseSchedule,
    params: SystemParams,
    mode: BlockMode,
) -> BlockControls:
    """Controls seen by block n under the given model level."""
    if not 0 <= n < params.n_max:
        raise ValueError(f"block index {n} outside truncation n_max={params.n_max}")
    narr = np.array([n])

    def drive(t):
        _, cs = block_coefficients(narr, schedule, np.array([t]), params, mode)
        return complex(cs[0, 0])

    def delta(t):
        tone = schedule.tone_for_level(n)
        if tone is None:
            return 0.0
        return float(tone.detuning(np.array([t]))[0])

    return BlockControls(
        drive=drive, delta=delta, breakpoints=tuple(schedule.segment_boundaries[:-1])
    )
