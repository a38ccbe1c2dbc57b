"""Bloch-sphere trajectory analysis for a single driven block.

A block state is parametrized as |q+> = cos(zeta/2)|g> + sin(zeta/2)
e^{i xi}|e>, together with an accumulated phase f so that the physical
state is e^{i f}|q+>.  With the drive convention c(t)|g><e| + h.c. and
detuning +delta/2 on |e>, the angles obey

    zeta' = -2 Im(c e^{i xi})
    xi'   = -delta - 2 cot(zeta) Re(c e^{i xi})
    f'    =  delta/2 - tan(zeta/2) Re(c e^{i xi})

(The f equation is the regular algebraic reduction of the usual
connection integral, so the equator zeta = pi/2 needs no special
treatment; only the poles are genuine singularities of the angle
chart.)  Alongside f, the integrator accumulates the geometric part
gamma_g' = -xi'(1 - cos zeta)/2 and the dynamical part
gamma_d' = -<H> = (delta/2) cos zeta - sin(zeta) Re(c e^{i xi}).

Near the poles the angle chart breaks down; there the integrator
switches to the state picture (plain Schroedinger evolution, which is
regular everywhere) and recovers the angles by inverting the
parametrization, keeping xi and f continuous across the handoff.  A
pole crossing deposits a finite jump into xi and f; its geometric-phase
contribution is recovered exactly from gamma_g = df - dgamma_d over the
bridged span.

In the Bloch frame used throughout (x, y, z) = (sin zeta cos xi,
sin zeta sin xi, cos zeta), the ground state sits at the north pole
(0, 0, +1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .system import BlockControls

__all__ = [
    "Trajectory",
    "TrajectoryState",
    "PhaseDecomposition",
    "TrajectoryClosureError",
    "auxiliary_states",
    "integrate_trajectory",
    "phase_decomposition",
    "holonomy_unitary",
    "cyclicity_check",
    "bloch_from_angles",
]

# angle-chart watchdogs: enter the state bridge inside DELTA_BRIDGE of a
# pole, leave it again beyond DELTA_EXIT (hysteresis avoids chatter)
DELTA_BRIDGE = 1e-2
DELTA_EXIT = 2e-2
POLE_TOL = 1e-6
_AMP_FLOOR = 1e-4


class TrajectoryClosureError(RuntimeError):
    """Raised when a phase decomposition is requested for an open loop."""

    def __init__(self, d_zeta: float, d_xi: float):
        self.residuals = (d_zeta, d_xi)
        super().__init__(
            f"trajectory does not close: |d_zeta|={d_zeta:.3e}, |d_xi|={d_xi:.3e}"
        )


@dataclass(frozen=True)
class TrajectoryState:
    zeta: float
    xi: float
    f_plus: float


@dataclass(frozen=True)
class PhaseDecomposition:
    gamma_total: float
    gamma_dynamic: float
    gamma_geometric: float


@dataclass(frozen=True)
class Trajectory:
    """Sampled block trajectory with phase accumulators.

    ``pole_times`` lists closest-approach instants where the trajectory
    came within POLE_TOL of a pole (the angle chart is singular there);
    ``equator_times`` lists zeta = pi/2 crossings, where the textbook
    form of the dynamical-phase integrand is singular even though the
    reduction integrated here is not.
    """

    times: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    f_plus: np.ndarray
    gamma_g: np.ndarray
    gamma_d: np.ndarray
    pole_times: tuple[float, ...] = ()
    equator_times: tuple[float, ...] = ()
    bridge_spans: tuple[tuple[float, float], ...] = ()

    @property
    def singular_times(self) -> tuple[float, ...]:
        return self.pole_times

    def state_at(self, k: int) -> TrajectoryState:
        return TrajectoryState(
            float(self.zeta[k]), float(self.xi[k]), float(self.f_plus[k])
        )


def auxiliary_states(zeta: float, xi: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair spanning the block, parametrized by (zeta, xi)."""
    c, s = math.cos(zeta / 2.0), math.sin(zeta / 2.0)
    q_plus = np.array([c, s * np.exp(1j * xi)])
    q_minus = np.array([s * np.exp(-1j * xi), -c])
    return q_plus, q_minus


def bloch_from_angles(zeta, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    zeta = np.asarray(zeta)
    xi = np.asarray(xi)
    return np.sin(zeta) * np.cos(xi), np.sin(zeta) * np.sin(xi), np.cos(zeta)


def _hamiltonian(c: complex, delta: float) -> np.ndarray:
    return np.array([[-0.5 * delta, c], [np.conj(c), 0.5 * delta]])


def _angles_rhs(controls: BlockControls):
    def rhs(t, y):
        zeta, xi, _f, _gg, _gd = y.real
        c = controls.drive(t)
        delta = controls.delta(t)
        z = c * np.exp(1j * xi)
        zr, zi = z.real, z.imag
        sz, cz = math.sin(zeta), math.cos(zeta)
        d_zeta = -2.0 * zi
        d_xi = -delta - 2.0 * (cz / sz) * zr
        d_f = 0.5 * delta - math.tan(zeta / 2.0) * zr
        d_gg = -0.5 * d_xi * (1.0 - cz)
        d_gd = 0.5 * delta * cz - sz * zr
        return [d_zeta, d_xi, d_f, d_gg, d_gd]

    return rhs


def _state_rhs(controls: BlockControls):
    def rhs(t, y):
        psi = y[:2]
        c = controls.drive(t)
        delta = controls.delta(t)
        H = _hamiltonian(c, delta)
        d_psi = -1j * (H @ psi)
        d_gd = -np.real(np.conj(psi) @ (H @ psi))
        return [d_psi[0], d_psi[1], d_gd + 0.0j]

    return rhs


def _pole_distance(zeta: float) -> float:
    return min(zeta, math.pi - zeta)


def _sin_zeta_of_state(y) -> float:
    ag, ae = abs(y[0]), abs(y[1])
    norm = math.hypot(ag, ae)
    return 2.0 * ag * ae / (norm * norm)


def _nearest_branch(raw: float, ref: float) -> float:
    return raw + 2.0 * math.pi * round((ref - raw) / (2.0 * math.pi))


def _angles_from_state(psi, xi_ref: float, f_ref: float):
    """Invert the parametrization, staying on the branch closest to refs."""
    ag, ae = abs(psi[0]), abs(psi[1])
    zeta = 2.0 * math.atan2(ae, ag)
    f = f_ref
    if ag > _AMP_FLOOR:
        f = _nearest_branch(np.angle(psi[0]), f_ref)
    xi = xi_ref
    if ae > _AMP_FLOOR and ag > _AMP_FLOOR:
        xi = _nearest_branch(np.angle(psi[1]) - np.angle(psi[0]), xi_ref)
    return zeta, xi, f


def integrate_trajectory(
    controls: BlockControls,
    t_span: tuple[float, float],
    zeta0: float = 0.0,
    xi0: float = 0.0,
    num: int = 2001,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> Trajectory:
    """Integrate the block-angle equations over ``t_span``.

    The angle chart is integrated wherever the trajectory stays clear of
    the poles; pole neighbourhoods (including a start or end exactly at
    a pole) are bridged in the state picture and the angles recovered by
    inversion, so pole crossings and their phase jumps are handled
    exactly.  Returns ``num`` equally spaced samples.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    sample_times = np.linspace(t0, t1, num)
    if t1 == t0:
        z = np.full(num, zeta0)
        x = np.full(num, xi0)
        zero = np.zeros(num)
        return Trajectory(sample_times, z, x, zero.copy(), zero.copy(), zero.copy())

    breakpoints = sorted({t0, t1, *(b for b in controls.breakpoints if t0 < b < t1)})

    zeta, xi, f, gg, gd = float(zeta0), float(xi0), 0.0, 0.0, 0.0
    out = {
        "zeta": np.empty(num),
        "xi": np.empty(num),
        "f": np.empty(num),
        "gg": np.empty(num),
        "gd": np.empty(num),
    }
    filled = np.zeros(num, dtype=bool)
    pole_times: list[float] = []
    equator_times: list[float] = []
    bridge_spans: list[tuple[float, float]] = []

    def record(k, z, x, fv, g1, g2):
        out["zeta"][k] = z
        out["xi"][k] = x
        out["f"][k] = fv
        out["gg"][k] = g1
        out["gd"][k] = g2
        filled[k] = True

    if sample_times[0] == t0:
        record(0, zeta, xi, f, gg, gd)

    def _solve(rhs, span, y0, events):
        sol = solve_ivp(
            rhs,
            span,
            y0,
            method="DOP853",
            rtol=rtol,
            atol=atol,
            events=events,
            dense_output=True,
        )
        if not sol.success:
            raise RuntimeError(f"trajectory integration failed: {sol.message}")
        return sol

    use_bridge = _pole_distance(zeta) < DELTA_BRIDGE
    for seg_a, seg_b in zip(breakpoints[:-1], breakpoints[1:]):
        t = seg_a
        while t < seg_b - 1e-15 * max(1.0, abs(seg_b)):
            if not use_bridge:
                # ---- angle chart ----
                def hit_pole(tt, y):
                    return math.sin(float(y[0].real)) - math.sin(DELTA_BRIDGE)

                hit_pole.terminal = True
                hit_pole.direction = -1

                def equator(tt, y):
                    return math.cos(float(y[0].real))

                equator.terminal = False

                sol = _solve(
                    _angles_rhs(controls), (t, seg_b), [zeta, xi, f, gg, gd],
                    [hit_pole, equator],
                )
                t_end = sol.t[-1]
                sel = (~filled) & (sample_times > t) & (sample_times <= t_end)
                if sel.any():
                    vals = sol.sol(sample_times[sel])
                    for k, col in zip(np.nonzero(sel)[0], vals.T):
                        record(k, *col.real)
                equator_times.extend(float(te) for te in sol.t_events[1])
                zeta, xi, f, gg, gd = (float(v.real) for v in sol.y[:, -1])
                if len(sol.t_events[0]) > 0:
                    use_bridge = True
                t = t_end
            else:
                # ---- state bridge ----
                t_b0 = t
                psi0 = np.exp(1j * f) * auxiliary_states(zeta, xi)[0]

                def leave_pole(tt, y):
                    return _sin_zeta_of_state(y) - math.sin(DELTA_EXIT)

                leave_pole.terminal = True
                leave_pole.direction = 1

                sol = _solve(
                    _state_rhs(controls),
                    (t, seg_b),
                    [psi0[0], psi0[1], 0.0 + 0.0j],
                    [leave_pole],
                )
                t_end = sol.t[-1]
                # walk a dense grid to keep the branch tracking tight
                walk = np.union1d(
                    np.linspace(t, t_end, 513),
                    sample_times[(sample_times > t) & (sample_times <= t_end)],
                )
                xi_run, f_run = xi, f
                gg0, gd0, f0 = gg, gd, f
                min_dist, min_t = math.inf, t
                for tw in walk:
                    yw = sol.sol(tw)
                    psi = yw[:2]
                    gd_w = gd0 + float(yw[2].real)
                    zeta_w, xi_run, f_run = _angles_from_state(psi, xi_run, f_run)
                    gg_w = gg0 + (f_run - f0) - (gd_w - gd0)
                    dist = _pole_distance(zeta_w)
                    if dist < min_dist:
                        min_dist, min_t = dist, tw
                    k = int(np.searchsorted(sample_times, tw))
                    if (
                        k < num
                        and not filled[k]
                        and abs(sample_times[k] - tw) <= 5e-16 * max(1.0, abs(tw))
                    ):
                        record(k, zeta_w, xi_run, f_run, gg_w, gd_w)
                    zeta, xi, f, gg, gd = zeta_w, xi_run, f_run, gg_w, gd_w
                if min_dist < POLE_TOL:
                    pole_times.append(float(min_t))
                bridge_spans.append((float(t_b0), float(t_end)))
                if len(sol.t_events[0]) > 0:
                    use_bridge = False
                t = t_end

    # fill any samples that landed exactly on breakpoints / unvisited edges
    if not filled.all():
        for k in np.nonzero(~filled)[0]:
            j = np.argmin(np.abs(sample_times[filled] - sample_times[k]))
            src = np.nonzero(filled)[0][j]
            record(
                k,
                out["zeta"][src],
                out["xi"][src],
                out["f"][src],
                out["gg"][src],
                out["gd"][src],
            )

    return Trajectory(
        sample_times,
        out["zeta"],
        out["xi"],
        out["f"],
        out["gg"],
        out["gd"],
        tuple(pole_times),
        tuple(equator_times),
        tuple(bridge_spans),
    )


def cyclicity_check(trajectory: Trajectory) -> tuple[float, float]:
    """Closure residuals (|d_zeta|, |d_xi| mod 2pi) between the endpoints.

    At a pole the azimuth is pure gauge; trajectories that start and end
    on the same meridian (as the loop constructions here do) still
    report a clean residual.
    """
    d_zeta = abs(float(trajectory.zeta[-1] - trajectory.zeta[0]))
    d_xi_raw = float(trajectory.xi[-1] - trajectory.xi[0])
    d_xi = abs((d_xi_raw + math.pi) % (2.0 * math.pi) - math.pi)
    return d_zeta, d_xi


def phase_decomposition(
    trajectory: Trajectory, closure_tol: float = 1e-6
) -> PhaseDecomposition:
    """Split the accumulated phase of a closed loop.

    ``gamma_total`` is the endpoint value of the phase accumulator;
    ``gamma_geometric`` is the solid-angle integral -(1/2) int xi' (1 -
    cos zeta) dt and ``gamma_dynamic`` the energy integral, both taken
    from the trajectory's accumulators.  Raises
    :class:`TrajectoryClosureError` for open loops.
    """
    d_zeta, d_xi = cyclicity_check(trajectory)
    if max(d_zeta, d_xi) > closure_tol:
        raise TrajectoryClosureError(d_zeta, d_xi)
    return PhaseDecomposition(
        gamma_total=float(trajectory.f_plus[-1] - trajectory.f_plus[0]),
        gamma_dynamic=float(trajectory.gamma_d[-1] - trajectory.gamma_d[0]),
        gamma_geometric=float(trajectory.gamma_g[-1] - trajectory.gamma_g[0]),
    )


def holonomy_unitary(gamma: float, zeta0: float, xi0: float) -> np.ndarray:
    """Cyclic-evolution unitary exp(i gamma n.sigma) about the loop anchor.

    Built from the spectral projectors of the (zeta0, xi0) pair, so it is
    the rotation by 2*gamma about the Bloch axis (sin zeta0 cos xi0,
    sin zeta0 sin xi0, cos zeta0) regardless of Pauli-frame bookkeeping.
    For zeta0 = 0 it reduces to diag(e^{i gamma}, e^{-i gamma}) in the
    (|g>, |e>) ordering.
    """
    q_plus, q_minus = auxiliary_states(zeta0, xi0)
    p_plus = np.outer(q_plus, q_plus.conj())
    p_minus = np.outer(q_minus, q_minus.conj())
    return np.exp(1j * gamma) * p_plus + np.exp(-1j * gamma) * p_minus
