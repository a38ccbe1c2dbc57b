import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geosnap import (
    BlockMode,
    SnapTarget,
    SystemParams,
    build_block_hamiltonian,
    full_space_hamiltonian,
    orange_slice_schedule,
)
from geosnap.pulse import DriveTone, PulseSchedule, Scheme, ToneSegment

TWO_PI = 2.0 * math.pi


def _schedule_from_tones(tones, duration, omega_max=1.0):
    boundaries = tuple(sorted({seg.t_end for tone in tones for seg in tone.segments}))
    return PulseSchedule(
        tuple(tones), boundaries, Scheme.ORANGE_SLICE, omega_max, SnapTarget((0.0,))
    )


def _flat_tone(level, duration, peak, phase, detuning=0.0):
    # a sine arch evaluated at its midpoint gives back the peak exactly
    return DriveTone(
        level, (ToneSegment(0.0, duration, peak, phase, detuning=detuning),)
    )


class TestSystemParams:
    def test_rejects_nonpositive_chi(self):
        with pytest.raises(ValueError):
            SystemParams(chi=0.0)

    def test_rejects_negative_rates(self):
        with pytest.raises(ValueError):
            SystemParams(chi=1.0, gamma_decay=-1.0)

    def test_rejects_empty_truncation(self):
        with pytest.raises(ValueError):
            SystemParams(chi=1.0, n_max=0)

    def test_linear_frequency_conversion(self):
        p = SystemParams.from_linear_frequencies(2.5, 1.45, 1.45, 3.0, 5.0)
        assert p.chi == pytest.approx(TWO_PI * 2.5e6)
        assert p.gamma_decay == pytest.approx(TWO_PI * 1.45e3)
        assert p.chi_prime == pytest.approx(TWO_PI * 5e3)


class TestBlockHamiltonian:
    def test_detuning_only_diagonal(self):
        # zero amplitude, delta = 0.3 rad/s: diagonal is -/+ 0.15 on g/e
        params = SystemParams(chi=1.0, n_max=3)
        tone = _flat_tone(1, 2.0, 0.0, 0.0, detuning=0.3)
        sched = _schedule_from_tones([tone], 2.0)
        for mode in BlockMode:
            H = build_block_hamiltonian(1, sched, 0.7, params, mode)
            assert H[0, 0] == pytest.approx(-0.15)
            assert H[1, 1] == pytest.approx(0.15)
            assert H[0, 1] == 0.0

    def test_resonant_tone_phase(self, params):
        # peak 2*pi*0.66 MHz at the arch midpoint, phase pi/2
        om = TWO_PI * 0.66e6
        tau = 2e-6
        tone = _flat_tone(1, tau, om, math.pi / 2.0)
        sched = _schedule_from_tones([tone], tau)
        H = build_block_hamiltonian(1, sched, tau / 2.0, params, BlockMode.RWA)
        assert H[0, 1] == pytest.approx(0.5 * om * np.exp(1j * math.pi / 2.0))

    def test_counterrotating_pair_at_chi_t_pi(self):
        # tones at m = 0 and 2 with phase 0 seen from block 1 at chi*t = pi
        chi = 1.0
        params = SystemParams(chi=chi, n_max=3)
        t = math.pi / chi
        tau = 2.0 * t
        om = 4.0
        tones = [_flat_tone(0, tau, om, 0.0), _flat_tone(2, tau, om, 0.0)]
        sched = _schedule_from_tones(tones, tau)
        H = build_block_hamiltonian(1, sched, t, params, BlockMode.FULL)
        # each contributes (Omega/2) e^{+-i pi} = -Omega/2 at the arch midpoint
        assert H[0, 1] == pytest.approx(-om, abs=1e-12)

    def test_out_of_truncation_rejected(self, params, target, omega_ref):
        sched = orange_slice_schedule(target, omega_ref)
        with pytest.raises(ValueError):
            build_block_hamiltonian(params.n_max, sched, 0.0, params, BlockMode.RWA)

    def test_time_outside_schedule_rejected(self, params, target, omega_ref):
        sched = orange_slice_schedule(target, omega_ref)
        with pytest.raises(ValueError):
            build_block_hamiltonian(0, sched, 2.0 * sched.duration, params, BlockMode.RWA)

    @pytest.mark.parametrize("mode", list(BlockMode))
    def test_hermitian_by_construction(self, params, target, omega_ref, mode):
        sched = orange_slice_schedule(target, omega_ref)
        for t in np.linspace(0.0, sched.duration, 17):
            H = build_block_hamiltonian(1, sched, float(t), params, mode)
            assert np.abs(H - H.conj().T).max() == 0.0

    def test_rwa_subsumption(self, params, target, omega_ref):
        # with every off-resonant amplitude zero, FULL equals RWA exactly
        tau = 1e-6
        tones = [
            _flat_tone(1, tau, omega_ref, 0.3),
            _flat_tone(0, tau, 0.0, 0.1),
            _flat_tone(2, tau, 0.0, -0.4),
        ]
        sched = _schedule_from_tones(tones, tau)
        for t in np.linspace(0.0, tau, 9):
            H_rwa = build_block_hamiltonian(1, sched, float(t), params, BlockMode.RWA)
            H_full = build_block_hamiltonian(1, sched, float(t), params, BlockMode.FULL)
            assert np.array_equal(H_rwa, H_full)

    def test_higher_order_reduces_to_full_when_chi_prime_zero(self, target, omega_ref):
        p = SystemParams(chi=TWO_PI * 2.5e6, chi_prime=0.0, n_max=3)
        sched = orange_slice_schedule(target, omega_ref)
        for t in np.linspace(0.0, sched.duration, 9):
            H_full = build_block_hamiltonian(2, sched, float(t), p, BlockMode.FULL)
            H_ho = build_block_hamiltonian(
                2, sched, float(t), p, BlockMode.FULL_HIGHER_ORDER
            )
            assert np.array_equal(H_full, H_ho)


class TestFullSpaceHamiltonian:
    def test_single_block_truncation(self, omega_ref):
        params = SystemParams(chi=TWO_PI * 2.5e6, n_max=1)
        sched = orange_slice_schedule(SnapTarget((0.3,)), omega_ref)
        t = 0.5 * sched.duration
        H = full_space_hamiltonian(sched, t, params, BlockMode.RWA)
        assert H.shape == (2, 2)
        assert np.array_equal(
            H, build_block_hamiltonian(0, sched, t, params, BlockMode.RWA)
        )

    def test_zero_drive_gives_zero_matrix(self):
        params = SystemParams(chi=1.0, n_max=3)
        tones = [_flat_tone(n, 1.0, 0.0, 0.0) for n in range(3)]
        sched = _schedule_from_tones(tones, 1.0)
        H = full_space_hamiltonian(sched, 0.5, params, BlockMode.RWA)
        assert np.abs(H).max() == 0.0

    @pytest.mark.parametrize("mode", list(BlockMode))
    def test_matches_blocks_entrywise(self, params, target, omega_ref, mode):
        sched = orange_slice_schedule(target, omega_ref)
        t = 0.5 * sched.duration
        H = full_space_hamiltonian(sched, t, params, mode)
        for n in range(params.n_max):
            block = build_block_hamiltonian(n, sched, t, params, mode)
            assert np.array_equal(H[2 * n : 2 * n + 2, 2 * n : 2 * n + 2], block)
        off = H.copy()
        for n in range(params.n_max):
            off[2 * n : 2 * n + 2, 2 * n : 2 * n + 2] = 0.0
        assert np.abs(off).max() == 0.0  # no photon-number-changing terms


@settings(max_examples=40, deadline=None)
@given(
    peaks=st.lists(st.floats(0.0, 1e7), min_size=3, max_size=3),
    phases=st.lists(st.floats(-math.pi, math.pi), min_size=3, max_size=3),
    t_frac=st.floats(0.0, 1.0),
)
def test_hermiticity_property(peaks, phases, t_frac):
    params = SystemParams(chi=TWO_PI * 2.5e6, chi_prime=TWO_PI * 5e3, n_max=4)
    tau = 1e-6
    tones = [_flat_tone(n, tau, pk, ph) for n, (pk, ph) in enumerate(zip(peaks, phases))]
    sched = _schedule_from_tones(tones, tau)
    t = t_frac * tau
    for mode in BlockMode:
        H = full_space_hamiltonian(sched, t, params, mode)
        assert np.abs(H - H.conj().T).max() == 0.0
