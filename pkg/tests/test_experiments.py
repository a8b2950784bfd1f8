import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from seaqt import qstate as qs
from seaqt.experiments import (
    EngineSettings,
    ExperimentError,
    ExperimentPlan,
    NonIdentifiableError,
    QubitParams,
    entangle_disentangle,
    fft_peak,
    fit_ramsey,
    fit_t1,
    inversion_recovery,
    ramsey,
    run_plan,
    shot_sample,
)
from seaqt.hamiltonians import cr_hamiltonian
from seaqt.metrics import bell_fidelity, concurrence
from conftest import seeds

QUIET = 1e12  # inverse rate standing in for "channel off"


def _maxima(y):
    idx = [i for i in range(1, len(y) - 1) if y[i] >= y[i - 1] and y[i] > y[i + 1]]
    return np.asarray(y)[idx]


# -- shot noise --------------------------------------------------------------------


def test_shot_sample_examples():
    assert shot_sample(0.0, 100, 1) == (0.0, 0.0)
    assert shot_sample(1.0, 100, 1) == (1.0, 0.0)
    mean, std = shot_sample(0.5, 8192, 1)
    assert std == pytest.approx(0.00552, abs=5e-6)
    assert shot_sample(0.3, 8192, 42) == shot_sample(0.3, 8192, 42)


def test_shot_sample_errors():
    with pytest.raises(ValueError):
        shot_sample(1.2, 10, 0)
    with pytest.raises(ValueError):
        shot_sample(0.5, 0, 0)


@given(st.floats(0, 1), seeds)
def test_shot_sample_range(p, seed):
    mean, std = shot_sample(p, 64, seed)
    assert 0 <= mean <= 1
    assert std == pytest.approx(math.sqrt(p * (1 - p) / 64))


# -- validation --------------------------------------------------------------------


def test_qubit_params_validation(device):
    q = device.qubit(0)
    with pytest.raises(ValueError):
        replace(q, x0=-1.0)
    with pytest.raises(ValueError):
        replace(q, index=7)
    assert q.gamma1 == pytest.approx(1 / 184.3)
    assert q.delta_omega == pytest.approx(2 * np.pi * 0.1526)


def test_plan_validation():
    assert len(ExperimentPlan("t1").delays) == 25
    assert ExperimentPlan("entangle").times[-1] == pytest.approx(20.45)
    for kw in ({"kind": "echo"}, {"kind": "t1", "delays": (1.0, 0.5)}, {"kind": "t1", "shots": 0},
               {"kind": "t1", "engine": "qutip"}, {"kind": "t1", "delays": ()}, {"kind": "entangle", "scenario": 3}):
        with pytest.raises(ValueError):
            ExperimentPlan(**kw)


def test_pipeline_kind_mismatch(device):
    with pytest.raises(ExperimentError):
        inversion_recovery(device.qubit(0), ExperimentPlan("ramsey"))
    with pytest.raises(ExperimentError):
        ramsey(device.qubit(0), ExperimentPlan("t1"))
    with pytest.raises(ExperimentError):
        entangle_disentangle(device.qubit(2), device.qubit(3), ExperimentPlan("entangle", scenario=2))


# -- inversion recovery ------------------------------------------------------------


def test_t1_delay_zero_and_lindblad_closed_form(device):
    q = device.qubit(1)
    plan = ExperimentPlan("t1", engine="lindblad")
    curve = inversion_recovery(q, plan, device.settings)
    z = curve.value("lindblad_Z")
    assert z[0] == pytest.approx(-1.0, abs=1e-12)
    p1 = (1 - z) / 2
    assert p1[-1] == pytest.approx(np.exp(-42.6 / 97.25), rel=0.01)
    assert np.allclose(p1, np.exp(-plan.times / 97.25), atol=1e-9)
    assert np.all(np.diff(z) > 0)


def test_t1_seaqt_monotone_with_non_decreasing_tau(device):
    q = device.qubit(1)
    curve = inversion_recovery(q, ExperimentPlan("t1", engine="seaqt"), device.settings)
    z = curve.value("seaqt_Z")
    # prepared state carries the SEAQT depolarising admixture
    assert z[0] == pytest.approx(-(1 - device.settings.initial_mixing), abs=1e-12)
    assert np.all(np.diff(z) > 0)
    assert np.all(z < 1)
    assert np.all(np.diff(curve.value("seaqt_tau_dr")) >= 0)


def test_t1_shot_columns(device):
    plan = ExperimentPlan("t1", shots=8192, engine="lindblad", seed=3)
    curve = inversion_recovery(device.qubit(0), plan, device.settings)
    z, zs, std = curve.value("lindblad_Z"), curve.value("lindblad_Z_shots"), curve.std("lindblad_Z")
    assert np.all(np.abs(zs - z) <= 6 * std + 1e-12)
    again = inversion_recovery(device.qubit(0), plan, device.settings)
    assert np.array_equal(again.value("lindblad_Z_shots"), zs)


def test_pulse_resolved_preparation(device):
    settings = replace(device.settings, pulse_resolved=True)
    plan = ExperimentPlan("t1", delays=(0.0, 1.0), engine="lindblad")
    z = inversion_recovery(device.qubit(1), plan, settings).value("lindblad_Z")
    assert z[0] == pytest.approx(-1.0, abs=1e-3)


# -- Ramsey ----------------------------------------------------------------------


def test_ramsey_dissipation_free_has_unit_fringes(device):
    q = replace(device.qubit(0), inv_gamma1=QUIET, inv_gamma2=QUIET)
    plan = ExperimentPlan("ramsey", delays=tuple(np.linspace(0, 42.6, 400)), engine="lindblad")
    x = ramsey(q, plan, device.settings).value("lindblad_X")
    # samples miss the exact crest; compare with the analytic fringe at the same times
    assert np.allclose(x, np.cos(2 * np.pi * 0.1526 * plan.times), atol=1e-6)
    assert np.max(np.abs(x)) == pytest.approx(1.0, abs=1e-3)


def test_ramsey_frequency_from_fft(device):
    q = device.qubit(0)
    plan = ExperimentPlan("ramsey", engine="lindblad")
    x = ramsey(q, plan, device.settings).value("lindblad_X")
    f, width = fft_peak(plan.times, x)
    assert abs(f * 1e3 - 152.6) <= width * 1e3


def test_ramsey_lindblad_t2_star_matches_closed_form(device):
    q = device.qubit(1)
    plan = ExperimentPlan("ramsey", engine="lindblad")
    x = ramsey(q, plan, device.settings).value("lindblad_X")
    fit = fit_ramsey(plan.times, x)
    assert fit.t2_star == pytest.approx(1 / (q.gamma1 / 2 + 2 * q.gamma2), rel=0.02)
    assert fit.delta_f_khz == pytest.approx(161.1, rel=0.01)


def test_ramsey_seaqt_envelope_and_z_drift(device):
    q = device.qubit(0)
    plan = ExperimentPlan("ramsey", delays=tuple(np.linspace(0, 42.6, 120)))
    curve = ramsey(q, plan, device.settings)
    peaks = _maxima(np.abs(curve.value("seaqt_X")))
    assert len(peaks) >= 4 and np.all(np.diff(peaks) < 0)
    for eng in ("seaqt", "lindblad"):
        assert np.all(np.diff(curve.value(f"{eng}_Z")) > 0)


# -- entanglement ------------------------------------------------------------------


def test_entangle_width_zero(device):
    plan = ExperimentPlan("entangle", delays=(0.0,), engine="lindblad")
    curve = entangle_disentangle(device.qubit(0), device.qubit(1), plan, device.settings, tomography=False)
    assert curve.value("lindblad_concurrence")[0] == pytest.approx(0.0, abs=1e-12)
    assert curve.value("lindblad_fidelity")[0] == pytest.approx(0.5, abs=1e-12)
    # raw overlap of (|00> + |10>)/sqrt(2) with |Phi>
    psi = np.array([1, 0, 1, 0]) / np.sqrt(2)
    assert bell_fidelity(qs.ket2dm(psi)) == pytest.approx(0.25)


def test_entangle_quarter_turn_without_dissipation(device):
    q0 = replace(device.qubit(0), inv_gamma1=QUIET, inv_gamma2=QUIET)
    q1 = replace(device.qubit(1), inv_gamma1=QUIET, inv_gamma2=QUIET)
    nu = device.settings.cr.nu_echo["zx"]
    t = np.pi / (2 * nu)
    plan = ExperimentPlan("entangle", delays=(0.0, t), engine="lindblad", seed=1)
    curve = entangle_disentangle(q0, q1, plan, device.settings)
    assert curve.value("lindblad_concurrence")[1] == pytest.approx(1.0, abs=1e-6)
    assert curve.value("lindblad_fidelity")[1] == pytest.approx(1.0, abs=1e-6)
    assert curve.value("lindblad_fidelity_shots")[1] > 0.97


def test_entangle_curves_bounded_and_below_unitary(device):
    q0, q1 = device.qubit(0), device.qubit(1)
    plan = ExperimentPlan("entangle", delays=tuple(np.linspace(0, 20.45, 12)), scenario=2)
    curve = entangle_disentangle(q0, q1, plan, device.settings, tomography=False)
    h = cr_hamiltonian(device.settings.cr, echoed=True)
    psi = np.kron(np.array([1, 1]) / np.sqrt(2), qs.KET0)
    eps = device.settings.initial_mixing
    for eng, mix in (("seaqt", eps), ("lindblad", 0.0)):
        rho0 = (1 - mix) * qs.ket2dm(psi) + mix * np.eye(4) / 4
        ref = np.array([concurrence(u @ rho0 @ u.conj().T) for u in (expm(-1j * h * t) for t in plan.times)])
        c, f = curve.value(f"{eng}_concurrence"), curve.value(f"{eng}_fidelity")
        assert np.all((0 <= c) & (c <= 1)) and np.all((0 <= f) & (f <= 1))
        assert np.all(c <= ref + 1e-9)


def test_scenario_two_maxima_decrease(device):
    plan = ExperimentPlan("entangle", engine="seaqt", scenario=2)
    curve = entangle_disentangle(device.qubit(0), device.qubit(1), plan, device.settings, tomography=False)
    peaks = _maxima(curve.value("seaqt_concurrence"))
    assert len(peaks) >= 2
    assert np.all(np.diff(peaks) < 0)
    assert 0 < peaks[0] < 1


def test_results_independent_of_thread_count(device, monkeypatch):
    plan = ExperimentPlan("t1", delays=(0.0, 5.0, 10.0), seed=9)
    serial = run_plan(plan, device.qubit(2), device.settings)
    monkeypatch.setenv("SEAQT_THREADS", "4")
    threaded = run_plan(plan, [device.qubit(2)], device.settings)
    for name in serial.columns:
        assert np.array_equal(serial.value(name), threaded.value(name))


def test_repeated_and_zero_delays(device):
    plan = ExperimentPlan("t1", delays=(0.0, 0.0, 3.0, 3.0), engine="lindblad")
    z = inversion_recovery(device.qubit(0), plan, device.settings).value("lindblad_Z")
    assert z[0] == z[1] and z[2] == z[3]
    only_zero = ExperimentPlan("t1", delays=(0.0,), engine="lindblad")
    assert inversion_recovery(device.qubit(0), only_zero, device.settings).value("lindblad_Z")[0] == pytest.approx(-1)


# -- closed-form fits --------------------------------------------------------------


def test_fit_t1_synthetic():
    t = np.linspace(0, 42.6, 25)
    assert fit_t1(t, np.exp(-t / 50)).t1 == pytest.approx(50, rel=1e-3)
    f = fit_t1(t, 0.9 * np.exp(-t / 30) + 0.05, offset=True)
    assert f.t1 == pytest.approx(30, rel=1e-6) and f.offset == pytest.approx(0.05, abs=1e-8)


def test_fit_t1_errors():
    t = np.linspace(0, 10, 5)
    with pytest.raises(NonIdentifiableError):
        fit_t1(t, np.full(5, 0.4))
    with pytest.raises(NonIdentifiableError):
        fit_t1(t, 0.5 + 1e-4 * np.arange(5), std=np.full(5, 0.01))
    with pytest.raises(ValueError):
        fit_t1([0, 0, 1], [1, 1, 0.5])


def test_fit_ramsey_synthetic():
    t = np.linspace(0, 42.6, 120)
    y = 0.9 * np.exp(-t / 30) * np.cos(2 * np.pi * 0.150 * t + 0.3) + 0.02
    fit = fit_ramsey(t, y)
    assert fit.t2_star == pytest.approx(30, rel=0.01)
    assert fit.delta_f_khz == pytest.approx(150, rel=0.01)
    assert not fit.bounded


def test_fit_ramsey_undamped_gives_sentinel():
    t = np.linspace(0, 42.6, 120)
    fit = fit_ramsey(t, np.cos(2 * np.pi * 0.150 * t))
    assert fit.bounded and fit.t2_star == math.inf


def test_fit_ramsey_errors():
    t = np.linspace(0, 10, 50)
    with pytest.raises(NonIdentifiableError):
        fit_ramsey(t, np.cos(2 * np.pi * 0.1 * t))
    with pytest.raises(NonIdentifiableError):
        fit_ramsey(t, np.zeros(50))
    with pytest.raises(ValueError):
        fft_peak([0, 1, 3, 4], [1, 0, 1, 0])


@given(st.floats(0.05, 0.4))
def test_fft_peak_within_one_bin(f):
    t = np.linspace(0, 42.6, 200)
    peak, width = fft_peak(t, np.cos(2 * np.pi * f * t))
    assert abs(peak - f) <= width
