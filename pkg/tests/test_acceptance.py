"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single PASS/FAIL line (run with -s to see them live).
"""

import time

import numpy as np

import leakbench as lb
from leakbench.cli import main, reproduce_figure
from leakbench.fitting import fit, model_by_name
from leakbench.gatesets import NoiseAssignment, average_noise, predicted_twirl_matrix
from leakbench.noise import RandomStream, sample_coherent_noise, sample_filter_assignment
from leakbench.protocol import brute_force_expectation, predicted_expectation


def _report(number: int, name: str, passed: bool) -> bool:
    print(f"[criterion {number}] {name}: {'PASS' if passed else 'FAIL'}")
    return passed


def test_criterion_1_twirl_correctness():
    started = time.monotonic()
    ok = True
    for gs in (lb.pauli_gateset(), lb.shelving_gateset()):
        g_bar = lb.twirl(gs).matrix
        ok &= float(np.max(np.abs(g_bar @ g_bar - g_bar))) <= 1e-10
        ok &= float(np.max(np.abs(g_bar - predicted_twirl_matrix(gs.space)))) <= 1e-10
    elapsed = time.monotonic() - started
    ok &= elapsed < 1.0
    assert _report(1, f"twirl correctness ({elapsed:.2f}s)", ok)


def test_criterion_2_exact_model_equivalence():
    started = time.monotonic()
    ok = True
    pauli = lb.pauli_gateset()
    ch_pauli = lb.filter_channel(lb.FilterParams(p=0.035, bloch=(0.48, -0.6, 0.64)))
    na_pauli = NoiseAssignment.uniform(ch_pauli, len(pauli))
    shelving = lb.shelving_gateset()
    ch_shelving = sample_coherent_noise(lb.ShelvingParams(), RandomStream(2024))
    na_shelving = NoiseAssignment.uniform(ch_shelving, len(shelving))
    for gs, na, ch in (
        (pauli, na_pauli, ch_pauli),
        (shelving, na_shelving, ch_shelving),
    ):
        for m in range(1, 5):
            brute = brute_force_expectation(m, gs, na)
            ok &= abs(brute - predicted_expectation(m, gs, ch)) <= 1e-10
    elapsed = time.monotonic() - started
    ok &= elapsed < 10.0
    assert _report(2, f"exact-model equivalence ({elapsed:.2f}s)", ok)


def test_criterion_3_gate_dependent_remainder():
    gs = lb.pauli_gateset()
    na, _ = sample_filter_assignment(RandomStream(20260801).child(0))
    epsilon = lb.gate_dependence_epsilon(gs, na)
    avg = average_noise(na)
    ok = epsilon > 0
    for m in range(1, 5):
        brute = brute_force_expectation(m, gs, na)
        ok &= abs(brute - predicted_expectation(m, gs, avg)) <= m * epsilon
    assert _report(3, "gate-dependent remainder bounded by m*epsilon", ok)


def test_criterion_4_incoherent_reproduction():
    started = time.monotonic()
    dataset, result, report = reproduce_figure("fig1")
    elapsed = time.monotonic() - started
    ok = report["pass"]
    ok &= report["r_squared"] >= 0.99
    ok &= report["fitted_stderr"] <= 1e-3
    ok &= abs(report["fitted_decay"] - report["oracle_decay"]) <= 3 * report["fitted_stderr"]
    ok &= elapsed < 60.0
    assert _report(
        4,
        f"incoherent-leakage reproduction (decay {report['fitted_decay']:.5f} "
        f"vs oracle {report['oracle_decay']:.5f}, r2 {report['r_squared']:.4f}, "
        f"{elapsed:.1f}s)",
        ok,
    )


def test_criterion_5_coherent_reproduction():
    started = time.monotonic()
    dataset, result, report = reproduce_figure("fig2", oracle_samples=1_000_000)
    elapsed = time.monotonic() - started
    ok = report["pass"]
    ok &= report["r_squared"] >= 0.98
    ok &= abs(report["fitted_decay"] - report["oracle_decay"]) <= 3 * report["fitted_stderr"]
    ok &= elapsed < 600.0
    assert _report(
        5,
        f"coherent-leakage reproduction (decay {report['fitted_decay']:.5f} "
        f"vs oracle {report['oracle_decay']:.5f}, r2 {report['r_squared']:.4f}, "
        f"{elapsed:.1f}s)",
        ok,
    )


def test_criterion_6_channel_diagnostics():
    gen = RandomStream(606).generator()
    ok = True
    for _ in range(1000):
        fp = lb.noise.sample_filter_params(gen)
        ch = lb.filter_channel(fp)
        diag = lb.cp_tp_diagnostics(ch, tol=1e-10)
        ok &= diag.is_cp and diag.is_trace_nonincreasing
        spectrum = np.sort(np.linalg.eigvalsh(ch.kraus_sum()))
        ok &= float(np.max(np.abs(spectrum - np.array([1.0 - fp.p, 1.0])))) <= 1e-10
    sp = lb.ShelvingParams()
    for _ in range(1000):
        (u,) = sample_coherent_noise(sp, gen).kraus
        ok &= float(np.max(np.abs(u @ u.conj().T - np.eye(3)))) <= 1e-10
    assert _report(6, "channel diagnostics (1000 draws per model)", ok)


def test_criterion_7_fit_recovery_and_jacobians():
    ms = np.arange(10, 101, 10).astype(float)
    cases = {
        "single-exp": {"amplitude": 0.97, "decay": 0.988},
        "double-exp": {
            "amp_plus": 0.55,
            "amp_minus": 0.42,
            "decay_plus": 0.999,
            "decay_minus": 0.94,
        },
        "tp-constrained": {"amplitude": 0.52, "offset": 0.47, "decay": 0.992},
    }
    ok = True
    from leakbench.protocol import DecayDataset

    for name, truth in cases.items():
        model = model_by_name(name)
        x_true = np.array([truth[p] for p in model.param_names])
        data = DecayDataset.from_arrays(ms, model.predict(x_true, ms))
        result = fit(name, data)
        for key, val in truth.items():
            ok &= abs(result.params[key] - val) <= 1e-8 * max(abs(val), 1e-12)
        rng = np.random.default_rng(70 + model.n_params)
        for _ in range(5):
            x = rng.uniform(0.2, 0.9, size=model.n_params)
            analytic = model.jacobian(x, ms)
            numeric = np.empty_like(analytic)
            h = 1e-6
            for j in range(model.n_params):
                up, down = x.copy(), x.copy()
                up[j] += h
                down[j] -= h
                numeric[:, j] = (model.predict(up, ms) - model.predict(down, ms)) / (2 * h)
            rel = np.abs(analytic - numeric) / np.maximum(
                np.maximum(np.abs(analytic), np.abs(numeric)), 1.0
            )
            ok &= float(np.max(rel)) <= 1e-6
    assert _report(7, "fit recovery within 1e-8 and Jacobians within 1e-6", ok)


def test_criterion_8_determinism(tmp_path):
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    code1 = main(["reproduce", "fig1", "--out", str(out1), "--seed", "31337"])
    code2 = main(["reproduce", "fig1", "--out", str(out2), "--seed", "31337"])
    ok = code1 == code2
    blob1 = (out1 / "decay.csv").read_bytes()
    blob2 = (out2 / "decay.csv").read_bytes()
    ok &= blob1 == blob2
    assert _report(8, "byte-identical decay.csv across identical-seed runs", ok)
