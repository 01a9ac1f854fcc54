"""Command-line entry point: simulate, fit, reproduce, check.

Exit codes are a stable contract: 0 success, 1 property/comparison failure,
2 config error, 3 simulation error, 4 fit error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass

import numpy as np

from .fitting import FitNonConvergence, fit
from .gatesets import (
    GateSet,
    NoiseAssignment,
    average_noise,
    pauli_gateset,
    predicted_twirl_matrix,
    shelving_gateset,
    twirl,
)
from .liouville import (
    cp_tp_diagnostics,
    decay_eigenvalues,
    subspace_transfer_matrix,
)
from .noise import (
    PARAMS_KEY,
    FilterParams,
    RandomStream,
    ShelvingParams,
    averaged_coherent_channel,
    filter_channel,
    sample_coherent_noise,
    sample_filter_assignment,
    sample_filter_params,
)
from .protocol import (
    ConfigError,
    DecayDataset,
    ExperimentConfig,
    brute_force_expectation,
    predicted_expectation,
    run_experiment,
)

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_SIMULATION_ERROR = 3
EXIT_FIT_ERROR = 4

#: Sub-stream tag for the Monte Carlo theory oracle.
ORACLE_KEY = 2

#: The two bundled benchmark scenarios with their validation targets.
FIGURES = {
    "fig1": {
        "gateset": "pauli",
        "noise": {"id": "filter", "params": {}},
        "m_list": list(range(10, 101, 10)),
        "n_sequences": 30,
        "model": "single-exp",
        "default_seed": 20260801,
        "reference": {"decay": 0.9880, "stderr": 0.0002, "r_squared": 0.9991,
                      "oracle": 0.9879},
    },
    "fig2": {
        "gateset": "shelving",
        "noise": {"id": "shelving", "params": {"phi": 0.01, "sigma_gamma": 0.06}},
        "m_list": list(range(10, 101, 10)),
        "n_sequences": 200,
        "model": "tp-constrained",
        "default_seed": 101,
        "reference": {"decay": 0.992, "stderr": 0.002, "r_squared": 0.9904,
                      "oracle": 0.995},
    },
}

#: Monte Carlo sample count for the averaged-channel oracle.
ORACLE_SAMPLES = 1_000_000


@dataclass
class RunManifest:
    """Record of one CLI run: config echo, seed, outputs, timing."""

    config: dict
    seed: int
    tool_version: str
    outputs: list
    duration_seconds: float

    def write(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


def figure_config(figure: str, seed: int | None = None) -> ExperimentConfig:
    """The experiment configuration of a bundled scenario."""
    spec = FIGURES[figure]
    return ExperimentConfig(
        gateset=spec["gateset"],
        noise=spec["noise"],
        m_list=tuple(spec["m_list"]),
        n_sequences=spec["n_sequences"],
        seed=spec["default_seed"] if seed is None else int(seed),
    )


def _tool_version() -> str:
    from . import __version__

    return __version__


def _write_dataset(dataset: DecayDataset, out_dir, outputs: list):
    csv_path = out_dir / "decay.csv"
    json_path = out_dir / "decay.json"
    dataset.to_csv(str(csv_path))
    dataset.to_json(str(json_path))
    outputs.extend([str(csv_path), str(json_path)])


def cmd_simulate(args) -> int:
    from pathlib import Path

    started = time.monotonic()
    try:
        cfg = ExperimentConfig.from_json_file(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = int(args.seed)
        if args.shots is not None:
            overrides["shots"] = int(args.shots)
        if overrides:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        dataset = run_experiment(cfg, jobs=args.jobs)
    except Exception as exc:  # noqa: BLE001 - boundary of the CLI
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION_ERROR
    outputs: list = []
    _write_dataset(dataset, out_dir, outputs)
    manifest = RunManifest(
        config=cfg.to_dict(),
        seed=cfg.seed,
        tool_version=_tool_version(),
        outputs=outputs,
        duration_seconds=time.monotonic() - started,
    )
    manifest_path = out_dir / "manifest.json"
    manifest.write(str(manifest_path))
    print(f"wrote {', '.join(outputs + [str(manifest_path)])}")
    return EXIT_OK


def _load_dataset(path: str) -> DecayDataset:
    if path.endswith(".json"):
        return DecayDataset.from_json(path)
    return DecayDataset.from_csv(path)


def _summary_line(result) -> str:
    parts = [
        f"{name} = {value:.6f} +/- {result.stderr[name]:.6f}"
        for name, value in result.params.items()
    ]
    r2 = "n/a" if result.r_squared is None else f"{result.r_squared:.4f}"
    return f"{result.model}: " + ", ".join(parts) + f", r^2 = {r2}"


def cmd_fit(args) -> int:
    from pathlib import Path

    try:
        dataset = _load_dataset(args.dataset)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: cannot read dataset: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out_path = Path(args.out) if args.out else Path(args.dataset).parent / "fit.json"
    try:
        result = fit(args.model, dataset, weighted=not args.unweighted)
    except FitNonConvergence as exc:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(
                {"converged": False, "error": str(exc), **exc.diagnostics},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT_ERROR
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(_summary_line(result))
    return EXIT_OK


def _fig1_oracle(cfg: ExperimentConfig) -> float:
    """Analytic average survival 1 - mean(p)/2 from the sampled filter strengths."""
    params_seed = (cfg.noise.get("params") or {}).get("seed")
    root = RandomStream(int(params_seed) if params_seed is not None else cfg.seed)
    _, params = sample_filter_assignment(root.child(PARAMS_KEY), n_gates=4)
    p_bar = float(np.mean([fp.p for fp in params]))
    return 1.0 - p_bar / 2.0


def _fig2_oracle(cfg: ExperimentConfig, n_samples: int = ORACLE_SAMPLES) -> float:
    """Decaying eigenvalue of the Monte Carlo averaged shelving-noise channel."""
    params = cfg.noise.get("params") or {}
    sp = ShelvingParams(
        phi=float(params.get("phi", 0.01)),
        sigma_gamma=float(params.get("sigma_gamma", 0.06)),
    )
    stream = RandomStream(cfg.seed).child(ORACLE_KEY)
    avg = averaged_coherent_channel(sp, n_samples, stream)
    _, lam_minus = decay_eigenvalues(subspace_transfer_matrix(avg))
    return float(lam_minus)


def reproduce_figure(
    figure: str,
    seed: int | None = None,
    jobs: int = 1,
    oracle_samples: int = ORACLE_SAMPLES,
):
    """Run a bundled scenario end to end; returns (dataset, fit, report)."""
    spec = FIGURES[figure]
    cfg = figure_config(figure, seed)
    dataset = run_experiment(cfg, jobs=jobs)
    result = fit(spec["model"], dataset)
    if figure == "fig1":
        fitted = result.params["decay"]
        stderr = result.stderr["decay"]
        oracle = _fig1_oracle(cfg)
    else:
        fitted = result.params["decay"]
        stderr = result.stderr["decay"]
        oracle = _fig2_oracle(cfg, oracle_samples)
    passed = abs(fitted - oracle) <= 3.0 * stderr
    report = {
        "figure": figure,
        "model": spec["model"],
        "fitted_decay": fitted,
        "fitted_stderr": stderr,
        "oracle_decay": oracle,
        "deviation_sigmas": abs(fitted - oracle) / stderr if stderr > 0 else None,
        "r_squared": result.r_squared,
        "pass": bool(passed),
        "criterion": "|fitted - oracle| <= 3 * stderr",
        "reference_instance": spec["reference"],
        "seed": cfg.seed,
    }
    return dataset, result, report


def cmd_reproduce(args) -> int:
    from pathlib import Path

    started = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        dataset, result, report = reproduce_figure(
            args.figure, seed=args.seed, jobs=args.jobs
        )
    except Exception as exc:  # noqa: BLE001 - boundary of the CLI
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION_ERROR
    outputs: list = []
    _write_dataset(dataset, out_dir, outputs)
    fit_path = out_dir / "fit.json"
    with open(fit_path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.extend([str(fit_path), str(report_path)])
    manifest = RunManifest(
        config=figure_config(args.figure, args.seed).to_dict(),
        seed=report["seed"],
        tool_version=_tool_version(),
        outputs=outputs,
        duration_seconds=time.monotonic() - started,
    )
    manifest.write(str(out_dir / "manifest.json"))
    verdict = "PASS" if report["pass"] else "FAIL"
    print(
        f"{args.figure} {verdict}: fitted decay {report['fitted_decay']:.6f} "
        f"+/- {report['fitted_stderr']:.6f} vs oracle {report['oracle_decay']:.6f} "
        f"(r^2 = {report['r_squared']:.4f})"
    )
    return EXIT_OK if report["pass"] else EXIT_PROPERTY_FAILURE


# ---------------------------------------------------------------------------
# Property suite (cmd_check)
# ---------------------------------------------------------------------------


def check_twirl_idempotent(gs: GateSet, tol: float = 1e-10):
    g_bar = twirl(gs).matrix
    dev = float(np.max(np.abs(g_bar @ g_bar - g_bar)))
    return dev <= tol, f"max |G^2 - G| = {dev:.2e}"


def check_twirl_closed_form(gs: GateSet, tol: float = 1e-10):
    dev = float(np.max(np.abs(twirl(gs).matrix - predicted_twirl_matrix(gs.space))))
    return dev <= tol, f"max deviation from closed form = {dev:.2e}"


def check_filter_diagnostics(n_draws: int = 50, tol: float = 1e-10):
    gen = RandomStream(7, key=(99,)).generator()
    worst = 0.0
    for _ in range(n_draws):
        fp = sample_filter_params(gen)
        ch = filter_channel(fp)
        diag = cp_tp_diagnostics(ch, tol=tol)
        if not (diag.is_cp and diag.is_trace_nonincreasing):
            return False, "filter channel failed CP / trace-nonincreasing"
        eigs = np.sort(np.linalg.eigvalsh(ch.kraus_sum()))
        worst = max(worst, float(np.max(np.abs(eigs - [1.0 - fp.p, 1.0]))))
    return worst <= tol, f"max spectrum deviation from {{1, 1-p}} = {worst:.2e}"


def check_shelving_unitary(n_draws: int = 50, tol: float = 1e-10):
    gen = RandomStream(11, key=(98,)).generator()
    sp = ShelvingParams()
    worst = 0.0
    for _ in range(n_draws):
        (u,) = sample_coherent_noise(sp, gen).kraus
        worst = max(worst, float(np.max(np.abs(u @ u.conj().T - np.eye(3)))))
    return worst <= tol, f"max |U U^dag - I| = {worst:.2e}"


def _gate_independent_assignment(gs: GateSet):
    if gs.space.d2 == 0:
        ch = filter_channel(FilterParams(p=0.03, bloch=(0.0, 0.0, 1.0)))
    else:
        ch = sample_coherent_noise(ShelvingParams(), RandomStream(3, key=(97,)))
    return NoiseAssignment.uniform(ch, len(gs))


def check_sequence_average_closed_form(gs: GateSet, max_m: int = 4, tol: float = 1e-10):
    na = _gate_independent_assignment(gs)
    channel = average_noise(na)
    worst = 0.0
    for m in range(1, max_m + 1):
        brute = brute_force_expectation(m, gs, na)
        predicted = predicted_expectation(m, gs, channel)
        worst = max(worst, abs(brute - predicted))
    return worst <= tol, f"max |enumeration - closed form| = {worst:.2e}"


def run_checks():
    """The fast invariant suite; returns a list of (name, passed, detail)."""
    pauli = pauli_gateset()
    shelving = shelving_gateset()
    checks = [
        ("twirl idempotence (pauli)", lambda: check_twirl_idempotent(pauli)),
        ("twirl idempotence (shelving)", lambda: check_twirl_idempotent(shelving)),
        ("twirl closed form (pauli)", lambda: check_twirl_closed_form(pauli)),
        ("twirl closed form (shelving)", lambda: check_twirl_closed_form(shelving)),
        ("filter channel diagnostics", check_filter_diagnostics),
        ("shelving noise unitarity", check_shelving_unitary),
        (
            "sequence-average closed form (pauli, m<=4)",
            lambda: check_sequence_average_closed_form(pauli),
        ),
        (
            "sequence-average closed form (shelving, m<=4)",
            lambda: check_sequence_average_closed_form(shelving),
        ),
    ]
    results = []
    for name, fn in checks:
        passed, detail = fn()
        results.append((name, bool(passed), detail))
    return results


def cmd_check(_args) -> int:
    results = run_checks()
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if all(p for _, p, _ in results) else EXIT_PROPERTY_FAILURE


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leakbench",
        description="Randomized benchmarking of incoherent and coherent leakage",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run an experiment from a config file")
    p_sim.add_argument("--config", required=True, help="path to a JSON config")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--shots", type=int, default=None, help="finite sampling per sequence")
    p_sim.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit a decay model to a dataset")
    p_fit.add_argument("dataset", help="decay.csv or decay.json produced by simulate")
    p_fit.add_argument(
        "--model",
        required=True,
        choices=["single-exp", "double-exp", "tp-constrained"],
    )
    p_fit.add_argument("--out", default=None, help="fit.json output path")
    p_fit.add_argument("--unweighted", action="store_true", help="ignore sem weights")
    p_fit.set_defaults(func=cmd_fit)

    p_rep = sub.add_parser("reproduce", help="run a bundled benchmark scenario")
    p_rep.add_argument("figure", choices=sorted(FIGURES))
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.add_argument("--seed", type=int, default=None)
    p_rep.add_argument("--jobs", type=int, default=1)
    p_rep.set_defaults(func=cmd_reproduce)

    p_check = sub.add_parser("check", help="run the fast invariant suite")
    p_check.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
