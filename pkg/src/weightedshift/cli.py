"""Command-line front end.

Subcommands ``classify``, ``gamma``, ``periodic``, ``spectrum``, ``verify``
and ``demo-smt-failure``.  Reports are JSON with sorted keys and no
timestamps, so identical config and seed give byte-identical files; run
metadata (time, versions, backend) goes to a separate ``run_meta.json``.

Exit codes: 0 ok, 1 verification failure, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import kernel
from .bounds import (
    assemble_spectrum,
    gamma1_estimate,
    gamma2_estimate,
    InsufficientDataError,
    norm_table,
    tau_weighted_sampler,
    type_estimate,
    write_growth_csv,
)
from .classify import (
    INFINITE,
    OMEGA1,
    OMEGA2,
    PERIODIC,
    REST,
    ClassificationConfig,
    PartitionStats,
    classify_sample,
    uniform_sampler,
    write_classification_csv,
)
from .field import ConfigError, ProblemSpec, check_absorption_bound, problem_from_config
from .flow import FlowExitError, FlowOptions, StepFailureError
from .periodic import (
    annular_hull,
    candidate_spectrum_per,
    covered_band,
    m_lambda_consistency,
    periodic_point_data,
    rest_spectrum,
    smt_counterexample_report,
    write_periodic_csv,
)
from .sets import SpectralSet, jsonable
from .verify import run_default_suites, run_problem_suites

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

__all__ = ["RunConfig", "load_run_config", "run_classify", "run_gamma", "run_periodic", "run_spectrum", "main"]


@dataclass
class RunConfig:
    problem: dict
    seed: int = 0
    samples: int = 200
    horizon: float = 50.0
    t_max: float = 8.0
    t_steps: int = 32
    k_max: int = 5
    t: float = 1.0
    sample_box: Optional[list] = None
    flow: dict = dc_field(default_factory=dict)
    workers: int = 4

    def validate(self) -> None:
        if not isinstance(self.samples, int) or isinstance(self.samples, bool) or self.samples < 1:
            raise ConfigError(f"'samples' must be a positive integer, got {self.samples!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"'seed' must be an integer, got {self.seed!r}")
        if not isinstance(self.t_steps, int) or self.t_steps < 4:
            raise ConfigError("'t_steps' must be an integer >= 4")
        if not isinstance(self.k_max, int) or self.k_max < 0:
            raise ConfigError("'k_max' must be a non-negative integer")
        for name in ("horizon", "t_max", "t"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
                raise ConfigError(f"'{name}' must be a positive number, got {v!r}")
        unknown = set(self.flow) - {"rtol", "atol", "t_tol", "h_max", "max_steps"}
        if unknown:
            raise ConfigError(f"unknown flow option(s): {sorted(unknown)}")

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(self.t_max / self.t_steps, self.t_max, self.t_steps)

    def flow_options(self) -> FlowOptions:
        try:
            return FlowOptions(**self.flow)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad flow options: {err}") from err

    def classification(self) -> ClassificationConfig:
        return ClassificationConfig(horizon=float(self.horizon), flow=self.flow_options(), workers=self.workers)

    def digest(self) -> str:
        body = json.dumps(jsonable(asdict(self)), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(body.encode()).hexdigest()


_RUN_KEYS = {"seed", "samples", "horizon", "t_max", "t_steps", "k_max", "t", "sample_box", "flow", "workers"}


def load_run_config(source, overrides: Optional[dict] = None) -> RunConfig:
    """Run config from a JSON file; a bare problem config is accepted too."""
    if isinstance(source, dict):
        cfg = dict(source)
    else:
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err.strerror}") from err
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if "problem" not in cfg:
        if "builtin" in cfg or "custom" in cfg:
            cfg = {"problem": {k: v for k, v in cfg.items() if k not in _RUN_KEYS},
                   **{k: v for k, v in cfg.items() if k in _RUN_KEYS}}
        else:
            raise ConfigError("config needs a 'problem' object (or a top-level 'builtin'/'custom' key)")
    unknown = set(cfg) - _RUN_KEYS - {"problem"}
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    rc = RunConfig(**cfg)
    rc.validate()
    return rc


# --------------------------------------------------------------------------
# pipelines


def _problem(rc: RunConfig) -> ProblemSpec:
    prob = problem_from_config(rc.problem)
    if rc.sample_box is not None:
        box = np.asarray(rc.sample_box, dtype=float)
        if box.shape != (prob.dimension, 2) or np.any(box[:, 1] <= box[:, 0]):
            raise ConfigError(f"'sample_box' must be {prob.dimension} increasing [lo, hi] pairs")
        from dataclasses import replace

        prob = replace(prob, sample_box=box)
    return prob


def run_classify(rc: RunConfig, prob: Optional[ProblemSpec] = None) -> tuple[PartitionStats, dict]:
    prob = prob or _problem(rc)
    stats = classify_sample(prob, uniform_sampler(prob), rc.samples, rc.classification(), seed=rc.seed)
    check_absorption_bound(prob, stats.points)
    return stats, stats.summary()


def _growth_json(est) -> Optional[dict]:
    if est is None:
        return None
    return {
        "gamma_hat": est.gamma_hat,
        "nilpotent": est.nilpotent,
        "starved": est.starved,
        "direction": est.direction,
        "table": [{"t": t, "inf_avg": a, "count": c} for t, a, c in est.table()],
    }


def run_gamma(rc: RunConfig, prob: Optional[ProblemSpec] = None) -> tuple[dict, dict]:
    """Growth constants on a sample biased toward long backward stay times."""
    prob = prob or _problem(rc)
    opts = rc.flow_options()
    t_grid = rc.t_grid
    sampler = tau_weighted_sampler(prob, horizon=1.5 * rc.t_max, opts=opts)
    stats = classify_sample(prob, sampler, rc.samples, rc.classification(), seed=rc.seed + 1)
    pts1, pts2 = stats.select(OMEGA1), stats.select(OMEGA2)
    g1 = gamma1_estimate(prob, pts1, t_grid, opts) if len(pts1) else None
    g2 = gamma2_estimate(prob, pts2, t_grid, opts) if len(pts2) else None
    exit_pts = stats.select(OMEGA1, OMEGA2)
    omega0 = None
    norms = []
    if len(exit_pts):
        norms = norm_table(prob, t_grid, exit_pts, opts)
        try:
            omega0 = type_estimate(t_grid, norms)
        except InsufficientDataError:
            omega0 = None
    gammas = [g.gamma_hat for g in (g1, g2) if g is not None]
    report = {
        "gamma1": _growth_json(g1),
        "gamma2": _growth_json(g2),
        "gamma": min(gammas) if gammas else None,
        "omega0_hat": omega0,
        "norms": [{"t": n.t, "norm": n.value, "admissible": n.admissible} for n in norms],
        "sample_fractions": stats.summary()["fractions"],
        "hypothesis": "positive measure of each exit class is assumed; see sample_fractions",
    }
    return report, {"gamma1": g1, "gamma2": g2}


def _periodic_data(prob, stats, rc):
    cfg = rc.classification()
    return [periodic_point_data(prob, x, cfg, period=c.prime_period)
            for x, c in zip(stats.points, stats.classes) if c.tag == PERIODIC]


def run_periodic(rc: RunConfig, prob: Optional[ProblemSpec] = None, stats: Optional[PartitionStats] = None):
    prob = prob or _problem(rc)
    if stats is None:
        stats, _ = run_classify(rc, prob)
    data = _periodic_data(prob, stats, rc)
    cand = candidate_spectrum_per(data, rc.k_max)
    report: dict = {
        "n_periodic": len(data),
        "K": rc.k_max,
        "candidate_generator_spectrum": cand.to_json(),
        "covered_band": covered_band(data, rc.k_max) if data else None,
        "max_prime_period": max((d.prime_period for d in data), default=None),
        "bounded_period_hypothesis": "unverified",
        "resolvent_uniformity": "not checked",
    }
    if data:
        reals = sorted({round(a, 12) for a in cand.real_parts()})
        report["annuli"] = annular_hull(reals, rc.t).to_json()
        report["m_lambda_consistency"] = m_lambda_consistency(data, cand, rc.k_max)
    return report, data, cand


def run_spectrum(rc: RunConfig) -> dict:
    """Per-class spectra composed by set union."""
    return _spectrum(rc)[0]


def _spectrum(rc: RunConfig):
    prob = _problem(rc)
    stats, summary = run_classify(rc, prob)
    fr = summary["fractions"]
    t = float(rc.t)
    gen_parts, semi_parts = [], []
    report: dict = {"config_hash": rc.digest(), "problem": prob.name, "t": t, "classification": summary}

    if fr[OMEGA1] + fr[OMEGA2] > 0:
        g_report, ests = run_gamma(rc, prob)
        g1 = ests["gamma1"].gamma_hat if ests["gamma1"] is not None else None
        g2 = ests["gamma2"].gamma_hat if ests["gamma2"] is not None else None
        report["exit_classes"] = g_report
        if g1 is not None or g2 is not None:
            gen, semi = assemble_spectrum(g1, g2, {}, t)
            gen_parts.append(gen)
            semi_parts.append(semi)
    if fr[REST] > 0:
        rs = rest_spectrum(prob, stats.select(REST))
        report["rest_spectrum"] = rs.to_json()
        gen_parts.append(rs)
        if not rs.is_empty:
            semi_parts.append(rs.exp_map(t))
    if fr[PERIODIC] > 0:
        p_report, data, cand = run_periodic(rc, prob, stats)
        report["periodic"] = p_report
        gen_parts.append(cand)
        if data:
            reals = sorted({round(a, 12) for a in cand.real_parts()})
            semi_parts.append(annular_hull(reals, t))
    if fr[INFINITE] > 0:
        inf_pts = stats.select(INFINITE)
        est = gamma2_estimate(prob, inf_pts, rc.t_grid, rc.flow_options())
        report["infinite_orbits"] = {
            "fraction": fr[INFINITE],
            "growth": _growth_json(est),
            "annotation": "semigroup spectrum on aperiodic orbits is invariant under rotations; "
                          "only the growth bound is computed",
        }
    gen = SpectralSet.union(gen_parts, "union over phase classes")
    semi = SpectralSet.union(semi_parts, f"union over phase classes; t = {t:g}")
    report["generator_spectrum"] = gen.to_json()
    report["semigroup_spectrum"] = semi.to_json()
    return report, gen, semi


# --------------------------------------------------------------------------
# output


def _dump(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(out: Path, name: str, obj: Any) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(_dump(obj))
    return path


def _write_meta(out: Path, command: str, rc: Optional[RunConfig]) -> None:
    import scipy

    from . import __version__

    meta = {
        "command": command,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config_hash": rc.digest() if rc else None,
        "backend": kernel.BACKEND,
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
                     "weightedshift": __version__},
    }
    _write(out, "run_meta.json", meta)


def _write_plot(out: Path, name: str, s: SpectralSet) -> None:
    blocks = s.plot_data()
    with open(out / name, "w") as fh:
        for blk in blocks:
            for re, im in blk:
                fh.write(f"{re!r} {im!r}\n")
            fh.write("\n\n")


def _cmd_classify(rc: RunConfig, out: Path) -> int:
    stats, summary = run_classify(rc)
    out.mkdir(parents=True, exist_ok=True)
    write_classification_csv(out / "classification.csv", stats)
    _write(out, "classification_summary.json", {"config_hash": rc.digest(), **summary})
    print(_dump(summary), end="")
    return EXIT_OK


def _cmd_gamma(rc: RunConfig, out: Path) -> int:
    report, ests = run_gamma(rc)
    out.mkdir(parents=True, exist_ok=True)
    for key, est in ests.items():
        if est is not None:
            write_growth_csv(out / f"{key}.csv", est)
    _write(out, "gamma.json", {"config_hash": rc.digest(), **report})
    print(_dump({k: report[k] for k in ("gamma", "omega0_hat")}), end="")
    return EXIT_OK


def _cmd_periodic(rc: RunConfig, out: Path) -> int:
    prob = _problem(rc)
    report, data, cand = run_periodic(rc, prob)
    out.mkdir(parents=True, exist_ok=True)
    write_periodic_csv(out / "periodic.csv", data)
    _write_plot(out, "candidate_spectrum.dat", cand)
    _write(out, "periodic.json", {"config_hash": rc.digest(), **report})
    print(_dump(report["candidate_generator_spectrum"]), end="")
    return EXIT_OK


def _cmd_spectrum(rc: RunConfig, out: Path) -> int:
    report, gen_set, semi_set = _spectrum(rc)
    _write(out, "spectrum.json", report)
    _write_plot(out, "generator_spectrum.dat", gen_set)
    _write_plot(out, "semigroup_spectrum.dat", semi_set)
    gen = report["generator_spectrum"]
    print(_dump({"generator_spectrum": gen, "semigroup_spectrum": report["semigroup_spectrum"]}), end="")
    return EXIT_OK


def _cmd_verify(rc: Optional[RunConfig], out: Path, n: Optional[int]) -> int:
    if rc is None:
        results = run_default_suites(n or 30, 0)
    else:
        results = run_problem_suites(_problem(rc), n or min(rc.samples, 50), rc.seed, rc.flow_options(),
                                     rc.classification())
    rows = [r.to_json() for r in results]
    _write(out, "verify.json", {"suites": rows, "passed": all(r.passed for r in results)})
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.problem:<15} {r.name:<18} residual={r.residual:.3e} "
              f"tol={r.tol:.1e} n={r.checked} {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _cmd_smt(t: float, k: int, out: Optional[Path]) -> int:
    report = smt_counterexample_report(t, k)
    body = {
        "t": report["t"],
        "K": report["K"],
        "distinct_points": report["distinct_points"],
        "max_gap": report["max_gap"],
        "collapsed_to_one": report["collapsed_to_one"],
        "image_strictly_smaller": report["image_strictly_smaller"],
        "semigroup_spectrum": report["semigroup_spectrum"],
        "points": report["points"],
    }
    if out is not None:
        _write(out, "smt_report.json", body)
    print(_dump({k_: v for k_, v in body.items() if k_ != "points"}), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weightedshift", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON run or problem config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--samples", type=int)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--t-max", dest="t_max", type=float)
        sp.add_argument("--t-steps", dest="t_steps", type=int)
        sp.add_argument("--k-max", dest="k_max", type=int)
        sp.add_argument("--t", type=float, help="semigroup time for spectral sets")

    for name, helptext in (("classify", "phase-space partition of a sample"),
                           ("gamma", "growth constants of the exit classes"),
                           ("periodic", "periodic-orbit spectral data"),
                           ("spectrum", "composed spectral report")):
        common(sub.add_parser(name, help=helptext))
    common(sub.add_parser("verify", help="invariant and closed-form suites"), config_required=False)
    smt = sub.add_parser("demo-smt-failure", help="finite image of i Z under exp(t .) against the unit circle")
    smt.add_argument("--t", type=float, default=1.0)
    smt.add_argument("--k-max", dest="k_max", type=int, default=100)
    smt.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "demo-smt-failure":
            if not args.t > 0 or args.k_max < 0:
                raise ConfigError("--t must be positive and --k-max non-negative")
            return _cmd_smt(args.t, args.k_max, None if args.out is None else Path(args.out))
        overrides = {k: getattr(args, k) for k in ("seed", "samples", "horizon", "t_max", "t_steps", "k_max", "t")}
        out = Path(args.out)
        rc = load_run_config(args.config, overrides) if args.config else None
        if args.command == "verify":
            code = _cmd_verify(rc, out, args.samples)
        else:
            code = {"classify": _cmd_classify, "gamma": _cmd_gamma, "periodic": _cmd_periodic,
                    "spectrum": _cmd_spectrum}[args.command](rc, out)
        _write_meta(out, args.command, rc)
        return code
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailureError, FlowExitError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
