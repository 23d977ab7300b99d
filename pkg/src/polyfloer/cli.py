"""Command-line entry point: ``polyfloer <subcommand> [options]``.

Subcommands
-----------
simulate     integrate a scenario and write the trajectory table
spectrum     per-mode eigenvalues of A(m, k) and B(m, k)
verify       small-divisor reports for the scenario, or acceptance criteria
asymptotics  closed-form limit of a coupled scenario and its residual
report       all of the above merged into one text summary

Tables are written as CSV and JSON lines with shortest round-trip floats, so
reruns with the same scenario and seed are byte-identical. A file named
``FAILED`` listing the broken invariants is left in the output directory
whenever a run fails; the exit status is then 1.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, checks
from . import flow as fl
from . import hamiltonians as hm
from . import spectral as sp
from .diophantine import admissibility_check, verify_eigenvalue_bound
from .kernels import BACKEND
from .scenario import Scenario, ScenarioError, load_scenario

log = logging.getLogger("polyfloer")

FAILED = "FAILED"
FAST_INVARIANTS = (1, 2, 5, 6, 10)


class InvariantFailure(RuntimeError):
    """Raised under ``--strict`` at the first broken invariant."""


class Outcome:
    """Collects named invariant checks for one subcommand."""

    def __init__(self, strict: bool):
        self.strict = strict
        self.checks: dict[str, bool] = {}
        self.notes: list[str] = []

    def check(self, name: str, ok: bool) -> bool:
        self.checks[name] = bool(ok)
        if not ok and self.strict:
            raise InvariantFailure(name)
        return bool(ok)

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]

    def summary(self) -> dict:
        return {
            "passed": not self.failures,
            "checks": self.checks,
            "counts": {"passed": sum(self.checks.values()), "total": len(self.checks)},
            "failures": self.failures,
            "notes": self.notes,
        }


# -- writers -------------------------------------------------------------------


def _plain(x):
    """Turn numpy scalars, tuples and dict keys into JSON-ready values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")


def write_table(out: Path, stem: str, columns: dict[str, list], formats) -> list[Path]:
    """Write equal-length columns as ``stem.csv`` and/or ``stem.jsonl``."""
    names = list(columns)
    rows = list(zip(*(columns[c] for c in names)))
    written = []
    if "csv" in formats:
        p = out / f"{stem}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            w.writerows([repr(float(v)) if isinstance(v, float) else v for v in row] for row in rows)
        written.append(p)
    if "jsonl" in formats:
        p = out / f"{stem}.jsonl"
        with p.open("w") as fh:
            for row in rows:
                fh.write(json.dumps(dict(zip(names, _plain(list(row))))) + "\n")
        written.append(p)
    return written


def _finish(out: Path, outcome: Outcome, command: str) -> int:
    marker = out / FAILED
    if outcome.failures:
        marker.write_text(f"{command}\n" + "".join(f"{f}\n" for f in outcome.failures))
        for f in outcome.failures:
            log.error("invariant failed: %s", f)
        return 1
    return 0


# -- subcommands -----------------------------------------------------------------


def _load(args) -> Scenario:
    sc = load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["initial.seed"] = args.seed
    if args.grid_n is not None:
        overrides["grid.Nt"] = overrides["grid.Nx"] = args.grid_n
    if args.s_max is not None:
        overrides["flow.s_max"] = args.s_max
    return sc.with_overrides(**overrides) if overrides else sc


def do_simulate(sc: Scenario, out: Path, outcome: Outcome) -> dict:
    problem = sc.problem()
    log.info("simulate %s: %d steps on %dx%d", sc.name, problem.config.n_steps, problem.grid.Nt, problem.grid.Nx)
    rec = fl.run_flow(problem)
    write_table(out, "trajectory", rec.columns(), sc["outputs.formats"])

    ds = problem.config.ds
    norms = np.asarray(rec.sobolev_norms[0])
    outcome.check("finite trajectory", bool(np.all(np.isfinite(rec.action_values))))
    defect = rec.max_window_defect(1.0)
    outcome.check("energy identity", defect < 10.0 * ds)
    if rec.autonomous:
        outcome.check("action nonincreasing", rec.action_monotone(1e-12))
    drift = float(np.max(np.abs(norms - norms[0])))
    stationary = rec.autonomous and float(np.max(rec.dissipation)) < 1e-14 and norms[0] > 0
    if stationary and drift < 1e-12:
        outcome.notes.append("non-convergent (expected): zero-dissipation state with nonzero norm")
    summary = {
        "scenario": sc.name,
        "steps": problem.config.n_steps,
        "records": len(rec.s_values),
        "s_final": rec.s_values[-1],
        "action": [rec.action_values[0], rec.action_values[-1]],
        "sobolev_0": [float(norms[0]), float(norms[-1])],
        "norm_drift": drift,
        "energy_window_defect": defect,
        "energy_tolerance": 10.0 * ds,
    }
    if rec.distance_to_limit:
        summary["final_distance_to_limit"] = {h: v[-1] for h, v in rec.distance_to_limit.items()}
    if rec.mode_amplitudes:
        summary["tracked_modes"] = [list(mk) for mk in rec.mode_amplitudes]
    return summary


def do_spectrum(sc: Scenario, out: Path, outcome: Outcome) -> dict:
    n = sc["spectrum.N"]
    R = sc.R
    r = np.arange(-n, n + 1)
    mm, kk = (a.ravel() for a in np.meshgrid(r, r, indexing="ij"))
    M1, M2 = sp.operator_pair("M")
    A = 1j * R * mm[:, None, None] * M1 + 1j * kk[:, None, None] * M2
    num_a = np.linalg.eigvalsh(A)
    num_b = np.linalg.eigvalsh(sp.SIGNATURE - A)
    closed_a = np.stack(sp.closed_form_eigenvalues_A(mm, kk, R), axis=-1)
    closed_b = np.stack(sp.closed_form_eigenvalues_B(mm, kk, R), axis=-1)
    dev_a = float(np.max(np.abs(num_a - np.sort(closed_a, axis=-1))))
    dev_b = float(np.max(np.abs(num_b - np.sort(closed_b, axis=-1))))
    cols = {"m": mm.tolist(), "k": kk.tolist()}
    labels = ("l1_plus", "l1_minus", "l2_plus", "l2_minus")
    for name, block in (("A", closed_a), ("B", closed_b)):
        for j, lab in enumerate(labels):
            cols[f"{name}_{lab}"] = block[:, j].tolist()
    write_table(out, "spectrum", cols, sc["outputs.formats"])
    outcome.check("eigenvalues of A match closed form", dev_a < 1e-10)
    outcome.check("eigenvalues of B match closed form", dev_b < 1e-10)
    b_small = closed_b[:, 2]
    i = int(np.argmin(b_small))
    return {
        "R": R,
        "N": n,
        "modes": int(mm.size),
        "max_dev_A": dev_a,
        "max_dev_B": dev_b,
        "min_B_l2_plus": float(b_small[i]),
        "min_B_l2_plus_mode": [int(mm[i]), int(kk[i])],
    }


def do_verify(sc: Scenario, out: Path, outcome: Outcome, criteria=None) -> dict:
    result: dict = {}
    if criteria is None:
        rep = verify_eigenvalue_bound(sc.R, sc["verify.N"])
        adm = admissibility_check(sc.grid().T, sc["verify.h"], sc["verify.admissibility_N"])
        outcome.check("eigenvalue lower bound", rep.passed)
        outcome.check("admissibility gaps", adm.passed)
        result["diophantine"] = rep.to_dict()
        result["admissibility"] = adm.to_dict()
        print(f"R = {sc.R!r}: c_emp = {rep.empirical_constant!r} at {rep.worst_pair}, "
              f"coincidences {rep.coincidences[:4]}")
        print(f"T = {sc.grid().T!r}: c_h = {adm.c_h!r}, coincidences {adm.coincidences[:4]}")
        criteria = FAST_INVARIANTS
    results = []
    for n in criteria:
        res = checks.run_criterion(n)
        print(res.line())
        results.append(res)
        outcome.check(f"criterion {n}: {res.title}", res.passed)
    result["criteria"] = [r.to_dict() for r in results]
    c = outcome.summary()["counts"]
    print(f"{c['passed']}/{c['total']} checks passed")
    return result


def do_asymptotics(sc: Scenario, out: Path, outcome: Outcome) -> dict:
    spec = sc.spec()
    if not spec.has_source:
        raise ValueError(f"scenario {sc.name!r} has no particles, so there is no limit to compute")
    g = sc.grid()
    rho = sc.limiting_source()
    limit = fl.asymptotic_limit(rho, spec)
    Zp = sp.dft_inverse(limit).values
    src = hm.source_field(spec, g, math.inf)
    res = float(np.max(np.abs(fl.residual(spec, Zp, g, src))))
    outcome.check("limit residual below 1e-8", res < 1e-8)
    mm, kk = g.lattice()
    cols: dict[str, list] = {"m": [], "k": [], "component": [], "re": [], "im": []}
    for c in range(limit.components):
        cols["m"] += mm.ravel().tolist()
        cols["k"] += kk.ravel().tolist()
        cols["component"] += [c] * mm.size
        cols["re"] += limit.coeffs[c].real.ravel().tolist()
        cols["im"] += limit.coeffs[c].imag.ravel().tolist()
    write_table(out, "limit_coefficients", cols, sc["outputs.formats"])
    edge = np.abs(limit.coeffs[:, :, g.Nx // 2])
    return {
        "scenario": sc.name,
        "residual_sup": res,
        "sobolev_norms": {h: sp.sobolev_norm(limit, h) for h in fl.LIMIT_ORDERS},
        "max_coefficient_at_k_edge": float(edge.max()),
        "total_charge": [float(rho.coeffs[0, 0, 0].real * g.volume)],
        "periodicity_defect": hm.periodicity_defect(spec, g),
    }


def do_report(sc: Scenario, out: Path, outcome: Outcome) -> dict:
    parts = {"simulate": do_simulate(sc, out, outcome), "spectrum": do_spectrum(sc, out, outcome)}
    parts["verify"] = do_verify(sc, out, outcome)
    if sc.spec().has_source:
        parts["asymptotics"] = do_asymptotics(sc, out, outcome)
    lines = [f"polyfloer {__version__} report for scenario {sc.name!r} ({BACKEND} kernels)", ""]
    for section, data in parts.items():
        lines.append(f"[{section}]")
        for key, val in sorted(data.items()):
            if key == "criteria":
                for c in val:
                    flag = "PASS" if c["passed"] else "FAIL"
                    lines.append(f"  [{flag}] criterion {c['criterion']}: {c['title']}")
            elif isinstance(val, dict):
                lines.append(f"  {key}: passed={val.get('passed', '-')}")
            else:
                lines.append(f"  {key}: {val}")
        lines.append("")
    s = outcome.summary()
    lines.append(f"checks passed: {s['counts']['passed']}/{s['counts']['total']}")
    lines += [f"note: {n}" for n in s["notes"]]
    lines += [f"FAILED: {f}" for f in s["failures"]]
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    print(text, end="")
    return parts


HELP = {
    "simulate": "integrate the scenario's flow and write the trajectory table",
    "spectrum": "closed-form and numerical eigenvalues of A(m, k) and B(m, k)",
    "verify": "small-divisor reports, or acceptance criteria with --criterion/--all",
    "asymptotics": "closed-form limit of a coupled scenario and its residual",
    "report": "run every applicable subcommand and merge the summaries",
}

COMMANDS = {
    "simulate": do_simulate,
    "spectrum": do_spectrum,
    "verify": do_verify,
    "asymptotics": do_asymptotics,
    "report": do_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyfloer", description="Floer-flow laboratory on the 2-torus.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--scenario", default="minimal", help="scenario file or built-in scenario name")
        p.add_argument("--seed", type=int, help="override initial.seed")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--grid-n", type=int, help="override grid.Nt and grid.Nx")
        p.add_argument("--s-max", type=float, help="override flow.s_max")
        p.add_argument("--strict", action="store_true", help="abort at the first failed invariant")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            p.add_argument("--criterion", type=int, action="append", choices=sorted(checks.CRITERIA),
                           help="run acceptance criterion N (repeatable)")
            p.add_argument("--all", action="store_true", help="run every acceptance criterion")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / FAILED).unlink(missing_ok=True)
    outcome = Outcome(args.strict)
    try:
        sc = _load(args)
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"polyfloer: invalid scenario: {exc}", file=sys.stderr)
        return 2
    if args.command == "asymptotics" and not sc.spec().has_source:
        print(f"polyfloer: scenario {sc.name!r} has no particles, so there is no limit to compute", file=sys.stderr)
        return 2
    try:
        if args.command == "verify":
            crit = sorted(checks.CRITERIA) if args.all else args.criterion
            data = do_verify(sc, out, outcome, crit)
        else:
            data = COMMANDS[args.command](sc, out, outcome)
    except InvariantFailure as exc:
        log.error("aborting at first failed invariant: %s", exc)
        data = {"aborted_at": str(exc)}
    except fl.FlowDivergence as exc:
        outcome.checks[f"flow stays finite ({exc})"] = False
        data = {"error": str(exc)}
    except ScenarioError as exc:
        print(f"polyfloer: invalid scenario: {exc}", file=sys.stderr)
        return 2
    for note in outcome.notes:
        print(f"note: {note}")
    write_json(out / f"{args.command}_summary.json", {"command": args.command, "scenario": sc.name,
                                                       "result": data, **outcome.summary()})
    return _finish(out, outcome, args.command)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
