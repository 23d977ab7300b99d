"""Acceptance checks shared by ``polyfloer verify`` and the test suite.

Each ``criterion_N`` returns a :class:`CheckResult`; ``details`` holds the
measured numbers so that failures can be diagnosed from the JSON output.
Flow runs of the shipped scenarios are cached per process, so running the
whole list re-uses the coupled trajectories between criteria 8 and 9.
"""
from __future__ import annotations

import functools
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import algebra
from . import flow as fl
from . import hamiltonians as hm
from . import spectral as sp
from .diophantine import COUPLED_RATIO, admissibility_check, verify_eigenvalue_bound
from .rng import LinearRNG
from .scenario import builtin_names, load_scenario

__all__ = ["CheckResult", "CRITERIA", "run_criterion", "run_criteria", "thread_cap", "scenario_run"]

SQRT2 = math.sqrt(2.0)
COUPLED_SCENARIOS = ("coupled_rest", "coupled_boost", "coupled_two")


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number:>2}: {self.title} ({self.elapsed:.2f} s)"

    def to_dict(self) -> dict:
        return {
            "criterion": self.number,
            "title": self.title,
            "passed": self.passed,
            "elapsed": self.elapsed,
            "details": self.details,
        }


@functools.lru_cache(maxsize=None)
def scenario_run(name: str):
    """Problem and trajectory of a shipped scenario (cached)."""
    problem = load_scenario(name).problem()
    return problem, fl.run_flow(problem)


# -- 1 -----------------------------------------------------------------------


def criterion_1() -> tuple[bool, dict]:
    cat = {k: np.asarray(v.entries) for k, v in algebra.standard_matrices().items()}
    I2, I4 = np.eye(2, dtype=np.int64), np.eye(4, dtype=np.int64)
    checks = {
        "J^2 = -I": np.array_equal(cat["J"] @ cat["J"], -I2),
        "M1^2 = -I": np.array_equal(cat["M1"] @ cat["M1"], -I4),
        "M2^2 = -I": np.array_equal(cat["M2"] @ cat["M2"], -I4),
        "M1 = L J1": np.array_equal(cat["M1"], cat["L"] @ cat["J1"]),
        "M2 = L J2": np.array_equal(cat["M2"], cat["L"] @ cat["J2"]),
    }
    for name in ("K1", "K2", "M1", "M2"):
        checks[f"{name} antisymmetric"] = np.array_equal(cat[name].T, -cat[name])
    checks = {k: bool(v) for k, v in checks.items()}
    return all(checks.values()), checks


# -- 2 -----------------------------------------------------------------------


def _lattice(n: int):
    r = np.arange(-n, n + 1)
    mm, kk = np.meshgrid(r, r, indexing="ij")
    return mm.ravel(), kk.ravel()


def eigen_deviation(R: float = SQRT2, n: int = 64) -> dict:
    mm, kk = _lattice(n)
    M1, M2 = sp.operator_pair("M")
    A = 1j * R * mm[:, None, None] * M1 + 1j * kk[:, None, None] * M2
    B = sp.SIGNATURE - A
    num_a = np.linalg.eigvalsh(A)
    num_b = np.linalg.eigvalsh(B)
    closed_a = np.sort(np.stack(sp.closed_form_eigenvalues_A(mm, kk, R), axis=-1), axis=-1)
    closed_b = np.sort(np.stack(sp.closed_form_eigenvalues_B(mm, kk, R), axis=-1), axis=-1)
    return {
        "R": R,
        "n": n,
        "max_dev_A": float(np.max(np.abs(num_a - closed_a))),
        "max_dev_B": float(np.max(np.abs(num_b - closed_b))),
        "modes": int(mm.size),
    }


def criterion_2() -> tuple[bool, dict]:
    d = eigen_deviation()
    return d["max_dev_A"] < 1e-10 and d["max_dev_B"] < 1e-10, d


# -- 3 -----------------------------------------------------------------------


def criterion_3() -> tuple[bool, dict]:
    _, rec = scenario_run("counterexample")
    norms = np.asarray(rec.sobolev_norms[0])
    diss = float(np.max(rec.dissipation))
    drift = float(np.max(np.abs(norms - norms[0])))
    ns = (8, 16, 32)
    ker_m, ker_k, modes = [], [], []
    for n in ns:
        g = sp.TorusGrid.from_ratio(SQRT2, n)
        ker_m.append(sp.kernel_dimension("M∂", g))
        ker_k.append(sp.kernel_dimension("K∂", g))
        modes.append(n * n)
    slopes = [(ker_k[i + 1] - ker_k[i]) / (modes[i + 1] - modes[i]) for i in range(len(ns) - 1)]
    ok = (
        diss < 1e-14
        and drift < 1e-12
        and rec.s_values[-1] >= 50.0
        and all(k == 4 for k in ker_m)
        and all(abs(s - 1.0) <= 0.05 for s in slopes)
    )
    return ok, {
        "max_dissipation": diss,
        "norm_drift": drift,
        "norm": float(norms[0]),
        "s_max": rec.s_values[-1],
        "N": list(ns),
        "ker_M": ker_m,
        "ker_K": ker_k,
        "ker_K_slope": slopes,
        "predicted_slope": 1.0,
    }


# -- 4 -----------------------------------------------------------------------


def criterion_4() -> tuple[bool, dict]:
    problem, rec = scenario_run("free_decay")
    (mk,) = problem.config.track_modes
    s = np.asarray(rec.s_values)
    amp = np.asarray(rec.mode_amplitudes[mk])
    half = len(s) // 2
    fitted = -float(np.polyfit(s[half:], np.log(amp[half:]), 1)[0])
    l1, _, l2, _ = sp.closed_form_eigenvalues_A(*mk, problem.grid.R)
    positive = [float(x) for x in (l1, l2) if x > 0]
    closed = min(positive, key=lambda lam: abs(lam - fitted))
    rel = abs(fitted - closed) / closed
    monotone = {}
    for h, vals in rec.sobolev_norms.items():
        v = np.asarray(vals)
        monotone[h] = bool(np.all(np.diff(v) <= 1e-14 * v[:-1]) and v[-1] < v[0])
    ok = all(monotone.values()) and rel < 0.02
    return ok, {
        "slowest_mode": list(mk),
        "fitted_rate": fitted,
        "closed_form_rate": closed,
        "relative_error": rel,
        "monotone_by_order": {str(h): m for h, m in monotone.items()},
        "final_over_initial": {str(h): v[-1] / v[0] for h, v in rec.sobolev_norms.items()},
    }


# -- 5 -----------------------------------------------------------------------


def criterion_5() -> tuple[bool, dict]:
    rep = verify_eigenvalue_bound(COUPLED_RATIO, 256)
    ref = verify_eigenvalue_bound(SQRT2, 64)
    d = rep.to_dict()
    d["reference_sqrt2"] = {"passed": ref.passed, "coincidences": ref.coincidences[:8]}
    return rep.passed and rep.case1_checked > 0, d


# -- 6 -----------------------------------------------------------------------


def criterion_6() -> tuple[bool, dict]:
    rep = fl.free_wave_kernel_check(SQRT2, 256)
    g = sp.TorusGrid.from_ratio(SQRT2, 64)
    ker = sp.kernel_dimension("wave", g)
    return rep.passed and rep.min_value > 0 and ker == 1, {**rep.to_dict(), "wave_kernel_dimension": ker}


# -- 7 -----------------------------------------------------------------------


def fd_gradient_error(spec: hm.HamiltonianSpec, Z: np.ndarray, grid: sp.TorusGrid, h: float = 1e-4) -> float:
    """Relative max-norm gap between the central-difference action gradient and minus the residual."""
    n = Z.size
    fd = np.empty(n)
    chunk = 256
    for lo in range(0, n, chunk):
        idx = np.arange(lo, min(n, lo + chunk))
        bump = np.zeros((idx.size, n))
        bump[np.arange(idx.size), idx] = h
        plus = hm.action_batch(spec, (Z.ravel() + bump).reshape((-1,) + Z.shape), grid)
        minus = hm.action_batch(spec, (Z.ravel() - bump).reshape((-1,) + Z.shape), grid)
        fd[idx] = (plus - minus) / (2 * h)
    grad = fd.reshape(Z.shape) / grid.cell_volume
    target = -fl.residual(spec, Z, grid)
    return float(np.max(np.abs(grad - target)) / np.max(np.abs(target)))


def criterion_7() -> tuple[bool, dict]:
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    out = {}
    for spec in (hm.HamiltonianSpec("ddw_free"), hm.HamiltonianSpec("bridges_free")):
        errs = []
        for seed in range(20):
            Z = LinearRNG(1000 + seed).uniform((spec.components,) + g.shape)
            errs.append(fd_gradient_error(spec, Z, g))
        out[spec.kind] = max(errs)
    return all(e < 1e-6 for e in out.values()), {"max_relative_error": out, "states": 20, "grid": [16, 16]}


# -- 8 -----------------------------------------------------------------------


def criterion_8() -> tuple[bool, dict]:
    out = {}
    ok = True
    for name in builtin_names():
        problem, rec = scenario_run(name)
        tol = 10.0 * problem.config.ds
        defect = rec.max_window_defect(1.0)
        passed = defect < tol
        if rec.autonomous:
            passed = passed and rec.action_monotone(1e-12)
        out[name] = {"window_defect": defect, "tolerance": tol, "passed": passed}
        ok = ok and passed
    return ok, out


# -- 9 -----------------------------------------------------------------------


def criterion_9() -> tuple[bool, dict]:
    out = {}
    ok = True
    for name in COUPLED_SCENARIOS:
        problem, rec = scenario_run(name)
        g = problem.grid
        src = hm.source_field(problem.spec, g, math.inf)
        Zp = sp.dft_inverse(problem.limit).values
        res = float(np.max(np.abs(fl.residual(problem.spec, Zp, g, src))))
        s = np.asarray(rec.s_values)
        below = {}
        for h, vals in rec.distance_to_limit.items():
            v = np.asarray(vals)
            hit = np.flatnonzero(v < 1e-4)
            below[str(h)] = float(s[hit[0]]) if hit.size and np.all(v[hit[0]:] < 1e-4) else None
        passed = res < 1e-8 and all(x is not None and x <= 50.0 for x in below.values())
        out[name] = {
            "limit_residual": res,
            "first_s_below_1e-4": below,
            "final_distance": {str(h): v[-1] for h, v in rec.distance_to_limit.items()},
            "periodicity_defect": hm.periodicity_defect(problem.spec, g),
            "passed": passed,
        }
        ok = ok and passed
    return ok, out


# -- 10 ----------------------------------------------------------------------


def criterion_10() -> tuple[bool, dict]:
    T = 2.0 * math.pi / COUPLED_RATIO
    rep = admissibility_check(T, 3.5, 256)
    bad = admissibility_check(2.0 * math.pi / SQRT2, 3.5, 256)
    surfaced = (not bad.passed) and 1 in bad.coincidences
    return rep.passed and rep.c_h > 0 and surfaced, {
        "scenario_T": rep.to_dict(),
        "sqrt2_T": bad.to_dict(),
    }


CRITERIA = {
    1: ("structure identities", criterion_1),
    2: ("closed-form eigenvalues of A and B", criterion_2),
    3: ("degeneracy witness and kernel dimensions", criterion_3),
    4: ("exponential decay of the regular free flow", criterion_4),
    5: ("eigenvalue lower bound sweep", criterion_5),
    6: ("free-wave rigidity", criterion_6),
    7: ("action gradients equal Floer residuals", criterion_7),
    8: ("energy identity on every shipped scenario", criterion_8),
    9: ("coupled flows converge to the closed-form limit", criterion_9),
    10: ("admissibility gaps", criterion_10),
}


def run_criterion(n: int) -> CheckResult:
    title, fn = CRITERIA[n]
    t0 = time.perf_counter()
    try:
        passed, details = fn()
    except Exception as exc:  # a crash is reported as a failure with its message
        passed, details = False, {"error": f"{type(exc).__name__}: {exc}"}
    return CheckResult(n, title, bool(passed), details, time.perf_counter() - t0)


def thread_cap() -> int:
    raw = os.environ.get("POLYFLOER_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def run_criteria(numbers=None, threads: int | None = None) -> list[CheckResult]:
    """Run criteria concurrently (at most ``threads`` at once); results keep the input order."""
    numbers = sorted(CRITERIA) if numbers is None else list(numbers)
    threads = thread_cap() if threads is None else max(1, threads)
    if threads == 1:
        return [run_criterion(n) for n in numbers]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_criterion, numbers))
