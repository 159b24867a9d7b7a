"""Parameter sweeps over the map families with log-log regressions and ratio tables.

Every member is evaluated from its own parameters and a seed derived from
them, so a report is reproducible bit for bit and any sub-sweep reproduces
the corresponding rows of a larger one.  CSV output carries no timings.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .geometry import VolumeFormExtension, make_quadrature, volume_density
from .invariants import (
    InconclusiveError,
    brouwer_degree_count_auto,
    brouwer_degree_integral,
    hopf_invariant_linking,
    hopf_invariant_whitehead,
    sample_pullback,
)
from .mapzoo import bubble_map, scale_map, whitehead_map
from .potentials import BumpTwoForm, TrigMap, commutator_experiment
from .sobolev import SeminormSpec, fractional_seminorm, fractional_seminorm_mc, gradient_energy


@dataclass
class Regression:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    n: int
    residuals: list

    def to_dict(self):
        return dict(self.__dict__)


def loglog_fit(x, y) -> Regression:
    """OLS fit of log y = a + b log x with a 95% t-interval for b."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("x and y differ in length")
    if len(x) < 4:
        raise ValueError("regression needs at least 4 family members")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    n = len(x)
    tq = stats.t.ppf(0.975, n - 2)
    return Regression(float(res.slope), float(res.intercept), float(res.stderr),
                      float(res.slope - tq * res.stderr), float(res.slope + tq * res.stderr), n,
                      [float(r) for r in resid])


def ratio_stats(values) -> dict:
    v = np.abs(np.asarray(values, dtype=float))
    lo, hi = float(v.min()), float(v.max())
    return {"min": lo, "max": hi, "max_over_min": hi / lo if lo > 0 else float("inf")}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    columns: list
    rows: list
    regressions: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"experiment": self.experiment, "config": self.config, "members": len(self.rows),
                "regressions": {k: v.to_dict() for k, v in self.regressions.items()},
                "ratios": self.ratios, "checks": self.checks, "metadata": self.metadata}

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def write(self, out_dir, stem: str | None = None) -> tuple[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        stem = stem or self.experiment
        csv_path = os.path.join(out_dir, stem + ".csv")
        json_path = os.path.join(out_dir, stem + ".json")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")
        return csv_path, json_path


def _map_members(fn, members, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, members))
    return [fn(m) for m in members]


def _finish(report, t0, threads):
    report.metadata = {"runtime_seconds": time.perf_counter() - t0, "threads": int(threads or 1),
                       "version": __version__}
    return report


def _skey(s):
    return f"{s:g}"


def _circle_or_sphere_seminorm_pow(f, n, s, rule):
    """[f]_{W^{s,n/s}}^{n/s} (s < 1) or int |Df|^n (s = 1)."""
    if s >= 1:
        return gradient_energy(f, n, rule)
    return fractional_seminorm(f, SeminormSpec(s, n / s, "sphere", n), rule).pth_power


_SEMINORM_RES = {1: 2048, 2: 48}


# ---------------------------------------------------------------------------

def run_degree_sharpness(n: int = 1, s_list=(0.6, 0.8), d_list=tuple(range(1, 17)), resolution=None,
                         threads: int = 1, seed: int = 0) -> ExperimentReport:
    """[f_d]^{n/s} against d for the bubble maps f_d; expected slope 1."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    d_list = [int(d) for d in d_list]
    if len(d_list) < 4:
        raise ValueError("regression needs at least 4 family members")
    if any(d <= 0 for d in d_list):
        raise ValueError("degrees must be positive for the log-log fit")
    if any(not 0 < s <= 1 for s in s_list):
        raise ValueError("s must lie in (0, 1]")
    t0 = time.perf_counter()
    rule = make_quadrature(n, resolution or _SEMINORM_RES[n])

    def member(d):
        f = bubble_map(n, d)
        a = brouwer_degree_integral(f)
        c = brouwer_degree_count_auto(f, seed=seed + d)
        if a.inconclusive or a.rounded != d or c.rounded != d:
            raise InconclusiveError(f"degree check failed for d={d}: integral {a.raw}, count {c.raw}")
        row = {"d": d, "degree_integral": a.raw, "degree_count": c.rounded}
        for s in s_list:
            row["seminorm_pow_s" + _skey(s)] = _circle_or_sphere_seminorm_pow(f, n, s, rule)
        return row

    rows = _map_members(member, d_list, threads)
    cols = ["d", "degree_integral", "degree_count"] + ["seminorm_pow_s" + _skey(s) for s in s_list]
    rep = ExperimentReport("degree_sharpness", {"n": n, "s_list": list(s_list), "d_list": d_list,
                                                "resolution": rule.resolution, "seed": seed}, cols, rows)
    for s in s_list:
        key = "s" + _skey(s)
        rep.regressions[key] = loglog_fit([r["d"] for r in rows], [r["seminorm_pow_" + key] for r in rows])
        rep.checks["slope_" + key] = abs(rep.regressions[key].slope - 1.0) <= 0.15
    return _finish(rep, t0, threads)


def run_degree_blowup(n: int = 1, s: float = 0.4, sigma: float = 0.4, k_list=(1, 2, 4, 8, 16, 32, 64),
                      resolution=None, threads: int = 1, seed: int = 0) -> ExperimentReport:
    """g_k = k^{-sigma} f_k: bounded [g_k]_{W^{s,n/s}} while int g_k* omega_hat = k^{1 - sigma (n+1)}."""
    if not s < n / (n + 1):
        raise ValueError("need s < n/(n+1)")
    k_list = [int(k) for k in k_list]
    if len(k_list) < 4:
        raise ValueError("regression needs at least 4 family members")
    t0 = time.perf_counter()
    rule = make_quadrature(n, resolution or _SEMINORM_RES[n])
    ext = VolumeFormExtension(n, "linear")
    spec = SeminormSpec(s, n / s, "sphere", n)

    def member(k):
        f = bubble_map(n, k)
        lam = float(k) ** (-sigma)
        g = scale_map(f, lam)
        J = g.jacobian(rule.nodes)
        integral = float(rule.integrate(volume_density(g(rule.nodes), J, ext)))
        sn_g = fractional_seminorm(g, spec, rule)
        sn_f = fractional_seminorm(f, spec, rule)
        deg = brouwer_degree_integral(f).rounded
        return {"k": k, "scale": lam, "degree": deg, "integral": integral,
                "seminorm_g": sn_g.value, "seminorm_f_pow": sn_f.pth_power,
                "degree_ratio": abs(deg) / sn_f.pth_power}

    rows = _map_members(member, k_list, threads)
    cols = ["k", "scale", "degree", "integral", "seminorm_g", "seminorm_f_pow", "degree_ratio"]
    rep = ExperimentReport("degree_blowup", {"n": n, "s": s, "sigma": sigma, "k_list": k_list,
                                             "resolution": rule.resolution, "seed": seed}, cols, rows)
    expected = 1 - sigma * (n + 1)
    rep.regressions["integral"] = loglog_fit(k_list, [r["integral"] for r in rows])
    rep.ratios["seminorm_g"] = ratio_stats([r["seminorm_g"] for r in rows])
    rep.ratios["degree_ratio"] = ratio_stats([r["degree_ratio"] for r in rows])
    rep.config["expected_slope"] = expected
    rep.checks["slope"] = abs(rep.regressions["integral"].slope - expected) <= 0.1
    rep.checks["seminorm_bounded"] = rep.ratios["seminorm_g"]["max_over_min"] <= 2.0
    return _finish(rep, t0, threads)


def _hopf_degree(f, N, full, expected):
    """Hopf invariant from both pipelines, or the closed form (flagged) when not computed."""
    if not full:
        return {"hopf_whitehead": None, "hopf_linking": None, "hopf_degree": expected, "extrapolated": True}
    s = sample_pullback(f, N=N)
    w = hopf_invariant_whitehead(f, sample=s)
    lk = hopf_invariant_linking(f, L=s.L, N=N, sample_F=s.F)
    if w.inconclusive or w.rounded != lk.rounded:
        raise InconclusiveError(f"Hopf pipelines disagree: whitehead {w.raw}, linking {lk.raw}")
    return {"hopf_whitehead": w.raw, "hopf_linking": lk.raw, "hopf_degree": lk.rounded, "extrapolated": False}


def run_hopf_sharpness(s_list=(0.8, 1.0), k_list=(1, 2, 3, 4), full_max_k: int = 3, N: int = 96,
                       mc_samples: int = 200000, resolution: int = 48, threads: int = 1,
                       seed: int = 0) -> ExperimentReport:
    """[f]^{4/s}_{W^{s,3/s}} against deg_H for the Whitehead maps; expected slope 1.

    Members with k > full_max_k use the closed form 2k^2 and are flagged.
    """
    k_list = [int(k) for k in k_list]
    if len(k_list) < 4:
        raise ValueError("regression needs at least 4 family members")
    t0 = time.perf_counter()
    rule = make_quadrature(3, resolution)

    def member(k):
        f = whitehead_map(1, k)
        row = {"k": k}
        row.update(_hopf_degree(f, N, k <= full_max_k, 2 * k * k))
        for s in s_list:
            key = _skey(s)
            if s >= 1:
                row["seminorm_pow_s" + key] = gradient_energy(f, 3, rule) ** (4 / 3)
            else:
                e = fractional_seminorm_mc(f, SeminormSpec(s, 3 / s, "sphere", 3), seed=seed + 101 * k,
                                           n_samples=mc_samples)
                row["seminorm_pow_s" + key] = e.value ** (4 / s)
            row["ratio_s" + key] = abs(row["hopf_degree"]) / row["seminorm_pow_s" + key]
        return row

    rows = _map_members(member, k_list, threads)
    cols = ["k", "hopf_whitehead", "hopf_linking", "hopf_degree", "extrapolated"]
    for s in s_list:
        cols += ["seminorm_pow_s" + _skey(s), "ratio_s" + _skey(s)]
    rep = ExperimentReport("hopf_sharpness", {"s_list": list(s_list), "k_list": k_list, "full_max_k": full_max_k,
                                              "N": N, "mc_samples": mc_samples, "resolution": resolution,
                                              "seed": seed}, cols, rows)
    degs = [abs(r["hopf_degree"]) for r in rows]
    full = [r for r in rows if not r["extrapolated"]]
    for s in s_list:
        key = "s" + _skey(s)
        rep.regressions[key] = loglog_fit(degs, [r["seminorm_pow_" + key] for r in rows])
        rep.ratios[key] = ratio_stats([r["ratio_" + key] for r in full or rows])
        rep.checks["ratio_bounded_" + key] = rep.ratios[key]["max_over_min"] <= 3.0
        if s >= 1:
            rep.checks["slope_" + key] = abs(rep.regressions[key].slope - 1.0) <= 0.2
    return _finish(rep, t0, threads)


# deg_H = 2 k_+ k_- = 2k for these factor pairs
BLOWUP_PAIRS = {1: (1, 1), 2: (1, 2), 4: (2, 2), 8: (2, 4)}


def run_hopf_blowup(s: float = 0.4, sigma: float = 0.1, k_list=(1, 2, 4, 8), N: int = 96,
                    mc_samples: int = 200000, threads: int = 1, seed: int = 0) -> ExperimentReport:
    """g_k = k^{-sigma} f_k with deg_H f_k = 2k: Whitehead integral ~ k^{1 - 6 sigma}, [g_k] bounded."""
    if not s < 2 / 3:
        raise ValueError("need s < 2/3")
    k_list = [int(k) for k in k_list]
    if len(k_list) < 4:
        raise ValueError("regression needs at least 4 family members")
    if any(k not in BLOWUP_PAIRS for k in k_list):
        raise ValueError(f"k must be one of {sorted(BLOWUP_PAIRS)}")
    t0 = time.perf_counter()
    ext = VolumeFormExtension(2, "euler")

    def member(k):
        kp, km = BLOWUP_PAIRS[k]
        f = whitehead_map(1, kp, k_minus=km)
        lam = float(k) ** (-sigma)
        g = scale_map(f, lam)
        w = hopf_invariant_whitehead(g, N=N, ext=ext)
        e = fractional_seminorm_mc(g, SeminormSpec(s, 3 / s, "sphere", 3), seed=seed + 101 * k,
                                   n_samples=mc_samples)
        return {"k": k, "k_plus": kp, "k_minus": km, "scale": lam, "whitehead_integral": w.raw,
                "seminorm_g": e.value, "seminorm_stderr": e.stderr}

    rows = _map_members(member, k_list, threads)
    cols = ["k", "k_plus", "k_minus", "scale", "whitehead_integral", "seminorm_g", "seminorm_stderr"]
    rep = ExperimentReport("hopf_blowup", {"s": s, "sigma": sigma, "k_list": k_list, "N": N,
                                           "mc_samples": mc_samples, "seed": seed}, cols, rows)
    expected = 1 - 2 * sigma * 3
    rep.regressions["integral"] = loglog_fit(k_list, [r["whitehead_integral"] for r in rows])
    rep.ratios["seminorm_g"] = ratio_stats([r["seminorm_g"] for r in rows])
    rep.config["expected_slope"] = expected
    rep.checks["slope"] = abs(rep.regressions["integral"].slope - expected) <= 0.1
    rep.checks["seminorm_bounded"] = rep.ratios["seminorm_g"]["max_over_min"] <= 2.0
    return _finish(rep, t0, threads)


def run_commutator_sweep(frequency_list=(1, 2, 4, 8), s_list=(0.6, 0.75, 0.9), amplitude: float = 0.002,
                         N: int = 64, mc_samples: int = 100000, kappa_scale: float = 1.0,
                         threads: int = 1, seed: int = 0) -> ExperimentReport:
    """lhs/rhs of the commutator estimate for trigonometric maps of growing frequency."""
    freqs = [int(M) for M in frequency_list]
    if not freqs:
        raise ValueError("empty frequency list")
    if any(not 0.5 < s < 1 for s in s_list):
        raise ValueError("s must lie in (1/2, 1)")
    t0 = time.perf_counter()
    kappa = BumpTwoForm(lam=kappa_scale)

    def member(M):
        f = TrigMap(M=M, A=amplitude)
        row = {"M": M}
        for s in s_list:
            r = commutator_experiment(f, kappa, s, N=N, mc_samples=mc_samples, seed=seed + 7 * M)
            key = _skey(s)
            row["lhs"] = r["lhs"]
            row["rhs_s" + key] = r["rhs"]
            row["ratio_s" + key] = r["ratio"]
        return row

    rows = _map_members(member, freqs, threads)
    cols = ["M", "lhs"] + [c for s in s_list for c in ("rhs_s" + _skey(s), "ratio_s" + _skey(s))]
    rep = ExperimentReport("commutator_sweep", {"frequency_list": freqs, "s_list": list(s_list),
                                                "amplitude": amplitude, "N": N, "mc_samples": mc_samples,
                                                "kappa_scale": kappa_scale, "seed": seed}, cols, rows)
    for s in s_list:
        key = "s" + _skey(s)
        rep.ratios[key] = ratio_stats([r["ratio_" + key] for r in rows])
        rep.checks["bounded_" + key] = rep.ratios[key]["max_over_min"] <= 3.0
    return _finish(rep, t0, threads)


EXPERIMENTS = {
    "degree_sharpness": run_degree_sharpness,
    "degree_blowup": run_degree_blowup,
    "hopf_sharpness": run_hopf_sharpness,
    "hopf_blowup": run_hopf_blowup,
    "commutator_sweep": run_commutator_sweep,
}
