"""Command line front end.

Every run is described by a :class:`RunConfig`.  Values come from built-in
defaults, then an optional JSON file, then command line flags.  Inputs are
dimensionless: detuning in units of gamma, ``v_g kappa / gamma``,
``d gamma / v_g`` and times as ``gamma t``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 tolerance check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import oracle as _oracle
from . import probability as prob
from .core import Gaussian, Lorentzian, PhotonConfiguration, PlaneWave, ProbabilityCurve, SystemParams
from .errors import ChiralRabiError, ConfigError, WidthExceedsLinewidth
from .io import fmt, version_string, write_curve, write_json, write_table
from .wavefunction import evaluate, order_decomposition

__all__ = ["RunConfig", "run", "emit_report", "main", "COMMANDS"]

COMMANDS = ("evolve", "wavefunction", "regimes", "oracle", "coherent", "rabi-check")
PACKETS = ("lorentzian", "gaussian", "plane")
METHODS = ("auto", "closed", "quadrature", "mc", "oracle")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE = 0, 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; field names double as JSON keys and, with
    dashes, as command line flags."""

    command: str = "evolve"
    delta: float = 0.0
    kappa: float = 0.2
    n_photons: int = 1
    packet: str = "lorentzian"
    d: float = 1.0
    g: float | None = None
    t_start: float = 0.0
    t_stop: float = 5.0
    t_points: int = 51
    method: str = "auto"
    samples: int = 100_000
    seed: int = 0
    workers: int = 1
    quad_tol: float = 1e-10
    output: str = "out.csv"
    alpha_sq: float = 1e4
    n_terms: int = 20
    x_min: float = -2.0
    x_max: float = 6.0
    x_points: int = 41
    decomposition: bool = False
    window_scale: float = 1.0
    image_margin: float = 12.0
    refine: int = 1
    tolerance: float | None = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            object.__setattr__(self, f.name, _coerce(f, value))
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.packet not in PACKETS:
            raise ConfigError(f"packet must be one of {PACKETS}, got {self.packet!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.n_photons < 1:
            raise ConfigError("n_photons must be >= 1")
        if self.t_points < 1 or self.x_points < 1:
            raise ConfigError("grid sizes must be >= 1")
        if self.t_stop < self.t_start or self.t_start < 0:
            raise ConfigError("need 0 <= t_start <= t_stop")
        if self.t_points > 1 and self.t_stop == self.t_start:
            raise ConfigError("t_stop must exceed t_start when t_points > 1")
        for name in ("kappa", "d", "quad_tol", "alpha_sq", "window_scale", "image_margin"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.g is not None and not self.g > 0:
            raise ConfigError("g must be positive")
        if self.samples < 1 or self.workers < 1 or self.n_terms < 1 or self.refine < 0:
            raise ConfigError("samples, workers, n_terms must be >= 1 and refine >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # derived quantities
    @property
    def params(self) -> SystemParams:
        return SystemParams.from_detuning(self.delta, n_photons=self.n_photons)

    @property
    def kappa_eff(self) -> float:
        if self.g is not None:
            return prob.kappa_for_rabi(self.g, self.params)
        return self.kappa

    @property
    def packet_spec(self):
        if self.packet == "lorentzian":
            return Lorentzian(self.kappa_eff)
        if self.packet == "gaussian":
            return Gaussian(self.d)
        return PlaneWave()

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_stop, self.t_points)

    @property
    def mc(self) -> prob.McConfig:
        return prob.McConfig(n_samples=self.samples, seed=self.seed, n_workers=self.workers)


def _coerce(f, value):
    kind = f.type
    if value is None:
        if "None" in str(kind):
            return None
        raise ConfigError(f"{f.name} may not be null")
    try:
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "int":
            if isinstance(value, (bool, str)) or float(value) != int(value):
                raise TypeError
            return int(value)
        # float or float | None
        if isinstance(value, bool) or isinstance(value, str):
            raise TypeError
        value = float(value)
        if not math.isfinite(value):
            raise TypeError
        return value
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {f.name}: {value!r}") from None


# ---------------------------------------------------------------- commands

def _auto_curve(cfg: RunConfig, params: SystemParams, packet) -> ProbabilityCurve:
    t = cfg.times
    method = cfg.method
    N = params.n_photons
    if method == "auto":
        if isinstance(packet, Gaussian):
            method = "quadrature"
        elif N <= 2:
            method = "closed"
        elif N == 3:
            method = "quadrature"
        else:
            method = "mc"
    if isinstance(packet, PlaneWave):
        raise ConfigError("probabilities need a normalizable packet")
    if method == "closed":
        if not isinstance(packet, Lorentzian) or N > 2:
            raise ConfigError("closed forms exist for Lorentzian packets with N <= 2")
        vals = (prob.p1_closed(t, params, packet.kappa) if N == 1
                else prob.p2_closed(t, params, packet.kappa, cfg.quad_tol))
        return ProbabilityCurve(t, vals, np.zeros_like(t), "closed")
    if method == "quadrature":
        vals = prob.p_quadrature(t, params, packet, cfg.quad_tol)
        return ProbabilityCurve(t, vals, np.zeros_like(t), "quadrature")
    if method == "mc":
        return prob.p_monte_carlo(t, params, packet, cfg.mc)
    return _oracle.oracle_curve(params, packet, t, cfg.window_scale, cfg.image_margin, cfg.refine)


def _sidecar(cfg: RunConfig, extra: dict) -> dict:
    return {"config": cfg.to_dict(), "version": version_string(), **extra}


def _ratios(cfg, params, kappa):
    rep = prob.classify_regime(params, kappa, cfg.t_stop)
    return rep, {
        "N v_g kappa / gamma": rep.n_vk, "delta / gamma": rep.delta_ratio,
        "gamma t_max": rep.gamma_t, "g / gamma": rep.g_ratio,
    }


def _cmd_evolve(cfg):
    params, packet = cfg.params, cfg.packet_spec
    curve = _auto_curve(cfg, params, packet)
    out = write_curve(cfg.output, curve)
    kappa = getattr(packet, "kappa", None)
    results = {"command": "evolve", "curve": curve, "checks": []}
    if kappa is not None:
        results["regime"], results["ratios"] = _ratios(cfg, params, kappa)
    t_pk, p_pk = curve.peak
    results["summary"] = {"peak p": p_pk, "peak gamma t": t_pk}
    write_json(str(out) + ".json", _sidecar(cfg, {"method": curve.method, "meta": curve.meta,
                                                  "summary": results["summary"]}))
    return results


def _cmd_wavefunction(cfg):
    params, packet = cfg.params, cfg.packet_spec
    n = params.n_photons - 1
    if n > 2:
        raise ConfigError("grid dumps support N <= 3")
    xs = np.linspace(cfg.x_min, cfg.x_max, cfg.x_points)
    grids = np.meshgrid(*([xs] * n), indexing="ij") if n else []
    pts = np.stack([g.ravel() for g in grids], axis=1) if n else np.zeros((1, 0))
    cols = {f"x_{i + 1}": [] for i in range(n)}
    cols.update({"t": [], "re": [], "im": [], "abs2": []})
    if cfg.decomposition:
        for l in range(n + 1):
            cols[f"K{l}_re"] = []
            cols[f"K{l}_im"] = []
    for t in cfg.times:
        for x in pts:
            conf = PhotonConfiguration(tuple(x), t)
            if cfg.decomposition:
                K = order_decomposition(conf, params, packet)
                e = complex(np.sum(K))
                for l in range(n + 1):
                    cols[f"K{l}_re"].append(K[l].real)
                    cols[f"K{l}_im"].append(K[l].imag)
            else:
                e = evaluate(conf, params, packet)
            for i in range(n):
                cols[f"x_{i + 1}"].append(x[i])
            cols["t"].append(t)
            cols["re"].append(e.real)
            cols["im"].append(e.imag)
            cols["abs2"].append(abs(e) ** 2)
    out = write_table(cfg.output, list(cols), list(cols.values()))
    write_json(str(out) + ".json", _sidecar(cfg, {"rows": len(cols["t"])}))
    return {"command": "wavefunction", "rows": len(cols["t"]), "checks": [],
            "summary": {"rows": len(cols["t"])}}


def _regime_tolerance(regime, curve, asym, cfg):
    sig3 = 3 * curve.std_errors
    if regime is prob.Regime.WEAK_FIELD:
        tol = 0.05 * np.abs(asym)
    elif regime is prob.Regime.LARGE_DETUNING:
        tol = np.maximum(sig3, 0.05 * np.max(np.abs(asym)))
    else:
        tol = np.maximum(sig3, 0.05)
    if cfg.tolerance is not None:
        tol = np.maximum(tol, cfg.tolerance)
    return tol


def _cmd_regimes(cfg):
    params, packet = cfg.params, cfg.packet_spec
    if not isinstance(packet, Lorentzian):
        raise ConfigError("regime analysis uses Lorentzian packets")
    kappa = packet.kappa
    curve = _auto_curve(cfg, params, packet)
    rep, ratios = _ratios(cfg, params, kappa)
    header = ["t", "p", "std_err"]
    columns = [curve.times, curve.values, curve.std_errors]
    checks = []
    for regime in rep.applicable:
        asym = prob.asymptotic_probability(regime, curve.times, params, kappa)
        header.append(regime.value)
        columns.append(asym)
        dev = np.abs(curve.values - asym)
        tol = _regime_tolerance(regime, curve, asym, cfg)
        mask = curve.times > 0
        checks.append({"name": regime.value, "max_deviation": float(dev.max()),
                       "passed": bool(np.all(dev[mask] <= tol[mask]))})
    out = write_table(cfg.output, header, columns)
    results = {"command": "regimes", "curve": curve, "regime": rep, "ratios": ratios,
               "checks": checks}
    write_json(str(out) + ".json", _sidecar(cfg, {"regime": rep.tag.value,
                                                  "applicable": [r.value for r in rep.applicable],
                                                  "ratios": ratios, "checks": checks,
                                                  "meta": curve.meta}))
    return results


def _analytic(cfg, params, packet):
    t = cfg.times
    if isinstance(packet, Lorentzian) and params.n_photons == 1:
        return prob.p1_closed(t, params, packet.kappa)
    if isinstance(packet, Lorentzian) and params.n_photons == 2:
        return prob.p2_closed(t, params, packet.kappa, cfg.quad_tol)
    return prob.p_quadrature(t, params, packet, cfg.quad_tol)


def _cmd_oracle(cfg):
    params, packet = cfg.params, cfg.packet_spec
    curve = _oracle.oracle_curve(params, packet, cfg.times, cfg.window_scale, cfg.image_margin,
                                 cfg.refine)
    ref = _analytic(cfg, params, packet)
    diff = np.abs(curve.values - ref)
    tol = cfg.tolerance if cfg.tolerance is not None else (1e-3 if params.n_photons == 1 else 1e-2)
    checks = [
        {"name": "max |p_oracle - p_analytic|", "max_deviation": float(diff.max()),
         "tolerance": tol, "passed": bool(diff.max() < tol)},
        {"name": "norm drift", "max_deviation": curve.meta["norm_drift"],
         "tolerance": _oracle.NORM_TOL, "passed": curve.meta["norm_drift"] < _oracle.NORM_TOL},
    ]
    out = write_table(cfg.output, ["t", "p_oracle", "p_analytic", "abs_diff"],
                      [curve.times, curve.values, ref, diff])
    write_json(str(out) + ".json", _sidecar(cfg, {"checks": checks, "meta": curve.meta}))
    return {"command": "oracle", "curve": curve, "checks": checks,
            "summary": {"max |dp|": float(diff.max())}}


def _cmd_coherent(cfg):
    params = cfg.params
    kappa = cfg.kappa_eff
    curve = prob.coherent_average(cfg.alpha_sq, cfg.times, params, kappa,
                                  quad_tol=cfg.quad_tol)
    g0 = math.sqrt(2 * params.v_g * kappa * params.gamma)
    ref = np.sin(g0 * math.sqrt(cfg.alpha_sq) * curve.times) ** 2
    diff = np.abs(curve.values - ref)
    tol = cfg.tolerance if cfg.tolerance is not None else 0.01
    checks = [{"name": "max |average - sin^2|", "max_deviation": float(diff.max()),
               "tolerance": tol, "passed": bool(diff.max() < tol)},
              {"name": "tail mass", "max_deviation": curve.meta["tail_mass"],
               "tolerance": prob.MAX_TAIL_MASS, "passed": True}]
    out = write_table(cfg.output, ["t", "p", "sin2", "abs_diff"],
                      [curve.times, curve.values, ref, diff])
    write_json(str(out) + ".json", _sidecar(cfg, {"checks": checks, "meta": curve.meta}))
    return {"command": "coherent", "curve": curve, "checks": checks,
            "summary": {"g0": g0, "tail mass": curve.meta["tail_mass"]}}


def _cmd_rabi_check(cfg):
    gt = cfg.times
    series = prob.rabi_series(gt, cfg.n_terms)
    ref = np.sin(gt) ** 2
    diff = np.abs(np.atleast_1d(series) - ref)
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-10
    checks = [{"name": f"max |series({cfg.n_terms}) - sin^2|", "max_deviation": float(diff.max()),
               "tolerance": tol, "passed": bool(diff.max() < tol)}]
    out = write_table(cfg.output, ["gt", "series", "sin2", "abs_diff"],
                      [gt, np.atleast_1d(series), ref, diff])
    write_json(str(out) + ".json", _sidecar(cfg, {"checks": checks}))
    return {"command": "rabi-check", "checks": checks,
            "summary": {"chi_2": str(prob.chi(2))}}


_DISPATCH = {
    "evolve": _cmd_evolve,
    "wavefunction": _cmd_wavefunction,
    "regimes": _cmd_regimes,
    "oracle": _cmd_oracle,
    "coherent": _cmd_coherent,
    "rabi-check": _cmd_rabi_check,
}


def run(cfg: RunConfig):
    """Execute one configuration; returns ``(exit_code, results)``."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", WidthExceedsLinewidth)
        results = _DISPATCH[cfg.command](cfg)
    results["warnings"] = [str(w.message) for w in caught
                           if issubclass(w.category, WidthExceedsLinewidth)]
    failed = any(not c["passed"] for c in results.get("checks", []))
    return (EXIT_TOLERANCE if failed else EXIT_OK), results


def emit_report(results: dict) -> str:
    """Fixed-format text summary of a completed run."""
    curve = results.get("curve")
    if curve is not None and len(curve) == 0:
        raise ConfigError("empty curve, nothing to report")
    lines = [f"command        {results['command']}"]
    rep = results.get("regime")
    if rep is not None:
        lines.append(f"regime         {rep.tag.value}")
    for key, val in results.get("ratios", {}).items():
        lines.append(f"{key:<30} {val:>14.6g}")
    for key, val in results.get("summary", {}).items():
        sval = f"{val:>14.6g}" if isinstance(val, (int, float)) else f"{val!s:>14}"
        lines.append(f"{key:<30} {sval}")
    for w in results.get("warnings", []):
        lines.append(f"warning        {w}")
    for c in results.get("checks", []):
        tag = "PASS" if c["passed"] else "FAIL"
        lines.append(f"{tag}  {c['name']:<34} {c['max_deviation']:>12.4g}")
    return "\n".join(lines)


# ---------------------------------------------------------------- parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser():
    ap = _Parser(
        prog="chiral-rabi",
        description="Excitation of a two-level emitter by N-photon pulses in a chiral waveguide.")
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with RunConfig fields")
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            ap.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction,
                            default=argparse.SUPPRESS)
        else:
            typ = {"int": int, "str": str}.get(f.type, float)
            ap.add_argument(flag, dest=f.name, type=typ, default=argparse.SUPPRESS)
    return ap


def parse_config(argv) -> RunConfig:
    ap = _parser()
    ns = ap.parse_args(argv)
    data = {}
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
    flags = {k: v for k, v in vars(ns).items() if k not in ("config", "command")}
    data = {**data, **flags}
    if ns.command is not None:
        data["command"] = ns.command
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        code, results = run(cfg)
        print(emit_report(results))
        return code
    except ChiralRabiError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return exc.exit_code
