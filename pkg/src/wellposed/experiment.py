"""Experiment configs, the verification pipeline and table output.

A config is one YAML document. Its sections are::

    name: gevrey_a05_p2
    T: 1.0
    field: {family: holder_singular, alpha: 0.5, p: 2}
    certificate: {modulus: ..., blowup: ...}      # optional override
    kernel: bump
    xi_grid: {min: 10, max: 10000, count: 16}
    initial_data: {profile: gevrey_decay, sigma: 1.2, delta: 1.0}
    tolerances: {rtol: 1e-10, atol: 1e-12, gronwall: 1e-6}
    model: {kind: auto}
    fit: {quantity: log_ratio, slack: 0.25}
    mollify_verify: {n_eps: 16, n_t: 64}
    outputs: {dir: results/gevrey_a05_p2, format: csv}
    workers: 1

The output directory can be overridden by the ``WELLPOSED_OUT_DIR``
environment variable; nothing else is read from the environment.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import yaml

from .analysis import (FIT_COLUMNS, Classification, DecayProfile, GrowthFit, check_decay,
                       classify, fit_growth)
from .coefficients import (CoefficientField, Certificate, check_hyperbolicity,
                           estimate_regularity_constant, make_test_coefficient)
from .energy import (ExponentModel, IntegrationError, SweepSettings, analytic_model,
                     coupling_eps, run_sweep, tau1)
from .moduli import (BlowupSpec, DomainError, ModulusSpec, PsiSpec, validate_modulus,
                     validate_psi)
from .mollify import (REPORT_COLUMNS, BoundReport, MollifierKernel, QuadratureError,
                      default_bound_grids, verify_prop23)

log = logging.getLogger(__name__)

OUT_DIR_ENV = "WELLPOSED_OUT_DIR"
FORMATS = ("csv", "jsonl")
PROFILES = ("constant", "gevrey_decay", "gaussian")
STAGES = ("validate", "certify", "mollify-verify", "sweep", "classify")
GRONWALL_SLACK = math.log1p(1e-5)

RESULT_COLUMNS = ("xi", "eps", "eps_clamped", "E0", "ET", "log_ratio", "gronwall_total",
                  "model_exponent", "ratio", "log_data", "log_solution",
                  "gronwall_dominates", "within_model")


class ConfigError(ValueError):
    """Invalid experiment config; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NumericalFailure(RuntimeError):
    """A pipeline stage produced results that fail their checks."""


class OutputError(OSError):
    """Writing an output file failed."""


# ---------------------------------------------------------------------------
# config


def _take(data: dict, where: str, allowed: Sequence[str]) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(where, "expected a mapping")
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}", "unknown key")
    return data


def _positive(where: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(where, f"expected a number, got {value!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(where, f"must be positive and finite, got {value!r}")
    return v


@dataclass(frozen=True)
class XiGrid:
    min: float = 10.0
    max: float = 1e4
    count: int = 16

    def __post_init__(self):
        _positive("xi_grid.min", self.min)
        _positive("xi_grid.max", self.max)
        if self.count < 8:
            raise ConfigError("xi_grid.count", f"need at least 8 points, got {self.count}")
        if not self.max > self.min:
            raise ConfigError("xi_grid.max", "must exceed xi_grid.min")

    def values(self) -> np.ndarray:
        return np.geomspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class InitialData:
    """Named Fourier profile of the data; the velocity datum is zero.

    ``constant``: ``amplitude``. ``gevrey_decay``:
    ``amplitude exp(-delta |xi|^(1/sigma))``. ``gaussian``:
    ``amplitude exp(-(|xi|/scale)^2)``.
    """

    profile: str = "constant"
    amplitude: float = 1.0
    sigma: float = 1.0
    delta: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError("initial_data.profile", f"must be one of {PROFILES}")
        for k in ("amplitude", "sigma", "delta", "scale"):
            _positive(f"initial_data.{k}", getattr(self, k))
        if self.sigma < 1:
            raise ConfigError("initial_data.sigma", "Gevrey index must be >= 1")

    def log_magnitude(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        base = math.log(self.amplitude)
        if self.profile == "constant":
            return np.full_like(xi, base)
        if self.profile == "gevrey_decay":
            return base - self.delta * xi ** (1.0 / self.sigma)
        return base - (xi / self.scale) ** 2

    def to_dict(self) -> dict:
        out = {"profile": self.profile, "amplitude": self.amplitude}
        if self.profile == "gevrey_decay":
            out.update(sigma=self.sigma, delta=self.delta)
        elif self.profile == "gaussian":
            out["scale"] = self.scale
        return out


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-10
    atol: float = 1e-12
    gronwall: float = 1e-6

    def __post_init__(self):
        for k in ("rtol", "atol", "gronwall"):
            _positive(f"tolerances.{k}", getattr(self, k))


@dataclass(frozen=True)
class ModelChoice:
    """``auto`` takes the model matching the field's certificate."""

    kind: str = "auto"
    p: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("auto", "gevrey", "log_psi"):
            raise ConfigError("model.kind", "must be auto, gevrey or log_psi")
        if self.kind == "gevrey" and (self.p is None or self.alpha is None):
            raise ConfigError("model.p", "gevrey model needs p and alpha")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.p is not None:
            out["p"] = self.p
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out


@dataclass(frozen=True)
class FitSettings:
    quantity: str = "log_ratio"
    slack: float = 0.25
    floor: float = 1e-6

    def __post_init__(self):
        if self.quantity not in ("log_ratio", "gronwall_total"):
            raise ConfigError("fit.quantity", "must be log_ratio or gronwall_total")
        _positive("fit.slack", self.slack)
        _positive("fit.floor", self.floor)


@dataclass(frozen=True)
class VerifyGrid:
    n_eps: int = 16
    n_t: int = 64

    def __post_init__(self):
        if self.n_eps < 1 or self.n_t < 1:
            raise ConfigError("mollify_verify", "grid sizes must be positive")


@dataclass(frozen=True)
class Outputs:
    dir: str = "results"
    format: str = "csv"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError("outputs.format", f"must be one of {FORMATS}")


_SECTIONS = {"xi_grid": XiGrid, "initial_data": InitialData, "tolerances": Tolerances,
             "model": ModelChoice, "fit": FitSettings, "mollify_verify": VerifyGrid,
             "outputs": Outputs}


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete record of one experiment."""

    name: str
    field: dict
    T: float = 1.0
    kernel: str = "bump"
    certificate: Optional[dict] = None
    xi_grid: XiGrid = XiGrid()
    initial_data: InitialData = InitialData()
    tolerances: Tolerances = Tolerances()
    model: ModelChoice = ModelChoice()
    fit: FitSettings = FitSettings()
    mollify_verify: VerifyGrid = VerifyGrid()
    outputs: Outputs = Outputs()
    workers: int = 1

    def __post_init__(self):
        _positive("T", self.T)
        if "family" not in self.field:
            raise ConfigError("field.family", "missing")
        if "T" in self.field:
            raise ConfigError("field.T", "set T at the top level")
        if self.kernel not in ("bump", "polynomial"):
            raise ConfigError("kernel", "must be bump or polynomial")
        if int(self.workers) < 1:
            raise ConfigError("workers", "must be at least 1")
        if self.certificate is not None:
            _take(self.certificate, "certificate", ("modulus", "blowup"))
            for k in ("modulus", "blowup"):
                if k not in self.certificate:
                    raise ConfigError(f"certificate.{k}", "missing")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = _take(data, "config", ("name", "T", "field", "kernel", "certificate",
                                      *_SECTIONS, "workers"))
        if "name" not in data:
            raise ConfigError("name", "missing")
        if "field" not in data:
            raise ConfigError("field", "missing")
        kw: dict[str, Any] = {k: data[k] for k in ("name", "kernel", "workers") if k in data}
        if not isinstance(data["field"], dict):
            raise ConfigError("field", "expected a mapping")
        kw["field"] = dict(data["field"])
        if "T" in data:
            kw["T"] = float(data["T"])
        if data.get("certificate") is not None:
            kw["certificate"] = dict(data["certificate"])
        for key, typ in _SECTIONS.items():
            if key in data:
                sub = _take(data[key], key, [f.name for f in dataclasses.fields(typ)])
                try:
                    kw[key] = typ(**sub)
                except TypeError as exc:
                    raise ConfigError(key, str(exc)) from None
        if "workers" in kw:
            kw["workers"] = int(kw["workers"])
        return cls(**kw)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "T": self.T, "field": dict(self.field),
                               "kernel": self.kernel}
        if self.certificate is not None:
            out["certificate"] = dict(self.certificate)
        for key in _SECTIONS:
            sub = getattr(self, key)
            out[key] = sub.to_dict() if hasattr(sub, "to_dict") else dataclasses.asdict(sub)
        out["workers"] = self.workers
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid YAML: {exc}") from None
        return cls.from_dict(data)

    def with_overrides(self, out_dir: Optional[str] = None, workers: Optional[int] = None,
                       fmt: Optional[str] = None) -> "ExperimentConfig":
        outputs = Outputs(out_dir or self.outputs.dir, fmt or self.outputs.format)
        return dataclasses.replace(self, outputs=outputs,
                                   workers=self.workers if workers is None else int(workers))


def bundled_configs() -> list:
    return sorted(p.name[:-5] for p in resources.files("wellposed.configs").iterdir()
                  if p.name.endswith(".yaml"))


def load_config(source) -> ExperimentConfig:
    """Load a config from a path, or by name from the bundled configs."""
    path = Path(source)
    if path.is_file():
        try:
            text = path.read_text()
        except OSError as exc:
            raise OutputError(f"cannot read {path}: {exc}") from exc
    else:
        name = str(source)
        res = resources.files("wellposed.configs") / f"{name}.yaml"
        if not res.is_file():
            raise OutputError(f"no config file {path} and no bundled config {name!r}")
        text = res.read_text()
    return ExperimentConfig.from_yaml(text)


def output_dir(cfg: ExperimentConfig, override: Optional[str] = None) -> Path:
    """``override``, else ``$WELLPOSED_OUT_DIR/<name>``, else the config's directory."""
    if override:
        return Path(override)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env) / cfg.name
    return Path(cfg.outputs.dir)


# ---------------------------------------------------------------------------
# pipeline stages


def build_field(cfg: ExperimentConfig) -> CoefficientField:
    params = dict(cfg.field)
    family = params.pop("family")
    if "psi" in params and isinstance(params["psi"], dict):
        params["psi"] = PsiSpec.from_dict(params["psi"])
    try:
        fld = make_test_coefficient(family, T=cfg.T, **params)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"field.{family}", f"bad parameters: {exc}") from None
    except ValueError as exc:
        raise ConfigError("field", str(exc)) from None
    if cfg.certificate is not None:
        try:
            mod = ModulusSpec.from_dict(cfg.certificate["modulus"])
            nu = BlowupSpec.from_dict(cfg.certificate["blowup"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("certificate", str(exc)) from None
        est = estimate_regularity_constant(fld, mod, nu)
        cert = Certificate(est, mod, nu, mod.tau0, est, None, (1.0,))
        fld = dataclasses.replace(fld, certificate=cert)
    return fld


def resolve_model(cfg: ExperimentConfig, fld: CoefficientField) -> tuple:
    """Exponent model for the fit and the analytic M (``None`` when unavailable)."""
    kernel = MollifierKernel(cfg.kernel)
    try:
        analytic = analytic_model(fld, kernel)
    except ValueError:
        analytic = None
    kind = cfg.model.kind
    if kind == "auto":
        if analytic is None:
            raise ConfigError("model.kind", "no model matches the certificate; choose one")
        return analytic, analytic.M
    if kind == "gevrey":
        model = ExponentModel("gevrey", 0.0, cfg.model.p, cfg.model.alpha, tau1=tau1(fld))
    else:
        psi = fld.certificate.blowup.psi if fld.certificate is not None else None
        model = ExponentModel("log_psi", 0.0, psi=psi, tau1=tau1(fld))
    if analytic is not None and analytic.kind == model.kind:
        return model.with_M(analytic.M), analytic.M
    return model, None


def validate(cfg: ExperimentConfig) -> dict:
    """Structural and mathematical checks; returns a report with ``passed``."""
    checks: dict[str, dict] = {}
    fld = build_field(cfg)
    hyp = check_hyperbolicity(fld)
    checks["hyperbolicity"] = {"passed": hyp.passed, "lower": hyp.lower, "upper": hyp.upper,
                               "message": hyp.message}
    cert = fld.certificate
    if cert is None:
        checks["certificate"] = {"passed": False, "message": "field carries no certificate"}
    else:
        rep = validate_modulus(cert.modulus)
        checks["modulus"] = {"passed": rep.passed, "label": cert.modulus.label(),
                             "message": rep.message}
        kappa = cert.blowup.kappa
        checks["blowup"] = {"passed": bool(kappa is not None and kappa > 0),
                            "label": cert.blowup.label(), "kappa": kappa}
        if cert.blowup.psi is not None:
            prep = validate_psi(cert.blowup.psi)
            checks["psi"] = {"passed": prep.passed, "label": cert.blowup.psi.label(),
                             "message": prep.message}
    try:
        model, _ = resolve_model(cfg, fld)
        ok = cfg.xi_grid.min >= model.xi_threshold * (1 - 1e-12)
        checks["xi_grid"] = {"passed": ok, "threshold": model.xi_threshold,
                             "message": "ok" if ok else
                             f"xi_grid.min below the model threshold {model.xi_threshold:.6g}"}
    except ConfigError as exc:
        checks["model"] = {"passed": False, "message": str(exc)}
    if cfg.initial_data.profile in ("constant", "gaussian"):
        t1 = tau1(fld)
        ok = cfg.xi_grid.min >= 1.0 / t1 * (1 - 1e-12)
        checks["initial_data"] = {"passed": ok, "message": "ok" if ok else
                                  f"polynomial decay check needs |xi| >= {1 / t1:.6g}"}
    passed = all(c["passed"] for c in checks.values())
    return {"config": cfg.name, "passed": passed, "checks": checks}


def certify(cfg: ExperimentConfig, fld: CoefficientField) -> dict:
    """Certificate, bound constants and the analytic exponent model."""
    from .mollify import bound_constants
    cert = fld.certificate
    if cert is None:
        raise ConfigError("field", "no regularity certificate available")
    c1, c2, kappa = bound_constants(fld, MollifierKernel(cfg.kernel))
    model, M = resolve_model(cfg, fld)
    return {"config": cfg.name, "field": fld.name, "lambda0": fld.lambda0,
            "Lambda0": fld.Lambda0, "t_min": fld.t_min, "tau1": tau1(fld),
            "certificate": cert.to_dict(), "modulus_label": cert.modulus.label(),
            "blowup_label": cert.blowup.label(), "C_prime": c1, "C_double_prime": c2,
            "kappa": kappa, "model": model.to_dict(), "analytic_M": M}


def mollify_verify(cfg: ExperimentConfig, fld: CoefficientField) -> BoundReport:
    eps, ts = default_bound_grids(fld, cfg.mollify_verify.n_eps, cfg.mollify_verify.n_t)
    return verify_prop23(fld, MollifierKernel(cfg.kernel), eps, ts)


@dataclass
class SweepOutcome:
    rows: list
    errors: list
    model: ExponentModel
    analytic_M: Optional[float]


def sweep(cfg: ExperimentConfig, fld: CoefficientField) -> SweepOutcome:
    """Per-xi energy ratios, Gronwall budgets and solution magnitudes."""
    model, M = resolve_model(cfg, fld)
    xis = cfg.xi_grid.values()
    t1 = tau1(fld)
    clamped = [bool(1.0 / x > t1) for x in xis]
    if any(clamped):
        log.info("eps clamp binds for %d grid points (tau1=%.6g)", sum(clamped), t1)
    settings = SweepSettings(cfg.tolerances.rtol, cfg.tolerances.atol,
                             cfg.tolerances.gronwall, cfg.kernel)
    raw = run_sweep(fld, xis, model, settings, cfg.workers)
    log_data = cfg.initial_data.log_magnitude(xis)
    shape = model.shape(np.maximum(xis, model.xi_threshold))
    rows, errors = [], []
    for r, cl, ld, sh in zip(raw, clamped, log_data, shape):
        if r.error:
            errors.append({"xi": r.xi, "error": r.error})
            continue
        y = getattr(r, cfg.fit.quantity)
        model_exp = M * sh if M is not None and r.xi >= model.xi_threshold else math.nan
        rows.append({"xi": r.xi, "eps": r.eps, "eps_clamped": cl, "E0": r.E0, "ET": r.ET,
                     "log_ratio": r.log_ratio, "gronwall_total": r.gronwall_total,
                     "model_exponent": model_exp, "ratio": y / sh,
                     "log_data": float(ld), "log_solution": r.log_state_T + float(ld),
                     "gronwall_dominates": bool(r.log_ratio <= r.gronwall_total + GRONWALL_SLACK),
                     "within_model": bool(r.gronwall_total <= model_exp)
                     if math.isfinite(model_exp) else False})
    return SweepOutcome(rows, errors, model, M)


@dataclass
class Analysis:
    fit: GrowthFit
    data_decay: DecayProfile
    solution_decay: DecayProfile
    report: Optional[Classification]


def analyse(cfg: ExperimentConfig, fld: CoefficientField, outcome: SweepOutcome) -> Analysis:
    """Growth fit, decay profiles and the classification report."""
    rows = outcome.rows
    xi = np.array([r["xi"] for r in rows])
    y = np.array([r[cfg.fit.quantity] for r in rows])
    fit = fit_growth((xi, y), outcome.model, cfg.fit.slack, cfg.fit.floor)
    ld = np.array([r["log_data"] for r in rows])
    ls = np.array([r["log_solution"] for r in rows])
    if cfg.initial_data.profile == "gevrey_decay":
        kw = {"kind": "gevrey", "sigma": cfg.initial_data.sigma}
    else:
        kw = {"kind": "polynomial"}
    data = check_decay(xi, log_magnitude=ld, **kw)
    sol = check_decay(xi, log_magnitude=ls, xi_min=10.0, **kw)
    report = classify(fit, data) if fit.consistent else None
    return Analysis(fit, data, sol, report)


def analysis_report(cfg: ExperimentConfig, outcome: SweepOutcome, an: Analysis) -> dict:
    out = {"config": cfg.name, "fit": an.fit.to_dict(), "analytic_M": outcome.analytic_M,
           "data_decay": an.data_decay.to_dict(), "solution_decay": an.solution_decay.to_dict(),
           "sweep_errors": len(outcome.errors)}
    if an.report is None:
        out["classification"] = None
        out["note"] = "fit inconsistent with the model: no well-posedness claim"
    else:
        out["classification"] = an.report.to_dict()
    return out


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "null"
        if math.isinf(f):
            return '"inf"' if f > 0 else '"-inf"'
        return format(f, ".17g")
    return json.dumps(v)


def emit(rows: Sequence, columns: Sequence[str], path, fmt: str = "csv") -> Path:
    """Write a table of mappings or tuples in a fixed column order.

    Floats carry 17 significant digits; booleans are written as 0/1 in CSV
    and true/false in JSON lines. An empty table raises ``ValueError`` and
    creates no file.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to emit")
    recs = [r if isinstance(r, dict) else dict(zip(columns, r)) for r in rows]
    if fmt == "csv":
        lines = [",".join(columns)]
        lines += [",".join(_fmt(r[c]) for c in columns) for r in recs]
    else:
        lines = ["{" + ", ".join(f'"{c}": {_json_value(r[c])}' for c in columns) + "}"
                 for r in recs]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_table(path, fmt: Optional[str] = None) -> list:
    """Parse a table written by :func:`emit` back into dicts of floats."""
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix == ".jsonl" else "csv")
    text = path.read_text().splitlines()
    if fmt == "jsonl":
        out = []
        for line in text:
            rec = json.loads(line)
            out.append({k: (math.nan if v is None else float(v)) for k, v in rec.items()})
        return out
    head = text[0].split(",")
    return [{h: float(v) for h, v in zip(head, line.split(","))} for line in text[1:]]


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return None if math.isnan(f) else ("inf" if f == math.inf else
                                           "-inf" if f == -math.inf else f)
    return obj


def write_report(data: dict, path) -> Path:
    """Deterministic JSON document: sorted keys, no timestamps."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True,
                                   default=_json_default) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


# ---------------------------------------------------------------------------
# orchestration


@dataclass
class ExperimentResult:
    """Outputs of :func:`run_experiment`; ``status`` is 0, 1 or 2."""

    config: ExperimentConfig
    status: int = 0
    files: list = field(default_factory=list)
    validation: Optional[dict] = None
    certificate: Optional[dict] = None
    bounds: Optional[BoundReport] = None
    sweep: Optional[SweepOutcome] = None
    analysis: Optional[Analysis] = None
    messages: list = field(default_factory=list)


def run_experiment(cfg: ExperimentConfig, stages: Sequence[str] = STAGES,
                   out_dir=None) -> ExperimentResult:
    """Run the requested stages in pipeline order and write their outputs.

    Validation failure stops the run with status 1. Failed checks or failed
    sweep rows give status 2; completed rows are still written together with
    an error manifest.
    """
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}")
    out = Path(out_dir) if out_dir is not None else output_dir(cfg)
    fmt = cfg.outputs.format
    res = ExperimentResult(cfg)

    res.validation = validate(cfg)
    if "validate" in stages:
        res.files.append(write_report(res.validation, out / "validation.json"))
    if not res.validation["passed"]:
        res.status = 1
        res.messages.append("validation failed")
        return res
    fld = build_field(cfg)

    if "certify" in stages:
        res.certificate = certify(cfg, fld)
        res.files.append(write_report(res.certificate, out / "certificate.json"))

    if "mollify-verify" in stages:
        rep = mollify_verify(cfg, fld)
        res.bounds = rep
        rows = [dict(zip(REPORT_COLUMNS, r)) for r in rep.rows()]
        res.files.append(emit(rows, REPORT_COLUMNS, out / f"bounds.{fmt}", fmt))
        res.files.append(write_report({"config": cfg.name, **rep.summary()},
                                      out / "bounds_summary.json"))
        if not rep.passed:
            res.status = 2
            res.messages.append(f"approximation bounds fail at "
                                f"{(1 - rep.pass_fraction) * 100:.3g}% of the grid")

    if "sweep" in stages or "classify" in stages:
        outcome = sweep(cfg, fld)
        res.sweep = outcome
        if outcome.errors:
            res.status = 2
            res.messages.append(f"{len(outcome.errors)} sweep rows failed")
            res.files.append(write_report({"config": cfg.name, "errors": outcome.errors},
                                          out / "errors.json"))
        if not outcome.rows:
            res.status = 2
            res.messages.append("no sweep rows completed")
            return res
        if "sweep" in stages:
            res.files.append(emit(outcome.rows, RESULT_COLUMNS, out / f"sweep.{fmt}", fmt))

    if "classify" in stages:
        try:
            an = analyse(cfg, fld, res.sweep)
        except ValueError as exc:
            res.status = 2
            res.messages.append(f"analysis refused: {exc}")
            return res
        res.analysis = an
        res.files.append(emit(an.fit.rows(), FIT_COLUMNS, out / f"fit.{fmt}", fmt))
        res.files.append(write_report(analysis_report(cfg, res.sweep, an),
                                      out / "classification.json"))
        if an.report is None:
            res.status = 2
            res.messages.append("growth fit inconsistent with the model")
    return res


__all__ = ["ConfigError", "NumericalFailure", "OutputError", "ExperimentConfig", "XiGrid",
           "InitialData", "Tolerances", "ModelChoice", "FitSettings", "VerifyGrid", "Outputs",
           "RESULT_COLUMNS", "load_config", "bundled_configs", "output_dir", "build_field",
           "resolve_model", "validate", "certify", "mollify_verify", "sweep", "analyse",
           "emit", "read_table", "write_report", "run_experiment", "ExperimentResult",
           "DomainError", "IntegrationError", "QuadratureError", "coupling_eps"]
