"""
Expected values from fitted GAMLSS bias models.

Two families are supported: the zero-and-one inflated Beta (``BEINF``)
used for bounded performance scores such as MF1, and the ``NORMAL``
family used for marker differences (prediction minus reference).
Coefficients come from a long-format CSV table; age enters only through
a precomputed additive spline contribution per distributional parameter.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

from .errors import ConfigError, InvalidInflation, MissingCovariate, SchemaError

__all__ = [
    "LINKS",
    "FAMILY_LINKS",
    "ParameterModel",
    "GamlssSpec",
    "CovariateProfile",
    "linear_predictor",
    "inverse_link",
    "expected_value",
    "predict",
    "load_gamlss_table",
    "bundled_table",
]

LINKS = ("logit", "log", "identity")
FAMILY_LINKS = {
    "BEINF": {"mu": "logit", "sigma": "logit", "nu": "log", "tau": "log"},
    "NORMAL": {"mu": "identity", "sigma": "log"},
}
REQUIRED = {"BEINF": ("mu", "sigma"), "NORMAL": ("mu", "sigma")}

_PARAM_ALIASES = {"μ": "mu", "σ": "sigma", "ν": "nu", "τ": "tau"}
_INTERCEPT = {"(intercept)", "intercept"}
# table term -> CovariateProfile attribute
_TERMS = {"gender": "gender_male", "ahi": "ahi_div10", "plmi": "plmi_div10"}


@dataclass(frozen=True)
class ParameterModel:
    """Additive predictor of one distributional parameter.

    ``excluded`` lists terms that the fitted model dropped; they are absent
    from ``coefficients`` rather than stored as zero.
    """

    name: str
    link: str
    intercept: float
    coefficients: Mapping[str, float] = field(default_factory=dict)
    spline_offset: float = 0.0
    excluded: tuple = ()

    def __post_init__(self):
        if self.link not in LINKS:
            raise SchemaError(f"unknown link {self.link!r}")


@dataclass(frozen=True)
class GamlssSpec:
    """Fitted model of one outcome.

    For ``BEINF`` the inflation parameters ``nu`` and ``tau`` may be left
    out, which stands for zero point mass at 0 and 1 respectively.
    """

    outcome: str
    family: str
    parameters: Mapping[str, ParameterModel]

    def __post_init__(self):
        if self.family not in FAMILY_LINKS:
            raise SchemaError(f"unknown family {self.family!r}")
        links = FAMILY_LINKS[self.family]
        for name, param in self.parameters.items():
            if name not in links:
                raise SchemaError(f"{self.family} has no parameter {name!r}")
            if param.link != links[name]:
                raise SchemaError(f"{self.family} {name} uses the {links[name]} link, not {param.link}")
        missing = [p for p in REQUIRED[self.family] if p not in self.parameters]
        if missing:
            raise SchemaError(f"outcome {self.outcome!r} lacks parameters {missing}")


@dataclass(frozen=True)
class CovariateProfile:
    """Subject covariates in model units.

    AHI and PLMI are divided by 10 and gender is 1 for male (female is the
    reference level). ``age_spline_contribution`` maps a parameter name to
    the value of the fitted age spline for this subject.
    """

    gender_male: int = 0
    ahi_div10: float = 0.0
    plmi_div10: float = 0.0
    age_spline_contribution: Mapping[str, float] = field(default_factory=dict)
    extra: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.gender_male not in (0, 1):
            raise ValueError("gender_male must be 0 or 1")
        if self.ahi_div10 < 0 or self.plmi_div10 < 0:
            raise ValueError("AHI and PLMI must be non-negative")

    @classmethod
    def from_clinical(cls, gender: str = "female", ahi: float = 0.0, plmi: float = 0.0, **kwargs):
        """Build a profile from raw AHI/PLMI (events per hour) and a gender string."""
        gender = gender.lower()
        if gender not in ("male", "female"):
            raise ValueError(f"gender must be 'male' or 'female', got {gender!r}")
        return cls(int(gender == "male"), ahi / 10.0, plmi / 10.0, **kwargs)

    def value(self, term: str) -> float:
        attr = _TERMS.get(term.lower())
        if attr is not None:
            return float(getattr(self, attr))
        if term in self.extra:
            return float(self.extra[term])
        raise MissingCovariate(term)


def linear_predictor(param: ParameterModel, profile: CovariateProfile) -> float:
    eta = param.intercept + param.spline_offset
    eta += float(profile.age_spline_contribution.get(param.name, 0.0))
    for term, coef in param.coefficients.items():
        eta += coef * profile.value(term)
    return eta


def inverse_link(link: str, eta: float) -> float:
    if link == "identity":
        return float(eta)
    if link == "log":
        return math.exp(eta)
    if link == "logit":
        # split on sign so exp never overflows
        if eta >= 0:
            return 1.0 / (1.0 + math.exp(-eta))
        e = math.exp(eta)
        return e / (1.0 + e)
    raise SchemaError(f"unknown link {link!r}")


def predict(spec: GamlssSpec, profile: CovariateProfile) -> dict:
    """Linear predictors, parameter values and expectation for one subject."""
    eta = {name: linear_predictor(p, profile) for name, p in spec.parameters.items()}
    values = {name: inverse_link(spec.parameters[name].link, e) for name, e in eta.items()}
    if spec.family == "NORMAL":
        expected = values["mu"]
    else:
        nu = values.get("nu", 0.0)
        tau = values.get("tau", 0.0)
        if nu + tau >= 1:
            raise InvalidInflation(f"nu + tau = {nu + tau} >= 1 for outcome {spec.outcome!r}")
        expected = tau + (1.0 - nu - tau) * values["mu"]
    return {"outcome": spec.outcome, "family": spec.family, "expected": expected,
            "eta": eta, "parameters": values}


def expected_value(spec: GamlssSpec, profile: CovariateProfile) -> float:
    """E[Y]: ``mu`` for NORMAL, ``tau + (1 - nu - tau) * mu`` for BEINF."""
    return predict(spec, profile)["expected"]


def _infer_family(params) -> str:
    return "BEINF" if {"nu", "tau"} & set(params) else "NORMAL"


def load_gamlss_table(text, model: str | None = None) -> dict[str, GamlssSpec]:
    """Parse a coefficient table into one :class:`GamlssSpec` per outcome.

    Parameters
    ----------
    text : str or bytes
        CSV with columns ``outcome, parameter, term, estimate`` and optional
        ``model``, ``family`` and ``link`` columns. A blank estimate means
        the term was excluded from the fitted model.
    model : str, optional
        Which model's rows to keep when the table has a ``model`` column
        with several values.

    Raises
    ------
    SchemaError
        On unknown parameters, families or links, malformed estimates,
        duplicate terms or a parameter without an intercept. The error
        carries the 1-based line number of the offending row.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise SchemaError("empty coefficient table")
    columns = {c.strip().lower() for c in reader.fieldnames}
    missing = {"outcome", "parameter", "term", "estimate"} - columns
    if missing:
        raise SchemaError(f"missing columns: {', '.join(sorted(missing))}", 1)

    raw: dict[str, dict] = {}
    models_seen = set()
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip().lower(): (v or "").strip() for k, v in row.items() if k is not None}
        if not any(row.values()):
            continue
        row_model = row.get("model", "")
        models_seen.add(row_model)
        if model is not None and row_model != model:
            continue
        outcome = row["outcome"]
        param = _PARAM_ALIASES.get(row["parameter"], row["parameter"].lower())
        if not outcome:
            raise SchemaError("empty outcome", lineno)
        if param not in ("mu", "sigma", "nu", "tau"):
            raise SchemaError(f"unknown parameter {row['parameter']!r}", lineno)
        entry = raw.setdefault(outcome, {"family": set(), "params": {}})
        family = row.get("family", "").upper()
        if family:
            if family not in FAMILY_LINKS:
                raise SchemaError(f"unknown family {row['family']!r}", lineno)
            entry["family"].add(family)
        link = row.get("link", "").lower()
        if link and link not in LINKS:
            raise SchemaError(f"unknown link {row['link']!r}", lineno)
        p = entry["params"].setdefault(param, {"intercept": None, "coef": {}, "excluded": [],
                                               "terms": set(), "link": set(), "line": lineno})
        if link:
            p["link"].add(link)
        term = row["term"]
        if term.lower() in p["terms"]:
            raise SchemaError(f"duplicate term {term!r} for {outcome}/{param}", lineno)
        p["terms"].add(term.lower())
        if row["estimate"] == "":
            if term.lower() in _INTERCEPT:
                raise SchemaError(f"blank intercept for {outcome}/{param}", lineno)
            p["excluded"].append(term)
            continue
        try:
            estimate = float(row["estimate"])
        except ValueError:
            raise SchemaError(f"estimate {row['estimate']!r} is not a number", lineno) from None
        if not math.isfinite(estimate):
            raise SchemaError("estimate must be finite", lineno)
        if term.lower() in _INTERCEPT:
            p["intercept"] = estimate
        elif term.lower() in ("age_spline", "spline_offset"):
            p["spline_offset"] = estimate
        else:
            p["coef"][term] = estimate

    if model is None and len(models_seen - {""}) > 1:
        raise SchemaError(f"table holds several models ({', '.join(sorted(models_seen))}); select one")
    if not raw:
        raise SchemaError("no coefficient rows" + (f" for model {model!r}" if model else ""))

    specs = {}
    for outcome in sorted(raw):
        entry = raw[outcome]
        if len(entry["family"]) > 1:
            raise SchemaError(f"outcome {outcome!r} declares several families")
        family = entry["family"].pop() if entry["family"] else _infer_family(entry["params"])
        params = {}
        for name in sorted(entry["params"]):
            p = entry["params"][name]
            if p["intercept"] is None:
                raise SchemaError(f"no intercept for {outcome}/{name}", p["line"])
            expected_link = FAMILY_LINKS[family].get(name)
            if expected_link is None:
                raise SchemaError(f"{family} has no parameter {name!r}", p["line"])
            if p["link"] and p["link"] != {expected_link}:
                raise SchemaError(f"{outcome}/{name} must use the {expected_link} link", p["line"])
            params[name] = ParameterModel(
                name=name,
                link=expected_link,
                intercept=p["intercept"],
                coefficients=dict(sorted(p["coef"].items())),
                spline_offset=p.get("spline_offset", 0.0),
                excluded=tuple(sorted(p["excluded"])),
            )
        specs[outcome] = GamlssSpec(outcome, family, params)
    return specs


def bundled_table(model: str = "E") -> dict[str, GamlssSpec]:
    """Coefficients of the four published ensemble bias models (E, E1, E2, E3)."""
    text = resources.files("hypnoeval.data").joinpath("ensemble_bias_coefficients.csv").read_text("utf-8")
    if model not in ("E", "E1", "E2", "E3"):
        raise ConfigError(f"unknown bundled model {model!r}")
    return load_gamlss_table(text, model=model)
