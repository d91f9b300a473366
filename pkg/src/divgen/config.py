"""Family specifications from strings or YAML/JSON files.

String forms::

    bernoulli | bernoulli-malpha | bernoulli-balpha
    student:nu=3 | normal:sigma=2
    <any of the above>@<lam>        (a member of the family)
    path/to/family.yaml[@<lam>]

A file holds a mapping. Built-ins use ``family: <name>`` plus parameters.
Custom finite families use ``family: custom`` with ``values``, a list of
``[value, weight expression in lam]`` rows, and optional ``bounds``.
"""

from __future__ import annotations

import json
import os
from fractions import Fraction

import sympy as sp
import yaml

from .errors import DomainError, UsageError
from .families import (
    LAM,
    ParametricFamily,
    make_bernoulli_balpha,
    make_bernoulli_exponential,
    make_bernoulli_malpha,
    make_finite_family,
    make_normal_location,
    make_student_balpha,
    normalization_check,
)

__all__ = ["parse_family", "load_family_file", "family_from_mapping", "default_glf", "BUILTINS"]

BUILTINS = ("bernoulli", "bernoulli-malpha", "bernoulli-balpha", "student", "normal")


def _parse_params(text: str) -> dict:
    params = {}
    for item in filter(None, text.split(",")):
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"parameter {key!r} must be numeric, got {value!r}") from None
    return params


def _builtin(name: str, params: dict) -> ParametricFamily:
    if name == "bernoulli":
        return make_bernoulli_exponential()
    if name == "bernoulli-malpha":
        return make_bernoulli_malpha()
    if name == "bernoulli-balpha":
        return make_bernoulli_balpha()
    if name == "student":
        if "nu" not in params:
            raise UsageError("student family needs nu, e.g. student:nu=3")
        return make_student_balpha(params["nu"])
    if name == "normal":
        return make_normal_location(params.get("sigma", 1.0))
    raise UsageError(f"unknown family {name!r}; built-ins are {', '.join(BUILTINS)}")


def _parse_lambda(text: str):
    try:
        return Fraction(text) if "/" in text else float(text)
    except ValueError:
        raise UsageError(f"invalid parameter value {text!r}") from None


def parse_family(spec: str, **params) -> tuple[ParametricFamily, float | None]:
    """Return ``(family, lam)``; ``lam`` is None unless ``@lam`` is given."""
    lam = None
    if "@" in spec:
        spec, lam_text = spec.rsplit("@", 1)
        lam = _parse_lambda(lam_text)
    if spec.endswith((".yaml", ".yml", ".json")) or os.path.isfile(spec):
        fam = load_family_file(spec)
    else:
        name, _, rest = spec.partition(":")
        merged = {**{k: v for k, v in params.items() if v is not None}, **_parse_params(rest)}
        fam = _builtin(name, merged)
    if lam is not None:
        fam.check_param(float(lam))
    return fam, lam


def load_family_file(path: str) -> ParametricFamily:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read family file {path}: {exc}") from None
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a mapping at the top level")
    return family_from_mapping(data)


def family_from_mapping(data: dict, *, tol: float = 1e-10) -> ParametricFamily:
    """Build a family from a parsed configuration mapping.

    Custom tables are checked for normalization, symbolically when possible
    and otherwise on a 9-point grid.
    """
    kind = data.get("family")
    if kind is None:
        raise UsageError("configuration needs a 'family' key")
    if kind != "custom":
        params = {k: float(v) for k, v in data.items() if k != "family"}
        return _builtin(kind, params)
    rows = data.get("values")
    if not rows:
        raise UsageError("custom family needs a non-empty 'values' table")
    try:
        table = [(row[0], str(row[1])) for row in rows]
    except (TypeError, IndexError):
        raise UsageError("each row of 'values' must be [value, weight expression]") from None
    bounds = tuple(data.get("bounds", (0.0, 1.0)))
    try:
        fam = make_finite_family(data.get("name", "custom"), table, bounds)
    except (sp.SympifyError, TypeError) as exc:
        raise UsageError(f"invalid weight expression: {exc}") from None
    total = sp.simplify(sp.Add(*[fam.exact_pmf(v) for v in fam.support.values]))
    if LAM in total.free_symbols or total != 1:
        report = normalization_check(fam, fam.grid(9), tol)
        if not report.ok:
            raise DomainError(f"custom family is not normalized (max error {report.max_error:.3g})")
    return fam


def default_glf(fam: ParametricFamily) -> str:
    """``ldpd`` for M^(alpha), ``dpd`` for B^(alpha), ``log`` otherwise."""
    from .families import BAlphaFamily, MAlphaFamily

    if isinstance(fam, MAlphaFamily):
        return "ldpd"
    if isinstance(fam, BAlphaFamily):
        return "dpd"
    return "log"
