"""Strict parser for model specification files and configuration lists.

Model files hold ``key = value`` lines (``#`` starts a comment)::

    k = 1.0
    mu = 0.0
    F_DC = 0.2
    F_AC = 0.0
    nu0 = 1.0
    p = 5
    q = 8
    V_series = -0.025330295910584444, 0
    W_series = 0, 0, 0.5

``V_series`` lists ``cos, sin`` coefficient pairs for harmonics ``m = 1, 2, ...``
of the on-site shape (``V = k * shape``); alternatively tokens ``m:cos:sin`` name
the harmonic explicitly. ``W_series`` lists polynomial coefficients in powers of
``(spacing - mu)``, optionally followed by ``;`` and ``cos, sin`` pairs of a
trigonometric part. ``delta`` (convexity floor) is also accepted. Any other key
is an error.
"""
from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path

from .model import Forcing, ModelError, ModelSpec, PeriodicConfiguration, TrigSeries

__all__ = ["parse_model", "load_model", "parse_configurations", "load_configurations", "ModelFile"]

_KEYS = {"k", "mu", "F_DC", "F_AC", "nu0", "p", "q", "W_series", "V_series", "delta"}


class ModelFile:
    """Parsed model file: the model plus the optional ``p, q`` type."""

    def __init__(self, spec: ModelSpec, p: int | None = None, q: int | None = None):
        self.spec = spec
        self.p = p
        self.q = q

    @property
    def rho(self) -> Fraction | None:
        if self.p is None or self.q is None:
            return None
        return Fraction(self.p, self.q)


def _floats(text, key):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            raise ModelError(f"{key}: {tok!r} is not a number") from None
        if not math.isfinite(v):
            raise ModelError(f"{key}: coefficients must be finite")
        out.append(v)
    return out


def _trig(text, key) -> TrigSeries:
    toks = [t.strip() for t in text.split(",") if t.strip()]
    if toks and all(":" in t for t in toks):
        coef = {}
        for t in toks:
            parts = t.split(":")
            if len(parts) != 3:
                raise ModelError(f"{key}: expected m:cos:sin, got {t!r}")
            try:
                m = Fraction(parts[0])
            except ValueError:
                raise ModelError(f"{key}: bad harmonic {parts[0]!r}") from None
            if m.denominator != 1 or m < 1:
                raise ModelError(f"{key}: only integer frequencies m >= 1 are allowed, got {parts[0]}")
            coef[int(m)] = tuple(_floats(",".join(parts[1:]), key))
        n = max(coef)
        cos = [coef.get(m, (0.0, 0.0))[0] for m in range(1, n + 1)]
        sin = [coef.get(m, (0.0, 0.0))[1] for m in range(1, n + 1)]
        return TrigSeries(tuple(cos), tuple(sin))
    if any(":" in t for t in toks):
        raise ModelError(f"{key}: mixed m:cos:sin and plain tokens")
    vals = _floats(text, key)
    if len(vals) % 2:
        raise ModelError(f"{key}: expected cos, sin pairs (even count), got {len(vals)} values")
    return TrigSeries(tuple(vals[0::2]), tuple(vals[1::2]))


def parse_model(text: str) -> ModelFile:
    """Parse model-file text.

    Raises
    ------
    ModelError
        On unknown or duplicate keys, malformed values, or an invalid model.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelError(f"line {lineno}: expected key = value")
        key, val = (a.strip() for a in line.split("=", 1))
        if key not in _KEYS:
            raise ModelError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ModelError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = val

    def num(key, default):
        if key not in raw:
            return default
        v = _floats(raw[key], key)
        if len(v) != 1:
            raise ModelError(f"{key}: expected a single number")
        return v[0]

    def integer(key):
        if key not in raw:
            return None
        v = num(key, None)
        if v != int(v):
            raise ModelError(f"{key}: expected an integer")
        return int(v)

    kw = {}
    if "V_series" in raw:
        kw["v_shape"] = _trig(raw["V_series"], "V_series")
    if "W_series" in raw:
        poly, _, trig = raw["W_series"].partition(";")
        kw["w_poly"] = tuple(_floats(poly, "W_series"))
        if not kw["w_poly"]:
            raise ModelError("W_series: needs at least one polynomial coefficient")
        if trig.strip():
            kw["w_trig"] = _trig(trig, "W_series")
    if "delta" in raw:
        kw["delta"] = num("delta", None)
    forcing = Forcing(num("F_DC", 0.0), num("F_AC", 0.0), num("nu0", 1.0))
    spec = ModelSpec(k=num("k", 1.0), mu=num("mu", 0.0), forcing=forcing, **kw)
    p, q = integer("p"), integer("q")
    if (p is None) != (q is None):
        raise ModelError("p and q must be given together")
    if q is not None and q < 1:
        raise ModelError("q must be >= 1")
    return ModelFile(spec, p, q)


def load_model(path) -> ModelFile:
    return parse_model(Path(path).read_text())


def parse_configurations(text: str) -> list[PeriodicConfiguration]:
    """One configuration per line: ``p q u0 u1 ... u_{q-1}``."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        try:
            p, q = int(toks[0]), int(toks[1])
            base = [float(t) for t in toks[2:]]
        except (ValueError, IndexError):
            raise ModelError(f"line {lineno}: expected 'p q u0 ... u_(q-1)'") from None
        if q < 1 or len(base) != q:
            raise ModelError(f"line {lineno}: q={q} but {len(base)} positions")
        out.append(PeriodicConfiguration(base, p))
    if not out:
        raise ModelError("no configurations found")
    return out


def load_configurations(path) -> list[PeriodicConfiguration]:
    return parse_configurations(Path(path).read_text())
