"""Sampling sets in the time-frequency plane and validators for their hypotheses.

Density and divergence questions are decided symbolically from sequence
descriptors; finite prefixes never decide an infinite property. Explicit lists
yield ``indeterminate`` plus empirical diagnostics.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .signals import CompactClassSpec, SisSpec
from .transforms import rotate_points

KINDS = ("affine", "half_line", "power", "explicit")


@dataclass(frozen=True)
class SequenceDescriptor:
    """Symbolic real sequence.

    * ``affine``: ``a Z + b`` (params ``a != 0``, ``b``)
    * ``half_line``: ``s N + a`` with ``N = {0, 1, ...}`` (params ``s = +-1``, integer ``a``)
    * ``power``: ``{0} U {+-n^p : n >= 1}`` (param ``p > 0``)
    * ``explicit``: a sorted list of distinct reals

    ``truncation`` bounds the index magnitude of materialized elements.
    """

    kind: str
    params: tuple = ()
    truncation: int = 16

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "affine":
            if len(p) != 2 or p[0] == 0:
                raise ValueError("affine needs (a, b) with a != 0")
        elif self.kind == "half_line":
            if len(p) != 2 or abs(p[0]) != 1 or p[1] != int(p[1]):
                raise ValueError("half_line needs (s, a) with s = +-1 and integer a")
        elif self.kind == "power":
            if len(p) != 1 or not p[0] > 0:
                raise ValueError("power needs (p,) with p > 0")
        else:
            arr = np.asarray(p)
            if arr.size == 0:
                raise ValueError("empty sequence")
            if np.any(np.diff(arr) <= 0):
                raise ValueError("explicit list must be sorted and distinct")
        if self.truncation < 0:
            raise ValueError("truncation must be nonnegative")

    # constructors
    @classmethod
    def affine(cls, a: float, b: float = 0.0, truncation: int = 16):
        return cls("affine", (a, b), truncation)

    @classmethod
    def half_line(cls, s: int, a: int = 0, truncation: int = 16):
        return cls("half_line", (s, a), truncation)

    @classmethod
    def power(cls, p: float, truncation: int = 16):
        return cls("power", (p,), truncation)

    @classmethod
    def explicit(cls, values, truncation: int | None = None):
        vals = tuple(sorted(float(v) for v in values))
        return cls("explicit", vals, len(vals) if truncation is None else truncation)

    def with_truncation(self, n: int) -> "SequenceDescriptor":
        return SequenceDescriptor(self.kind, self.params, n)

    def negated(self) -> "SequenceDescriptor":
        """The sequence ``-lambda``."""
        if self.kind in ("affine", "half_line"):
            return SequenceDescriptor(self.kind, (-self.params[0], -self.params[1]), self.truncation)
        if self.kind == "power":
            return self
        return SequenceDescriptor("explicit", tuple(sorted(-v for v in self.params)), self.truncation)

    @property
    def step(self) -> float | None:
        if self.kind == "affine":
            return abs(self.params[0])
        if self.kind == "half_line":
            return 1.0
        return None

    def indices(self) -> np.ndarray:
        n = self.truncation
        if self.kind in ("affine", "power"):
            return np.arange(-n, n + 1)
        if self.kind == "half_line":
            return np.arange(0, n + 1)
        return np.arange(min(n, len(self.params)))

    def materialize(self) -> np.ndarray:
        """Elements with index magnitude ``<= truncation``, in index order."""
        idx = self.indices()
        if self.kind == "affine":
            a, b = self.params
            return a * idx + b
        if self.kind == "half_line":
            s, a = self.params
            return s * idx + a
        if self.kind == "power":
            p = self.params[0]
            return np.sign(idx) * np.abs(idx).astype(float) ** p
        return np.asarray(self.params)[idx]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params), "truncation": self.truncation}

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceDescriptor":
        return cls(d["kind"], tuple(d.get("params", ())), int(d.get("truncation", 16)))


@dataclass(frozen=True)
class DeclaredReal:
    """A real constant together with what is known about its arithmetic nature.

    Irrationality cannot be read off a float, so configs declare it:
    ``rational=(p, q)`` or ``irrational=True`` (optionally with a symbol such
    as ``"sqrt2"``).
    """

    value: float
    rational: tuple[int, int] | None = None
    irrational: bool = False
    symbol: str | None = None

    def __post_init__(self):
        if self.rational is not None and self.irrational:
            raise ValueError("a constant cannot be declared both rational and irrational")
        if self.rational is not None:
            p, q = self.rational
            if q == 0:
                raise ValueError("rational declaration with zero denominator")
            object.__setattr__(self, "rational", (int(p), int(q)))

    @property
    def fraction(self) -> Fraction | None:
        return Fraction(*self.rational) if self.rational else None

    @classmethod
    def of(cls, beta) -> "DeclaredReal":
        return beta if isinstance(beta, DeclaredReal) else cls(float(beta))


@dataclass(frozen=True, eq=False)
class SamplingSet:
    """Truncated product ``x_seq x w_seq``, optionally rotated by ``R_theta``.

    ``points[i] = R_theta (x_seq[ix[i]], w_seq[iw[i]])``, ordered
    lexicographically in ``(ix, iw)``.
    """

    x_seq: SequenceDescriptor
    w_seq: SequenceDescriptor
    theta: float = 0.0
    points: np.ndarray = field(init=False, repr=False)
    ix: np.ndarray = field(init=False, repr=False)
    iw: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        xv = self.x_seq.materialize()
        wv = self.w_seq.materialize()
        if xv.size == 0 or wv.size == 0:
            raise ValueError("empty sequence")
        ix, iw = np.meshgrid(np.arange(xv.size), np.arange(wv.size), indexing="ij")
        ix, iw = ix.ravel(), iw.ravel()
        base = np.column_stack([xv[ix], wv[iw]])
        pts = rotate_points(base, self.theta)
        for name, val in (("points", pts), ("ix", ix), ("iw", iw)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def x_values(self) -> np.ndarray:
        return self.x_seq.materialize()

    @property
    def w_values(self) -> np.ndarray:
        return self.w_seq.materialize()

    def unrotated(self) -> np.ndarray:
        """Points before rotation, exactly as materialized from the descriptors."""
        return np.column_stack([self.x_values[self.ix], self.w_values[self.iw]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "omega"])
        for x, om in self.points:
            w.writerow([repr(float(x)), repr(float(om))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"x_seq": self.x_seq.to_dict(), "w_seq": self.w_seq.to_dict(), "theta": self.theta}

    def to_json(self) -> str:
        d = self.to_dict()
        d["schema_version"] = 1
        d["points"] = self.points.tolist()
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingSet":
        return cls(SequenceDescriptor.from_dict(d["x_seq"]), SequenceDescriptor.from_dict(d["w_seq"]),
                   float(d.get("theta", 0.0)))


def build_sampling_set(x: SequenceDescriptor, w: SequenceDescriptor, theta: float = 0.0,
                       N: int | None = None) -> SamplingSet:
    """Materialize ``R_theta (x x w)``; ``N`` overrides both truncations."""
    if N is not None:
        if N < 1:
            raise ValueError("truncation N must be >= 1")
        x, w = x.with_truncation(N), w.with_truncation(N)
    return SamplingSet(x, w, float(getattr(theta, "theta", theta)))


# densities -----------------------------------------------------------------

@dataclass(frozen=True)
class DensityEstimate:
    value: float
    exact: bool
    window: float | None = None
    extent: tuple[float, float] | None = None
    note: str = ""


def windowed_lower_density(values, r: float) -> float:
    """``min_a #(values in [a, a+r)) / r`` over windows inside the materialized extent."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0 or v[-1] - v[0] < r:
        return 0.0 if v.size == 0 else v.size / r
    # the minimum over sliding windows [a, a + r) is attained at the left end
    # or with a just after a point v_i, where the count is #(v_i, v_i + r]
    first = np.searchsorted(v, v[0] + r, side="left")
    inner = v[v + r <= v[-1]]
    counts = np.searchsorted(v, inner + r, side="right") - np.searchsorted(v, inner, side="right")
    return float(min(first, counts.min() if counts.size else first)) / r


def lower_beurling_density(seq: SequenceDescriptor, window: float | None = None) -> DensityEstimate:
    """Lower Beurling density, exact for symbolic kinds.

    Half-lines report the density on their supporting side (``1/|s| = 1``);
    ``explicit`` lists get a windowed lower estimate over their extent.
    """
    if seq.kind == "affine":
        return DensityEstimate(1.0 / abs(seq.params[0]), True)
    if seq.kind == "half_line":
        return DensityEstimate(1.0, True, note="density on the supporting half-line")
    if seq.kind == "power":
        p = seq.params[0]
        val = math.inf if p < 1 else (1.0 if p == 1 else 0.0)
        return DensityEstimate(val, True)
    vals = seq.materialize()
    r = window if window is not None else max((vals[-1] - vals[0]) / 4, 1e-12)
    return DensityEstimate(windowed_lower_density(vals, r), False, r, (float(vals[0]), float(vals[-1])),
                           note="windowed estimate of a finite list")


# divergence of reciprocal series --------------------------------------------

DIVERGES, CONVERGES, INDETERMINATE = "diverges", "converges", "indeterminate"


def reciprocal_series_check(seq: SequenceDescriptor, eps: float = 0.0) -> str:
    """Decide divergence of ``sum' |lambda_n|^{-s}`` (zero terms omitted).

    ``eps == 0``: the Muntz/Zalik exponent ``s = 1``. ``eps > 0``: the
    generalized series with exponent ``s = 2 + eps``.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    s = 1.0 if eps == 0 else 2.0 + eps
    if seq.kind in ("affine", "half_line"):
        # |a n + b|^{-s} ~ |a n|^{-s}
        return DIVERGES if s <= 1 else CONVERGES
    if seq.kind == "power":
        return DIVERGES if seq.params[0] * s <= 1 else CONVERGES
    return INDETERMINATE


# density modulo 2/beta ------------------------------------------------------

@dataclass(frozen=True)
class WeylResult:
    verdict: str                 # dense | not_dense | empirical
    period: float
    max_gap: float | None = None
    fill_ratio: float | None = None
    residues: tuple | None = None
    detail: str = ""


def _is_integer(v: float) -> bool:
    return float(v).is_integer()


def weyl_density_check(seq: SequenceDescriptor, beta, rational_hint=None, N: int | None = None) -> WeylResult:
    """Is ``(b_n mod 2/beta)`` dense in ``[0, 2/beta]``?

    A rational ``beta = p/q`` with an integer affine sequence leaves finitely
    many residues; a declared-irrational ``beta`` with an integer affine
    sequence is dense (equidistribution). Anything else is measured: ``N``
    terms reduced mod ``2/beta``, largest gap and ``fill_ratio = 1 -
    maxgap * beta / 2``.
    """
    decl = DeclaredReal.of(beta)
    if rational_hint is not None:
        decl = DeclaredReal(decl.value, rational=tuple(rational_hint))
    if not decl.value > 0:
        raise ValueError("beta must be positive")
    period = 2.0 / decl.value
    integer_affine = seq.kind == "affine" and _is_integer(seq.params[0]) and _is_integer(seq.params[1])
    if integer_affine and decl.rational is not None:
        b = decl.fraction
        per = Fraction(2) / b
        # a n + c (mod 2q/p): residues repeat with period dividing the numerator of per
        a, c = int(seq.params[0]), int(seq.params[1])
        count = per.numerator
        res = sorted({float((Fraction(a * n + c)) % per) for n in range(count)})
        return WeylResult("not_dense", float(per), residues=tuple(res),
                          detail=f"beta = {b} is rational: {len(res)} residues")
    if integer_affine and decl.irrational:
        return WeylResult("dense", period, detail="integer progression with irrational beta")
    seq_n = seq if N is None else seq.with_truncation(N)
    vals = np.mod(seq_n.materialize(), period)
    vals = np.sort(vals)
    gaps = np.diff(np.concatenate([vals, [vals[0] + period]]))
    max_gap = float(gaps.max())
    return WeylResult("empirical", period, max_gap=max_gap, fill_ratio=1.0 - max_gap / period,
                      detail=f"{vals.size} residues measured")


# validation ----------------------------------------------------------------

PASS, FAIL, UNKNOWN = "pass", "fail", "indeterminate"


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    verdict: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    theorem: str
    checks: tuple[HypothesisCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.verdict == PASS for c in self.checks)

    @property
    def failed(self) -> bool:
        return any(c.verdict == FAIL for c in self.checks)

    @property
    def verdicts(self) -> tuple[str, ...]:
        return tuple(c.verdict for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "passed": self.passed,
            "checks": [{"name": c.name, "verdict": c.verdict, "detail": c.detail} for c in self.checks],
        }

    def table(self) -> str:
        width = max(len(c.name) for c in self.checks) if self.checks else 10
        lines = [f"{self.theorem}: {'all hypotheses met' if self.passed else 'hypotheses not met'}"]
        for c in self.checks:
            lines.append(f"  {c.name:<{width}}  {c.verdict:<13}  {c.detail}")
        return "\n".join(lines)


def validate_uniqueness_config(cls, X: SamplingSet, beta=None) -> ValidationReport:
    """Check the sufficient hypotheses for uniqueness on ``X`` (before rotation).

    Compact class ``c``: the x-nodes must have a divergent reciprocal series and
    the frequency nodes must be an affine progression of density ``>= 2c``
    (Shannon); general uniqueness sets are reported indeterminate.
    Shift-invariant class: ``D^-(x-nodes) > 2/beta`` and the frequency nodes
    dense modulo ``2/beta``. ``beta`` may be a :class:`DeclaredReal`; without a
    declaration the arithmetic hypothesis can only be measured.
    """
    checks = []
    if isinstance(cls, CompactClassSpec):
        div = reciprocal_series_check(X.x_seq, 0.0)
        verdict = {DIVERGES: PASS, CONVERGES: FAIL}.get(div, UNKNOWN)
        checks.append(HypothesisCheck("x_reciprocal_series_diverges", verdict, f"sum' 1/|a_n| {div}"))
        need = 2 * cls.c
        if X.w_seq.kind == "affine":
            d = lower_beurling_density(X.w_seq).value
            verdict = PASS if d >= need * (1 - 1e-12) else FAIL
            checks.append(HypothesisCheck("w_shannon_density", verdict, f"density {d:.6g} vs required {need:.6g}"))
        else:
            checks.append(HypothesisCheck("w_shannon_density", UNKNOWN,
                                          f"{X.w_seq.kind} frequency nodes: uniqueness for PW_{need:g} not decided"))
        return ValidationReport("compact_general" if X.x_seq.kind != "affine" or X.w_seq.kind != "affine" else "compact_lattice",
                                tuple(checks))
    if isinstance(cls, SisSpec):
        decl = DeclaredReal.of(beta if beta is not None else cls.beta)
        if abs(decl.value - cls.beta) > 1e-12 * cls.beta:
            raise ValueError("declared beta does not match the class step")
        need = 2.0 / decl.value
        dens = lower_beurling_density(X.x_seq)
        if dens.exact:
            verdict = PASS if dens.value > need * (1 + 1e-12) else FAIL
        else:
            verdict = UNKNOWN
        checks.append(HypothesisCheck("x_lower_density", verdict, f"D- = {dens.value:.6g} vs > {need:.6g}"))
        wr = weyl_density_check(X.w_seq, decl)
        verdict = {"dense": PASS, "not_dense": FAIL}.get(wr.verdict, UNKNOWN)
        detail = wr.detail if wr.verdict != "empirical" else f"fill ratio {wr.fill_ratio:.4f} ({wr.detail})"
        checks.append(HypothesisCheck("w_dense_mod_2_over_beta", verdict, detail))
        theorem = "sis_lattice" if X.w_seq.kind == "affine" and X.w_seq.params == (1.0, 0.0) else "sis_general"
        return ValidationReport(theorem, tuple(checks))
    raise TypeError(f"unsupported class {type(cls).__name__}")
