"""Batch experiments: forward checks, uniqueness probes, reconstructions, density reports.

Every runner takes an :class:`ExperimentConfig`, writes UTF-8 CSV/JSON into an
output directory and returns a :class:`RunResult` whose ``exit_code`` is 0
(success), 2 (sampling hypotheses not met) or 3 (numerical acceptance failed).
Outputs depend only on the config, so two runs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .reconstruction import (
    CompactConfig,
    RegConfig,
    ReconstructionError,
    SisConfig,
    SpectrogramSamples,
    periodic_gaussian_signal,
    reconstruct_compact,
    reconstruct_periodic_gaussian,
    reconstruct_sis,
    sample_sis,
    sample_spectrogram,
)
from .sampling import (
    DeclaredReal,
    SamplingSet,
    SequenceDescriptor,
    lower_beurling_density,
    reciprocal_series_check,
    validate_uniqueness_config,
    weyl_density_check,
)
from .signals import (
    CompactClassSpec,
    ComplexSignal,
    Grid,
    SisSpec,
    gaussian,
    random_in_class,
    relative_phase_distance,
    synthesize_sis,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3
SCHEMA_VERSION = 1
NOT_MET = "hypotheses not met"

SYMBOLS = {
    "sqrt2": math.sqrt(2.0),
    "sqrt3": math.sqrt(3.0),
    "sqrt5": math.sqrt(5.0),
    "pi": math.pi,
    "e": math.e,
    "golden": (1 + math.sqrt(5.0)) / 2,
}

ALL_CHECKS = ("gabor_closed_form", "sis_spectrogram", "frft_gaussian", "frft_group",
              "frft_rotation", "band_limit", "periodicity")

DEFAULT_TOL = {
    "gabor_closed_form": 1e-10,
    "sis_spectrogram": 1e-8,
    "frft_gaussian": 1e-8,
    "frft_group": 1e-7,
    "frft_rotation": 1e-7,
    "band_limit": 1e-9,
    "periodicity": 1e-9,
    "phase_equal": 1e-12,
}


class ConfigError(ValueError):
    pass


def _schema() -> dict:
    text = resources.files("gabor_lattice").joinpath("schema/experiment.schema.json").read_text("utf-8")
    return json.loads(text)


def parse_real(spec) -> DeclaredReal:
    """``1.5`` or ``{"value"|"symbol"|"rational": ..., "irrational": bool}``."""
    if isinstance(spec, (int, float)):
        return DeclaredReal(float(spec))
    sym = spec.get("symbol")
    rat = spec.get("rational")
    if "value" in spec:
        value = float(spec["value"])
    elif sym is not None:
        value = SYMBOLS[sym]
    else:
        value = rat[0] / rat[1]
    irr = bool(spec.get("irrational", sym is not None and rat is None))
    return DeclaredReal(value, tuple(rat) if rat else None, irr, sym)


def _real_to_json(d: DeclaredReal):
    out = {"value": d.value}
    if d.rational:
        out["rational"] = list(d.rational)
    if d.irrational:
        out["irrational"] = True
    if d.symbol:
        out["symbol"] = d.symbol
    return out


@dataclass(frozen=True)
class ClassConfig:
    kind: str                      # compact | sis | periodic_gaussian
    c: float | None = None
    beta: DeclaredReal | None = None    # step (sis) or period (periodic_gaussian)
    k_min: int = 0
    size: int = 1

    def signal_class(self):
        if self.kind == "compact":
            return CompactClassSpec(self.c)
        if self.kind == "sis":
            return SisSpec(self.beta.value, self.k_min, np.zeros(self.size))
        # the Fourier side lives in the shift-invariant space with step 1/period
        return SisSpec(1.0 / self.beta.value, self.k_min, np.zeros(self.size))

    def declared_step(self) -> DeclaredReal | None:
        if self.kind == "sis":
            return self.beta
        if self.kind == "periodic_gaussian":
            b = self.beta
            rat = (b.rational[1], b.rational[0]) if b.rational else None
            return DeclaredReal(1.0 / b.value, rat, b.irrational, f"1/{b.symbol}" if b.symbol else None)
        return None

    def to_dict(self) -> dict:
        if self.kind == "compact":
            return {"kind": "compact", "c": self.c}
        key = "beta" if self.kind == "sis" else "period"
        return {"kind": self.kind, key: _real_to_json(self.beta), "k_min": self.k_min, "size": self.size}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    cls: ClassConfig | None = None
    x_seq: SequenceDescriptor | None = None
    w_seq: SequenceDescriptor | None = None
    theta: float = 0.0
    seed: int = 0
    trials: int = 1
    profile: str = "nonvanishing"
    grid_step: float = 1.0 / 64
    checks: tuple = ALL_CHECKS
    tolerances: dict = field(default_factory=dict)
    recon: dict = field(default_factory=dict)
    probe_delta: float = 0.1
    input_csv: str | None = None
    input_squared: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, _schema())
        except jsonschema.ValidationError as e:
            loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ConfigError(f"config schema violation at {loc}: {e.message}") from None
        exp = d["experiment"]
        cc = None
        if "class" in d:
            c = d["class"]
            if c["kind"] == "compact":
                cc = ClassConfig("compact", c=float(c["c"]))
            else:
                key = "beta" if c["kind"] == "sis" else "period"
                cc = ClassConfig(c["kind"], beta=parse_real(c[key]), k_min=int(c.get("k_min", 0)), size=int(c["size"]))
        if exp != "forward_check":
            if cc is None or "sampling" not in d:
                raise ConfigError(f"{exp} needs 'class' and 'sampling'")
        xs = ws = None
        theta = 0.0
        if "sampling" in d:
            try:
                xs = SequenceDescriptor.from_dict(d["sampling"]["x"])
                ws = SequenceDescriptor.from_dict(d["sampling"]["w"])
            except ValueError as e:
                raise ConfigError(f"bad sampling sequence: {e}") from None
            theta = float(d["sampling"].get("theta", 0.0))
        tol = dict(DEFAULT_TOL)
        tol.update(d.get("tolerances", {}))
        inp = d.get("input", {})
        return cls(
            experiment=exp,
            cls=cc,
            x_seq=xs,
            w_seq=ws,
            theta=theta,
            seed=int(d.get("seed", 0)),
            trials=int(d.get("trials", 1)),
            profile=d.get("profile", "nonvanishing"),
            grid_step=float(d.get("grid_step", 1.0 / 64)),
            checks=tuple(d.get("checks", ALL_CHECKS)),
            tolerances=tol,
            recon=dict(d.get("reconstruction", {})),
            probe_delta=float(d.get("probe", {}).get("delta", 0.1)),
            input_csv=inp.get("samples_csv"),
            input_squared=bool(inp.get("squared", True)),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text("utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        cfg = cls.from_dict(d)
        if cfg.input_csv and not os.path.isabs(cfg.input_csv):
            cfg = _replace(cfg, input_csv=str(Path(path).parent / cfg.input_csv))
        return cfg

    def with_overrides(self, seed=None, trials=None) -> "ExperimentConfig":
        kw = {}
        if seed is not None:
            if seed < 0:
                raise ConfigError("seed must be nonnegative")
            kw["seed"] = int(seed)
        if trials is not None:
            if trials < 0:
                raise ConfigError("trials must be nonnegative")
            kw["trials"] = int(trials)
        return _replace(self, **kw)

    def sampling_set(self) -> SamplingSet:
        return SamplingSet(self.x_seq, self.w_seq, self.theta)

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "seed": self.seed,
            "trials": self.trials,
            "profile": self.profile,
            "grid_step": self.grid_step,
        }
        if self.cls is not None:
            d["class"] = self.cls.to_dict()
        if self.x_seq is not None:
            d["sampling"] = {"x": self.x_seq.to_dict(), "w": self.w_seq.to_dict(), "theta": self.theta}
        if self.experiment == "forward_check":
            d["checks"] = list(self.checks)
        d["tolerances"] = dict(sorted(self.tolerances.items()))
        if self.recon:
            d["reconstruction"] = dict(sorted(self.recon.items()))
        if self.experiment == "uniqueness_probe":
            d["probe"] = {"delta": self.probe_delta}
        if self.input_csv:
            d["input"] = {"samples_csv": self.input_csv, "squared": self.input_squared}
        return d


def _replace(cfg, **kw):
    return replace(cfg, **kw)


# plumbing ------------------------------------------------------------------

@dataclass
class RunResult:
    exit_code: int
    summary: dict
    files: list


def thread_count() -> int:
    env = os.environ.get("GPL_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"GPL_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return max(1, min(8, os.cpu_count() or 1))


def trial_seed(seed: int, trial: int) -> int:
    return seed ^ trial


def _map_trials(fn, n: int):
    """Run ``fn(i)`` for ``i < n``; results come back in trial order."""
    workers = min(thread_count(), max(n, 1))
    if workers <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(n)))


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


class _Writer:
    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def text(self, name: str, text: str):
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.files.append(name)

    def json(self, name: str, obj):
        self.text(name, _dump_json(obj))


def _hypothesis_set(cfg: ExperimentConfig) -> SamplingSet:
    if cfg.cls.kind == "periodic_gaussian":
        # hypotheses apply to the Fourier side, sampled at (w, -x)
        return SamplingSet(cfg.w_seq, cfg.x_seq.negated(), cfg.theta)
    return cfg.sampling_set()


def _validation(cfg: ExperimentConfig):
    """Validator report for the configured set and the corresponding output flags."""
    rep = validate_uniqueness_config(cfg.cls.signal_class(), _hypothesis_set(cfg), cfg.cls.declared_step())
    flags = [] if rep.passed else [NOT_MET]
    return rep, flags


def _summary(cfg, **kw) -> dict:
    d = {"schema_version": SCHEMA_VERSION, "experiment": cfg.experiment, "config": cfg.to_dict()}
    d.update(kw)
    return d


# forward check ---------------------------------------------------------------

def _rand_sis(rng, betas=(1.0, math.sqrt(2.0), 1.7), max_terms=9):
    beta = float(betas[int(rng.integers(len(betas)))])
    m = int(rng.integers(1, max_terms + 1))
    k_min = int(rng.integers(-(m // 2) - 1, 1))
    c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return SisSpec(beta, k_min, c / np.max(np.abs(c)))


def _rand_hermite_signal(rng, grid, n_terms=12):
    from .transforms import hermite_functions
    a = (rng.standard_normal(n_terms) + 1j * rng.standard_normal(n_terms)) / (1 + np.arange(n_terms))
    return ComplexSignal(grid, a @ hermite_functions(n_terms - 1, grid.points))


def forward_check_suite(name: str, rng, step: float) -> float:
    """Run one oracle-agreement check; returns the measured maximum error."""
    from .spectrogram import freq_band_check, periodized_ratio, spectrogram_sis_closed
    from .transforms import ambiguity, frft, gabor, gabor_gaussian_closed, gabor_points, rotate_points

    if name == "gabor_closed_form":
        phi = ComplexSignal(Grid.centered(8.0, step), gaussian(Grid.centered(8.0, step).points))
        pts = rng.uniform(-4, 4, (100, 2))
        got = gabor_points(phi, pts[:, 0], pts[:, 1])
        return float(np.max(np.abs(got - gabor_gaussian_closed(pts[:, 0], pts[:, 1]))))
    if name == "sis_spectrogram":
        err = 0.0
        xg = Grid(-4.0, 0.25, 33)
        for _ in range(10):
            spec = _rand_sis(rng)
            f = synthesize_sis(spec, spec.default_grid(step))
            q = np.abs(gabor(f, xg, xg).values) ** 2
            X, Wm = np.meshgrid(xg.points, xg.points, indexing="ij")
            ref = spectrogram_sis_closed(spec, X, Wm)
            err = max(err, float(np.max(np.abs(q - ref)) / np.max(np.abs(ref))))
        return err
    if name == "frft_gaussian":
        g = Grid.centered(8.0, step)
        phi = ComplexSignal(g, gaussian(g.points))
        m = max(float(np.max(np.abs(frft(phi, th, method=meth).values - phi.values)))
                for th in (0.3, 1.0, 2.5) for meth in ("hermite", "chirp"))
        return m
    if name == "frft_group":
        g = Grid.centered(8.0, step)
        err = 0.0
        for _ in range(5):
            f = _rand_hermite_signal(rng, g)
            th, eta = rng.uniform(-math.pi, math.pi, 2)
            for meth in ("hermite", "chirp"):
                lhs = frft(frft(f, eta, method=meth), th, method=meth)
                rhs = frft(f, th + eta, method=meth)
                err = max(err, (lhs - rhs).norm() / f.norm())
        return err
    if name == "frft_rotation":
        g = Grid.centered(8.0, step)
        err = 0.0
        for _ in range(5):
            f = _rand_hermite_signal(rng, g)
            h = _rand_hermite_signal(rng, g)
            th = float(rng.uniform(-math.pi, math.pi))
            ft, ht = frft(f, th), frft(h, th)
            for z in rng.uniform(-1.5, 1.5, (4, 2)):
                rz = rotate_points(z[None, :], th)[0]
                a = ambiguity(f, h, float(rz[0]), float(rz[1]))
                b = ambiguity(ft, ht, float(z[0]), float(z[1]))
                err = max(err, abs(a - b))
        return err
    if name == "band_limit":
        cls = CompactClassSpec(2.0)
        err = 0.0
        for i in range(10):
            f = random_in_class(cls, int(rng.integers(2**31)), "rough", grid=cls.default_grid(step))
            for x in (0.0, 1.0, -2.0):
                err = max(err, freq_band_check(f, CompactClassSpec(2.0), x).out_of_band)
        return err
    if name == "periodicity":
        beta = math.sqrt(2.0)
        spec = _rand_sis(rng, betas=(beta,))
        x = rng.uniform(-4, 4, 100)
        w = rng.uniform(-4, 4, 100)
        a = periodized_ratio(spec, x, w)
        b = periodized_ratio(spec, x, w + 2 / beta)
        return float(np.max(np.abs(a - b)))
    raise ConfigError(f"unknown check {name!r}")


def run_forward_check(cfg: ExperimentConfig, out) -> RunResult:
    """Oracle-agreement suites; one CSV row per check."""
    w = _Writer(out)

    def one(i):
        name = cfg.checks[i]
        rng = np.random.default_rng([cfg.seed, i])
        with np.errstate(all="ignore"):
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                err = forward_check_suite(name, rng, cfg.grid_step)
        tol = cfg.tolerances.get(name, DEFAULT_TOL[name])
        ok = bool(np.isfinite(err) and err < tol)
        return name, err, tol, ok

    rows = _map_trials(one, len(cfg.checks))
    w.text("forward_check.csv", _csv_text(["check", "max_error", "tolerance", "passed"],
                                          [(n, e, t, "true" if ok else "false") for n, e, t, ok in rows]))
    failed = [n for n, _, _, ok in rows if not ok]
    summary = _summary(cfg, checks={n: {"max_error": e, "tolerance": t, "passed": ok} for n, e, t, ok in rows},
                       failed=failed, passed=not failed)
    w.json("summary.json", summary)
    return RunResult(EXIT_NUMERIC if failed else EXIT_OK, summary, w.files)


# truth synthesis -------------------------------------------------------------

def _truth(cfg: ExperimentConfig, seed: int):
    """Ground truth for one trial: ``(signal, coeff_spec_or_None)``."""
    cc = cfg.cls
    sig = cc.signal_class()
    if cc.kind == "compact":
        grid = sig.default_grid(cfg.grid_step)
        if cfg.profile == "zero":
            return ComplexSignal(grid, np.zeros(grid.count)), None
        if cfg.theta:
            from .transforms import frft
            wide = Grid.centered(cc.c / 2 + 6.0, cfg.grid_step)
            g = random_in_class(sig, seed, cfg.profile, grid=wide)
            return frft(g, -cfg.theta, method="chirp"), None
        return random_in_class(sig, seed, cfg.profile, grid=grid), None
    if cfg.profile == "zero":
        spec = sig
    else:
        spec = random_in_class(sig, seed, "smooth" if cfg.profile == "rough" else cfg.profile)
    if cc.kind == "sis":
        return synthesize_sis(spec, spec.default_grid(cfg.grid_step)), spec
    grid = Grid.centered(6.0, cfg.grid_step)
    return periodic_gaussian_signal(spec.coeffs, cc.beta.value, spec.k_min, grid), spec


def _forward(cfg: ExperimentConfig, truth, spec, X: SamplingSet, seed: int, bits=36) -> SpectrogramSamples:
    sigma = cfg.recon.get("noise_sigma") or None
    if cfg.cls.kind == "sis" and not cfg.theta:
        return sample_sis(spec, X, bits, sigma, seed)
    return sample_spectrogram(truth, X, bits, sigma, seed)


# uniqueness probe ------------------------------------------------------------

def run_uniqueness_probe(cfg: ExperimentConfig, out) -> RunResult:
    """Empirical separation margin of distinct pairs and the phase-equal control."""
    w = _Writer(out)
    rep, flags = _validation(cfg)
    X = cfg.sampling_set()
    tol_eq = cfg.tolerances.get("phase_equal", DEFAULT_TOL["phase_equal"])

    def one(i):
        s = trial_seed(cfg.seed, i)
        f, fs = _truth(cfg, s)
        # partner drawn from an independent stream; redraw until far enough apart
        for k in range(1, 50):
            h, hs = _truth(cfg, s + (k << 32))
            d = relative_phase_distance(f, h) if f.grid.same_as(h.grid) else math.inf
            if d > cfg.probe_delta:
                break
        Sf = _forward(cfg, f, fs, X, s, bits=None).values
        Sh = _forward(cfg, h, hs, X, s, bits=None).values
        scale = float(np.max(Sf)) or 1.0
        margin = float(np.max(np.abs(Sf - Sh))) / scale
        alpha = float(np.random.default_rng(s).uniform(0, 2 * math.pi))
        rot = f.with_values(np.exp(1j * alpha) * f.values)
        rspec = fs.with_coeffs(np.exp(1j * alpha) * fs.coeffs) if fs is not None else None
        Sr = _forward(cfg, rot, rspec, X, s, bits=None).values
        eq = float(np.max(np.abs(Sf - Sr))) / scale
        return i, d, margin, alpha, eq

    rows = _map_trials(one, cfg.trials)
    w.text("probe_trials.csv", _csv_text(["trial", "phase_distance", "margin", "alpha", "phase_equal_discrepancy"],
                                         rows))
    margins = np.array([r[2] for r in rows])
    edges = np.arange(-16, 2, dtype=float)
    hist = []
    if margins.size:
        lm = np.log10(np.maximum(margins, 1e-300))
        counts, _ = np.histogram(np.clip(lm, edges[0], edges[-1]), bins=edges)
        hist = [(float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]
    w.text("margin_histogram.csv", _csv_text(["log10_margin_lo", "log10_margin_hi", "count"], hist))
    min_margin = float(margins.min()) if margins.size else None
    max_eq = max((r[4] for r in rows), default=None)
    numeric_ok = (max_eq is None or max_eq < tol_eq) and (min_margin is None or min_margin > 0)
    summary = _summary(cfg, validation=rep.to_dict(), flags=flags, hypotheses_met=rep.passed,
                       min_margin=min_margin, max_phase_equal_discrepancy=max_eq, phase_equal_tolerance=tol_eq,
                       trials_run=len(rows))
    w.json("summary.json", summary)
    w.text("validation.txt", rep.table() + "\n")
    code = EXIT_VALIDATION if flags else (EXIT_OK if numeric_ok else EXIT_NUMERIC)
    return RunResult(code, summary, w.files)


# reconstruction --------------------------------------------------------------

def _compact_cfg(cfg: ExperimentConfig, cls) -> CompactConfig:
    r = cfg.recon
    reg = RegConfig(lam_rel=float(r.get("lam_rel", 1e-10)), tsvd_rel=float(r.get("tsvd_rel", 1e-12)))
    grid = None
    if cfg.theta:
        grid = Grid.centered(cls.c / 2 + 6.0, cfg.grid_step)
    return CompactConfig(reg=reg, step=cfg.grid_step, output_grid=grid,
                         propagation=r.get("propagation", "anchor"), refine=bool(r.get("refine", True)))


def _reconstruct(cfg: ExperimentConfig, samples: SpectrogramSamples):
    """Dispatch to the class pipeline: ``(signal, coeff_spec_or_None, diagnostics)``."""
    cc = cfg.cls
    sig = cc.signal_class()
    if cc.kind == "compact":
        g, d = reconstruct_compact(samples, sig, cfg.theta, _compact_cfg(cfg, sig))
        return g, None, d
    scfg = SisConfig(refine=bool(cfg.recon.get("refine", True)))
    rng_ = (sig.k_min, sig.k_max)
    if cc.kind == "sis":
        spec, d = reconstruct_sis(samples, sig.beta, rng_, scfg)
        return synthesize_sis(spec, spec.default_grid(cfg.grid_step)), spec, d
    g, spec, d = reconstruct_periodic_gaussian(samples, cc.beta.value, rng_, Grid.centered(6.0, cfg.grid_step), scfg)
    return g, spec, d


def _trial_record(cfg: ExperimentConfig, X: SamplingSet, i: int):
    s = trial_seed(cfg.seed, i)
    truth, spec = _truth(cfg, s)
    samples = _forward(cfg, truth, spec, X, s)
    try:
        rec, rspec, diag = _reconstruct(cfg, samples)
    except ReconstructionError as e:
        return {"trial": i, "seed": s, "status": f"error: {e}", "phase_dist": None, "residual": None,
                "cond": None, "signal": None, "diag": None, "spec": None}
    if truth.grid.same_as(rec.grid):
        dist = relative_phase_distance(truth, rec)
    else:
        dist = _distance_on_common_grid(truth, rec)
    ce = np.asarray(diag.condition_estimates, dtype=float)
    return {"trial": i, "seed": s, "status": "ok", "phase_dist": dist, "residual": diag.residual,
            "cond": float(ce.max()) if ce.size else None, "signal": rec, "diag": diag, "spec": rspec}


def _distance_on_common_grid(truth: ComplexSignal, rec: ComplexSignal) -> float:
    # both grids share the step; compare on the union with zero padding
    g1, g2 = truth.grid, rec.grid
    i0 = min(round(g1.start / g1.step), round(g2.start / g2.step))
    i1 = max(round(g1.stop / g1.step), round(g2.stop / g2.step))
    grid = Grid(i0 * g1.step, g1.step, i1 - i0 + 1)

    def embed(f):
        v = np.zeros(grid.count, dtype=complex)
        a = round(f.grid.start / f.grid.step) - i0
        v[a:a + f.grid.count] = f.values
        return ComplexSignal(grid, v)

    return relative_phase_distance(embed(truth), embed(rec))


def run_reconstruction(cfg: ExperimentConfig, out) -> RunResult:
    """Synthesize, sample, reconstruct and score ``cfg.trials`` trials (or one input file)."""
    w = _Writer(out)
    rep, flags = _validation(cfg)
    X = cfg.sampling_set()
    if cfg.input_csv:
        return _reconstruct_input(cfg, X, rep, flags, w)
    recs = _map_trials(lambda i: _trial_record(cfg, X, i), cfg.trials)
    w.text("trials.csv", _csv_text(["trial", "phase_dist", "residual", "cond", "status"],
                                   [(r["trial"], r["phase_dist"], r["residual"], r["cond"], r["status"])
                                    for r in recs]))
    for r in recs:
        if r["signal"] is None:
            continue
        w.text(f"signals/trial_{r['trial']:03d}.csv", r["signal"].to_csv())
        dd = r["diag"].to_dict()
        if r["spec"] is not None:
            dd["coefficients"] = r["spec"].to_dict()
        w.json(f"diagnostics/trial_{r['trial']:03d}.json", dd)
    dists = np.array([r["phase_dist"] for r in recs if r["phase_dist"] is not None])
    n_err = sum(r["status"] != "ok" for r in recs)
    med = float(np.median(dists)) if dists.size else None
    mx = float(np.max(dists)) if dists.size else None
    tol_med = cfg.tolerances.get("median_phase_dist")
    tol_max = cfg.tolerances.get("max_phase_dist")
    numeric_ok = n_err == 0 or not (tol_med or tol_max)
    if tol_med is not None and med is not None and not med < tol_med:
        numeric_ok = False
    if tol_max is not None and mx is not None and not mx < tol_max:
        numeric_ok = False
    summary = _summary(cfg, validation=rep.to_dict(), flags=flags, hypotheses_met=rep.passed,
                       median_phase_dist=med, max_phase_dist=mx, trials_run=len(recs), trial_errors=n_err,
                       numeric_pass=numeric_ok)
    w.json("summary.json", summary)
    code = EXIT_VALIDATION if flags else (EXIT_OK if numeric_ok else EXIT_NUMERIC)
    return RunResult(code, summary, w.files)


def _reconstruct_input(cfg, X, rep, flags, w: _Writer) -> RunResult:
    text = Path(cfg.input_csv).read_text("utf-8")
    samples = SpectrogramSamples.from_csv(text, X, squared=cfg.input_squared)
    try:
        rec, rspec, diag = _reconstruct(cfg, samples)
        status = "ok"
    except ReconstructionError as e:
        rec, rspec, diag, status = None, None, None, f"error: {e}"
    if rec is not None:
        w.text("signal.csv", rec.to_csv())
        dd = diag.to_dict()
        if rspec is not None:
            dd["coefficients"] = rspec.to_dict()
        w.json("diagnostics.json", dd)
    summary = _summary(cfg, validation=rep.to_dict(), flags=flags, hypotheses_met=rep.passed, status=status,
                       residual=diag.residual if diag else None)
    w.json("summary.json", summary)
    code = EXIT_VALIDATION if flags else (EXIT_OK if status == "ok" else EXIT_NUMERIC)
    return RunResult(code, summary, w.files)


# density report --------------------------------------------------------------

def _seq_report(seq: SequenceDescriptor, beta=None) -> dict:
    d = lower_beurling_density(seq)
    out = {
        "descriptor": seq.to_dict(),
        "lower_density": d.value if math.isfinite(d.value) else "inf",
        "density_exact": d.exact,
        "reciprocal_series": reciprocal_series_check(seq, 0.0),
    }
    if beta is not None:
        wr = weyl_density_check(seq, beta)
        out["weyl"] = {"verdict": wr.verdict, "period": wr.period, "max_gap": wr.max_gap,
                       "fill_ratio": wr.fill_ratio, "residues": list(wr.residues) if wr.residues else None,
                       "detail": wr.detail}
    return out


def run_density_report(cfg: ExperimentConfig, out) -> RunResult:
    """All validators on the configured set, as JSON plus a readable table."""
    w = _Writer(out)
    rep, flags = _validation(cfg)
    X = _hypothesis_set(cfg)
    beta = cfg.cls.declared_step()
    report = {
        "schema_version": SCHEMA_VERSION,
        "validation": rep.to_dict(),
        "x": _seq_report(X.x_seq),
        "w": _seq_report(X.w_seq, beta),
    }
    w.json("validation.json", report)
    w.text("validation.txt", rep.table() + "\n")
    summary = _summary(cfg, validation=rep.to_dict(), flags=flags, hypotheses_met=rep.passed)
    w.json("summary.json", summary)
    return RunResult(EXIT_VALIDATION if flags else EXIT_OK, summary, w.files)


RUNNERS = {
    "forward_check": run_forward_check,
    "uniqueness_probe": run_uniqueness_probe,
    "reconstruct": run_reconstruction,
    "density_report": run_density_report,
}


def run(cfg: ExperimentConfig, out) -> RunResult:
    return RUNNERS[cfg.experiment](cfg, out)
