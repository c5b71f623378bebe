"""Parameter sweeps over drive and thermodynamic scale.

A sweep walks a ``(L, G)`` grid. At each point the L-independent model is
rescaled, a Fock cutoff is chosen (fixed, or self-certified by cutoff
doubling), the tracked symmetry sectors are diagonalised, and the
quantum photon numbers are set against the semiclassical fixed points.

Config files are flat ``key = value`` text. Energies and rates are read
in units of ``gamma`` (or of ``eta_n`` when ``gamma = 0``)::

    n = 3
    u = -10, 10
    gamma = 1
    eta_n = 1
    drive_grid = 0.6:2.0:15        # start:stop:count, or a comma list
    l_grid = 1, 2, 4, 6
    cutoff = adaptive              # or an integer
    sectors = 0, 1, 2              # strong symmetry: 0:0, 0:1, ...
    n_eigs = 4
"""

__all__ = ["ConfigError", "SweepConfig", "SweepRecord", "ScalingSeries",
           "DEFAULT_L_GRID", "parse_config", "load_config", "adaptive_cutoff",
           "evaluate_point", "run_sweep", "scaling_series", "cat_overlap",
           "coherent_state", "cat_state", "write_outputs", "config_hash"]

import configparser
import csv
import hashlib
import json
import logging
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy
from scipy.special import gammaln

from . import __version__, fock_ops
from .liouvillian import expectation, liouvillian
from .model import ModelSpec, rescale, suggest_cutoff
from .semiclassical import fixed_points
from .spectra import SolverError, is_population_sector, model_spectra, steady_state
from .symmetry import sector_decomposition

logger = logging.getLogger(__name__)

DEFAULT_L_GRID = (1, 2, 5, 10, 15, 20)
ADAPTIVE_TOL = 1e-3


class ConfigError(ValueError):
    """Invalid or inconsistent sweep configuration."""


@dataclass
class SweepConfig:
    """Everything a sweep needs; ``model.g_n`` is ignored in favour of the grid.

    ``model`` holds the L-independent parameters, already divided by the
    unit rate.
    """

    model: ModelSpec
    drive_grid: list
    l_grid: list = field(default_factory=lambda: list(DEFAULT_L_GRID))
    cutoff: object = "adaptive"
    sectors: list | None = None
    n_eigs: int = 4
    out_dir: str | None = None
    threads: int = 1
    dense_threshold: int = 1024
    max_cutoff: int = 512
    unit: str = "gamma"
    density_range: tuple = (1e-3, 10.0, 400)
    source_text: str = ""

    def __post_init__(self):
        for name in ("drive_grid", "l_grid"):
            grid = [float(x) for x in getattr(self, name)]
            if not grid:
                raise ConfigError(f"{name} is empty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
            setattr(self, name, grid)
        if any(l <= 0 for l in self.l_grid):
            raise ConfigError("l_grid values must be positive")
        if any(g < 0 for g in self.drive_grid):
            raise ConfigError("drive_grid values must be non-negative")
        if self.cutoff != "adaptive":
            try:
                self.cutoff = int(self.cutoff)
            except (TypeError, ValueError):
                raise ConfigError(f"cutoff must be 'adaptive' or an integer, got {self.cutoff!r}")
            if self.cutoff <= self.model.n:
                raise ConfigError(f"cutoff {self.cutoff} must exceed the drive order {self.model.n}")
        if self.sectors is None:
            self.sectors = default_sectors(self.model)
        if int(self.n_eigs) < 1:
            raise ConfigError("n_eigs must be >= 1")
        self.n_eigs = int(self.n_eigs)

    @property
    def population_sectors(self):
        return [s for s in self.sectors if is_population_sector(s)]


def default_sectors(model):
    n = model.n
    if model.symmetry_kind == "strong":
        return [(j, j) for j in range(n)] + [(j, (j + 1) % n) for j in range(n) if n > 1]
    return list(range(n))


# -- config parsing ----------------------------------------------------------------------

def _floats(text):
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _grid(text):
    text = text.strip()
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        # trim linspace round-off so grid values print cleanly
        return [float(f"{x:.12g}") for x in np.linspace(start, stop, count)]
    return _floats(text)


def parse_sectors(text):
    out = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            a, b = item.split(":")
            out.append((int(a), int(b)))
        else:
            out.append(int(item))
    return out


def parse_config(text, overrides=None):
    """Build a :class:`SweepConfig` from flat ``key = value`` text.

    ``overrides`` (a dict of the same keys) wins over the file.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string("[sweep]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    raw = dict(parser["sweep"])
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    try:
        n = int(raw.pop("n"))
        u = _floats(raw.pop("u"))
        gamma = float(raw.pop("gamma", 0))
        eta = float(raw.pop("eta_n", raw.pop("eta", 0)))
        drives = _grid(raw.pop("drive_grid", raw.pop("g", "0")))
        if "l_grid" in raw:
            l_grid = _grid(raw.pop("l_grid"))
        else:
            l_grid = list(DEFAULT_L_GRID)
        unit_rate = gamma if gamma > 0 else eta
        if unit_rate <= 0:
            raise ConfigError("need gamma > 0 or eta_n > 0 to fix the unit")
        unit = "gamma" if gamma > 0 else "eta_n"
        model = ModelSpec(n, [x / unit_rate for x in u], 0.0, gamma / unit_rate,
                          eta / unit_rate)
        kwargs = dict(
            model=model,
            drive_grid=[g / unit_rate for g in drives],
            l_grid=l_grid,
            unit=unit,
            source_text=text,
        )
        if "cutoff" in raw:
            kwargs["cutoff"] = raw.pop("cutoff").strip()
        if "sectors" in raw:
            kwargs["sectors"] = parse_sectors(raw.pop("sectors"))
        for key, conv in (("n_eigs", int), ("threads", int),
                          ("dense_threshold", int), ("max_cutoff", int)):
            if key in raw:
                kwargs[key] = conv(raw.pop(key))
        if "out" in raw:
            kwargs["out_dir"] = raw.pop("out").strip()
        if "density_range" in raw:
            lo, hi, cnt = raw.pop("density_range").split(":")
            kwargs["density_range"] = (float(lo), float(hi), int(cnt))
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if raw:
        raise ConfigError(f"unknown keys: {', '.join(sorted(raw))}")
    return SweepConfig(**kwargs)


def load_config(path, overrides=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides)


def config_hash(config):
    """SHA-256 over the normalised parameters that determine the output."""
    payload = {
        "n": config.model.n, "u": list(config.model.u),
        "gamma": config.model.gamma, "eta_n": config.model.eta_n,
        "drive_grid": config.drive_grid, "l_grid": config.l_grid,
        "cutoff": config.cutoff, "sectors": [str(s) for s in config.sectors],
        "n_eigs": config.n_eigs, "dense_threshold": config.dense_threshold,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# -- per-point evaluation ------------------------------------------------------------

@dataclass
class SweepRecord:
    """Results at one ``(G, L)`` grid point.

    ``photons`` maps each tracked population sector to ``<a^dag a>`` of its
    steady state; ``eigenvalues`` and ``residuals`` map every tracked
    sector to its slowest eigenvalues and their solver residuals.
    ``matched_density`` is the stable semiclassical density closest to
    ``<a^dag a>/L`` of the first population sector and ``discrepancy`` the
    distance between the two.
    """

    drive: float
    scale_l: float
    n_c: int | None = None
    photons: dict = field(default_factory=dict)
    eigenvalues: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    semiclassical: list = field(default_factory=list)
    classification: str = ""
    matched_density: float | None = None
    discrepancy: float | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


def _photons_at(spec, n_c, labels):
    sup = liouvillian(spec.replace(n_c=n_c))
    dec = sector_decomposition(sup, spec.n, spec.symmetry_kind, with_blocks=False)
    num = fock_ops.number(n_c)
    out = {}
    for lab in labels:
        idx = dec.indices(dec.find(lab))
        rho = steady_state(sup.matrix[idx][:, idx], idx, n_c)
        out[lab] = expectation(num, rho).real
    return out


def adaptive_cutoff(spec, labels=None, tol=ADAPTIVE_TOL, max_cutoff=512):
    """Smallest tried cutoff whose doubling moves every photon number by <= tol.

    Starts from :func:`suggest_cutoff` and doubles until the steady-state
    photon numbers of the population sectors ``labels`` at ``n_c`` and
    ``2 n_c`` agree to relative ``tol``.

    Raises
    ------
    SolverError
        If ``max_cutoff`` is reached without convergence.
    """
    if labels is None:
        labels = [(j, j) for j in range(spec.n)] if spec.symmetry_kind == "strong" else [0]
    n_c = suggest_cutoff(spec)
    current = _photons_at(spec, n_c, labels)
    while True:
        if 2 * n_c > max_cutoff:
            raise SolverError(f"adaptive cutoff exceeded max_cutoff={max_cutoff}")
        doubled = _photons_at(spec, 2 * n_c, labels)
        change = max(abs(doubled[l] - current[l]) / max(abs(doubled[l]), 1e-9)
                     for l in labels)
        if change <= tol:
            return n_c
        logger.info("cutoff %d -> %d (photon change %.2e)", n_c, 2 * n_c, change)
        n_c, current = 2 * n_c, doubled


def evaluate_point(config, drive, scale_l):
    """Quantum and semiclassical evaluation of one grid point (never raises)."""
    rec = SweepRecord(float(drive), float(scale_l))
    tilde = config.model.replace(g_n=float(drive))
    try:
        sols = fixed_points(tilde, drive)
        rec.semiclassical = [(p.density, p.stability) for p in sols.points]
        rec.classification = sols.classification
        spec = rescale(tilde, scale_l)
        if config.cutoff == "adaptive":
            n_c = adaptive_cutoff(spec, config.population_sectors or None,
                                  max_cutoff=config.max_cutoff)
        else:
            n_c = config.cutoff
        rec.n_c = n_c
        spectra = model_spectra(spec.replace(n_c=n_c), config.sectors,
                                config.n_eigs, config.dense_threshold)
        num = fock_ops.number(n_c)
        for lab, ss in spectra.items():
            rec.eigenvalues[lab] = [complex(v) for v in ss.eigenvalues]
            rec.residuals[lab] = float(ss.residuals.max())
            if ss.steady_state is not None:
                rec.photons[lab] = expectation(num, ss.steady_state).real
        if rec.photons:
            per_l = next(iter(rec.photons.values())) / scale_l
            stable = [d for d, st in rec.semiclassical if st != "unstable"]
            if stable:
                rec.matched_density = min(stable, key=lambda d: abs(d - per_l))
                rec.discrepancy = abs(per_l - rec.matched_density)
    except (SolverError, ValueError, KeyError, ArithmeticError,
            np.linalg.LinAlgError, RuntimeError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        logger.warning("point G=%g L=%g failed: %s", drive, scale_l, rec.error)
    return rec


def run_sweep(config):
    """Evaluate every ``(G, L)`` point; records come back L-major, then G.

    Points run on a thread pool of ``config.threads`` workers; the result
    order is fixed by the grid, not by completion.
    """
    points = [(g, l) for l in config.l_grid for g in config.drive_grid]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(lambda p: evaluate_point(config, *p), points))
    return [evaluate_point(config, g, l) for g, l in points]


# -- finite-size scaling ---------------------------------------------------------------

@dataclass
class ScalingSeries:
    """``Re(lambda)`` against ``L`` at fixed drive, with a log-linear tail fit."""

    points: list
    slope: float | None = None
    intercept: float | None = None
    r2: float | None = None
    fit_range: tuple | None = None
    errors: list = field(default_factory=list)


def _fit_log(ls, vals):
    y = np.log(np.abs(vals))
    x = np.asarray(ls, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = np.sum((y - pred) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def scaling_series(config, sector, which_eig, g_fixed):
    """Track eigenvalue ``which_eig`` of ``sector`` across ``config.l_grid``.

    The fit of ``log|Re lambda|`` against ``L`` skips the first point when
    four or more are available (finite-size transient) and is omitted when
    fewer than three points remain.
    """
    if not any(math.isclose(g_fixed, g, rel_tol=1e-12, abs_tol=1e-15)
               for g in config.drive_grid):
        raise ConfigError(f"drive {g_fixed} is not on the configured drive grid")
    sub = SweepConfig(**{**config.__dict__, "sectors": [sector],
                         "n_eigs": max(config.n_eigs, which_eig + 1),
                         "drive_grid": [g_fixed]})
    records = run_sweep(sub)
    series = ScalingSeries([])
    for rec in records:
        if not rec.ok:
            series.errors.append((rec.scale_l, rec.error))
            continue
        series.points.append((rec.scale_l, rec.eigenvalues[sector][which_eig].real))
    tail = series.points[1:] if len(series.points) >= 4 else series.points
    tail = [(l, v) for l, v in tail if v != 0]
    if len(tail) >= 3:
        ls, vals = zip(*tail)
        series.slope, series.intercept, series.r2 = _fit_log(ls, vals)
        series.fit_range = (ls[0], ls[-1])
    return series


# -- cat states -------------------------------------------------------------------------

def coherent_state(alpha, n_c):
    """Truncated Fock amplitudes of ``|alpha>`` (not renormalised)."""
    p = np.arange(n_c)
    if alpha == 0:
        out = np.zeros(n_c, dtype=np.complex128)
        out[0] = 1.0
        return out
    logamp = -0.5 * abs(alpha) ** 2 + p * np.log(complex(alpha)) - 0.5 * gammaln(p + 1)
    return np.exp(logamp)


def _cat_weights(alpha, j, n):
    m = np.arange(n)
    images = alpha * np.exp(2j * np.pi * m / n)
    # this sign puts the cat on Fock states p = j mod n
    weights = np.exp(-2j * np.pi * j * m / n)
    return images, weights


def _cat_norm2(alpha, j, n):
    images, w = _cat_weights(alpha, j, n)
    overlaps = np.exp(-abs(alpha) ** 2 + np.conj(images)[:, None] * images[None, :])
    return float(np.real(np.conj(w) @ overlaps @ w))


def cat_state(alpha, j, n, n_c):
    """Truncated ``|K_j>``, normalised with the exact coherent-state overlaps."""
    images, w = _cat_weights(alpha, j, n)
    norm2 = _cat_norm2(alpha, j, n)
    # below this the weighted sum is pure cancellation noise
    if norm2 <= 1e-14 * np.sum(np.abs(w)) ** 2:
        raise ValueError(f"cat state K_{j} vanishes for alpha={alpha}")
    vec = sum(wm * coherent_state(a, n_c) for wm, a in zip(w, images))
    return vec / math.sqrt(norm2)


def cat_overlap(rho, alpha, j, n):
    """Fidelity ``<K_j| rho |K_j>`` with the n-component cat of amplitude ``alpha``.

    ``K_j`` is the superposition of the ``n`` phase images of ``alpha``
    that lives on Fock states ``p = j (mod n)``.
    """
    rho = np.asarray(rho)
    k = cat_state(alpha, j, n, rho.shape[0])
    val = float(np.real(np.conj(k) @ rho @ k))
    return min(1.0, max(0.0, val))


# -- output ------------------------------------------------------------------------------

def _fmt(x):
    return "" if x is None else repr(float(x))


def _label(lab):
    return f"{lab[0]}:{lab[1]}" if isinstance(lab, tuple) else str(lab)


def write_outputs(config, records, out_dir):
    """Write ``photons.csv``, ``eigenvalues.csv``, ``semiclassical.csv`` and
    ``manifest.json`` into ``out_dir``; returns the list of paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    path = os.path.join(out_dir, "photons.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["G", "L", "n_c", "sector", "photons", "photons_per_L",
                    "matched_N", "discrepancy", "classification", "error"])
        for r in records:
            if not r.photons:
                w.writerow([_fmt(r.drive), _fmt(r.scale_l), r.n_c or "", "", "", "",
                            "", "", r.classification, r.error or ""])
            for lab, ph in r.photons.items():
                w.writerow([_fmt(r.drive), _fmt(r.scale_l), r.n_c, _label(lab), _fmt(ph),
                            _fmt(ph / r.scale_l), _fmt(r.matched_density),
                            _fmt(r.discrepancy), r.classification, r.error or ""])
    paths.append(path)

    path = os.path.join(out_dir, "eigenvalues.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["G", "L", "n_c", "sector", "index", "re", "im", "max_residual"])
        for r in records:
            for lab, vals in r.eigenvalues.items():
                for i, v in enumerate(vals):
                    w.writerow([_fmt(r.drive), _fmt(r.scale_l), r.n_c, _label(lab), i,
                                _fmt(v.real), _fmt(v.imag), _fmt(r.residuals[lab])])
    paths.append(path)

    path = os.path.join(out_dir, "semiclassical.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["G", "N", "stability", "classification"])
        seen = set()
        for r in records:
            if r.drive in seen:
                continue
            seen.add(r.drive)
            for dens, stab in r.semiclassical:
                w.writerow([_fmt(r.drive), _fmt(dens), stab, r.classification])
    paths.append(path)

    failures = [{"G": r.drive, "L": r.scale_l, "error": r.error}
                for r in records if not r.ok]
    resid = [v for r in records for v in r.residuals.values()]
    manifest = {
        "config_hash": config_hash(config),
        "unit": config.unit,
        "model": {"n": config.model.n, "u": list(config.model.u),
                  "gamma": config.model.gamma, "eta_n": config.model.eta_n},
        "drive_grid": config.drive_grid,
        "l_grid": config.l_grid,
        "cutoff": config.cutoff,
        "sectors": [_label(s) for s in config.sectors],
        "n_eigs": config.n_eigs,
        "points": len(records),
        "failures": failures,
        "max_eigen_residual": max(resid) if resid else None,
        "versions": {"kerrdpt": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "outputs": [os.path.basename(p) for p in paths],
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)
    return paths
