"""Command-line front end: problem files in, CSV/JSON artifacts out.

Exit codes: 0 success, 2 validation error, 3 numerical warning, 4 numerical
failure.  Errors go to stderr as one JSON line ``{code, message, context}``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import radial as R
from .discrete import RegularProblem, forward_transform, inverse_transform
from .ode import ODETolerance, integrate_span, residual
from .operator import DiracPotential, coefficient_from_json, potential_from_json
from .perturbed import Perturbation, asymptotics_check, factorial_decay_ok, neumann_solve
from .susy import (SusyProblem, bm_decay_scan, bump_after, susy_factorization_residual,
                   susy_weyl_relation_check)
from .weyl import (DEFAULT_EPS_LADDER, ClosedFormSolution, TruncationScheme, boundary_solution,
                   limit_circle_frame, perturbed_frame, radial_frame, radial_weyl_solution,
                   regular_frame, singular_M, stieltjes_invert, weyl_solution)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_WARNING, EXIT_FAILURE = 0, 2, 3, 4

HEADERS = {
    "mfunc": ("re_z", "im_z", "re_M", "im_M"),
    "density": ("lambda", "density", "error"),
    "eig": ("n", "lambda", "gamma_sq"),
    "transform": ("lambda_n", "fhat"),
    "inverse": ("x", "f1", "f2"),
    "radial": ("lambda", "density"),
    "perturbed": ("x", "re_phi1", "im_phi1", "re_phi2", "im_phi2"),
}


class SpecError(ValueError):
    """Malformed problem file or flags (exit 2)."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


# --- problem files ----------------------------------------------------------------

@dataclass
class ProblemSpec:
    frame: dict
    potential: DiracPotential | None = None
    truncation: dict | None = None
    tolerances: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @property
    def ode_tol(self) -> ODETolerance:
        t = self.tolerances
        return ODETolerance(float(t.get("rel", 1e-10)), float(t.get("abs", 1e-12)))

    def section(self, name):
        return self.sections.get(name) or {}


_FRAMES = ("radial", "perturbed", "limit-circle", "custom", "regular")
_KNOWN = {"schema_version", "potential", "frame", "truncation", "tolerances", "outputs",
          "eig", "transform", "perturbed", "bm", "susy", "density", "mfunc"}


def _num(doc, key, default=None, required=False):
    if key not in doc:
        if required:
            raise SpecError(f"missing field {key!r}")
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SpecError(f"field {key!r} must be a finite number", value=repr(v))
    return float(v)


def load_spec(path) -> ProblemSpec:
    path = Path(path)
    if not path.is_file():
        raise SpecError("problem file not found", path=str(path))
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"problem file is not valid JSON: {exc}", path=str(path)) from None
    return parse_spec(doc, path.parent)


def parse_spec(doc, base_dir=Path(".")) -> ProblemSpec:
    if not isinstance(doc, dict):
        raise SpecError("problem file must hold a JSON object")
    unknown = sorted(set(doc) - _KNOWN)
    if unknown:
        raise SpecError("unknown top-level fields", fields=unknown)
    if doc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise SpecError("unsupported schema_version", value=doc.get("schema_version"))
    frame = doc.get("frame", {"kind": "custom"})
    if isinstance(frame, str):
        frame = {"kind": frame}
    if not isinstance(frame, dict) or frame.get("kind") not in _FRAMES:
        raise SpecError("frame.kind must be one of " + ", ".join(_FRAMES))
    pot = None
    if "potential" in doc:
        try:
            pot = potential_from_json(doc["potential"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"invalid potential: {exc}") from None
    if frame["kind"] in ("custom", "regular", "limit-circle") and pot is None:
        raise SpecError(f"frame {frame['kind']!r} needs a potential")
    if frame["kind"] in ("radial", "perturbed"):
        if _num(frame, "kappa", required=True) < 0 or _num(frame, "m", 0.0) < 0:
            raise SpecError("kappa and m must be nonnegative")
        if frame["kind"] == "perturbed":
            parse_perturbation(frame.get("perturbation"))
            if _num(frame, "x_max", required=True) <= 0:
                raise SpecError("x_max must be positive")
    if frame["kind"] == "limit-circle":
        for key in ("phi0", "theta0"):
            v = frame.get(key)
            if not (isinstance(v, list) and len(v) == 2):
                raise SpecError(f"limit-circle frame needs {key} = [u1, u2] at c")
        _num(frame, "c", required=True)
    tr = doc.get("truncation")
    if tr is not None:
        pts = tr.get("points") if isinstance(tr, dict) else None
        if not (isinstance(pts, list) and len(pts) >= 3):
            raise SpecError("truncation.points must list at least three points")
    tols = doc.get("tolerances", {})
    if not isinstance(tols, dict):
        raise SpecError("tolerances must be an object")
    for k in tols:
        if _num(tols, k) <= 0:
            raise SpecError(f"tolerance {k!r} must be positive")
    sections = {k: doc[k] for k in ("eig", "transform", "perturbed", "bm", "susy", "density", "mfunc")
                if k in doc}
    for k, v in sections.items():
        if not isinstance(v, dict):
            raise SpecError(f"section {k!r} must be an object")
    spec = ProblemSpec(frame, pot, tr, tols, doc.get("outputs", {}), sections, Path(base_dir))
    _check_files(spec)
    return spec


def _check_files(spec):
    samples = spec.section("transform").get("samples")
    if isinstance(samples, str) and not (spec.base_dir / samples).is_file():
        raise SpecError("referenced samples file does not exist", path=samples)


def parse_perturbation(doc) -> Perturbation:
    if doc is None:
        return Perturbation.zero()
    if not isinstance(doc, dict):
        raise SpecError("perturbation must be an object")
    if doc.get("kind") == "zero":
        return Perturbation.zero()
    if doc.get("kind") == "am_bump":
        a, b = _num(doc, "a", required=True), _num(doc, "b", required=True)
        if not 0 <= a < b:
            raise SpecError("bump needs 0 <= a < b")
        return Perturbation.am_bump(_num(doc, "amplitude", 1.0), a, b)
    support = doc.get("support")
    if not (isinstance(support, list) and len(support) == 2 and 0 <= support[0] < support[1]):
        raise SpecError("perturbation needs support = [lo, hi] with 0 <= lo < hi")
    try:
        ch = {k: coefficient_from_json(doc.get(k)) for k in ("q_sc", "q_el", "q_am")}
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"invalid perturbation channel: {exc}") from None
    lo, hi = map(float, support)

    def cut(c):
        return lambda x: np.where((np.asarray(x) >= lo) & (np.asarray(x) <= hi), c(x), 0.0)

    return Perturbation.from_channels(cut(ch["q_sc"]), cut(ch["q_el"]), cut(ch["q_am"]),
                                      support=(lo, hi))


# --- grids --------------------------------------------------------------------------

def _range(text, what):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise SpecError(f"{what} must look like lo:hi:step", value=text) from None
    if not (step > 0 and hi >= lo and all(map(math.isfinite, (lo, hi, step)))):
        raise SpecError(f"{what} needs step > 0 and hi >= lo", value=text)
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    if n > 1_000_000:
        raise SpecError(f"{what} has too many points", value=text)
    return lo + step * np.arange(n)


def parse_z_grid(text):
    """``re0:re1:step[,im]`` to complex points; ``im`` defaults to 1."""
    re_part, _, im = text.partition(",")
    try:
        im = float(im) if im else 1.0
    except ValueError:
        raise SpecError("imaginary part of --z-grid is not a number", value=text) from None
    if im == 0 or not math.isfinite(im):
        raise SpecError("--z-grid needs a nonzero imaginary part", value=text)
    return _range(re_part, "--z-grid") + 1j * im


def parse_lambda(text):
    return _range(text, "--lambda")


def parse_eps_ladder(text):
    try:
        eps = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise SpecError("--eps-ladder must be comma-separated numbers", value=text) from None
    if len(eps) < 3 or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise SpecError("--eps-ladder needs >= 3 positive, strictly decreasing values", value=text)
    return eps


# --- output -------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return "%d" % v
    return "%.17g" % v


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return [_jsonable(v.real), _jsonable(v.imag)]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def json_text(doc):
    doc = {"schema_version": SCHEMA_VERSION, **_jsonable(doc)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- frames and M -------------------------------------------------------------------

def _scheme(spec):
    tr = spec.truncation
    if tr is None:
        return None
    return TruncationScheme(tuple(float(p) for p in tr["points"]), int(tr.get("order", 6)))


def m_evaluator(spec: ProblemSpec):
    """``z -> M(z)`` for the frame and right endpoint described by ``spec``."""
    kind, fr = spec.frame["kind"], spec.frame
    tol = spec.ode_tol
    if kind == "radial":
        kappa, m = float(fr["kappa"]), float(fr.get("m", 0.0))
        frame = radial_frame(kappa, m)
        return lambda z: singular_M(frame, radial_weyl_solution(kappa, m, z))
    if kind == "perturbed":
        kappa, x_max = float(fr["kappa"]), float(fr["x_max"])
        P = parse_perturbation(fr.get("perturbation"))
        X = P.support[1] if P.support else 0.0
        if X >= x_max:
            raise SpecError("x_max must exceed the perturbation support")
        frame = perturbed_frame(kappa, P, x_max, tol)
        p = R.RadialParams(kappa, 0.0)
        pts = X + (x_max - X) * np.array([0.25, 0.5, 0.75])

        def M(z):
            u = ClosedFormSolution(lambda x: R.Psi_kappa(p, z, x), complex(z), (X, x_max))
            return singular_M(frame, u, pts)

        return M
    pot = spec.potential
    a, b = pot.interval.a, pot.interval.b
    if kind == "limit-circle":
        c = float(fr["c"])
        lam0 = float(fr.get("lambda0", 0.0))
        hi = b if math.isfinite(b) else c + float(fr.get("span", 1.0))
        sols = [integrate_span(pot, lam0, c, np.array(fr[k], dtype=complex), c, hi, tol)
                for k in ("phi0", "theta0")]
        frame = limit_circle_frame(pot, sols[0], sols[1], c, _scheme(spec), lam0=lam0, tol=tol)
        base = c
    else:
        if not math.isfinite(a):
            raise SpecError("a custom frame needs a regular left endpoint")
        hi = b if math.isfinite(b) else a + 2.0
        frame = regular_frame(pot, (a, hi), tol)
        base = a
    if math.isfinite(b):
        alpha = float(spec.frame.get("alpha_b", 0.0))
        lo = frame.domain[0]
        return lambda z: singular_M(frame, boundary_solution(pot, z, b, (lo, b), alpha, tol))
    c = 0.5 * (frame.domain[0] + frame.domain[1]) if base == a else base
    return lambda z: singular_M(frame, weyl_solution(pot, c, z, "+", frame.domain,
                                                     _scheme(spec), tol))


def _regular_problem(spec):
    pot = spec.potential
    if pot is None or spec.frame["kind"] not in ("custom", "regular"):
        raise SpecError("this command needs a custom frame with a potential")
    if not (pot.interval.a_finite and pot.interval.b_finite):
        raise SpecError("this command needs a finite interval with regular endpoints")
    return RegularProblem(pot, spec.ode_tol)


def _window(spec, args):
    sec = spec.section("eig")
    if args.lambda_grid is not None:
        lam = parse_lambda(args.lambda_grid)
        return (float(lam[0]), float(lam[-1])), sec
    w = sec.get("window")
    if not (isinstance(w, list) and len(w) == 2 and w[0] < w[1]):
        raise SpecError("eig.window = [lo, hi] or --lambda is required")
    return (float(w[0]), float(w[1])), sec


def _labels(eigs):
    """Index eigenvalues so that the smallest nonnegative one is ``n = 0``."""
    first = int(np.searchsorted(eigs, -1e-9 * max(1.0, np.abs(eigs).max(initial=0.0))))
    return np.arange(eigs.size) - first


# --- subcommands -------------------------------------------------------------------

@dataclass
class Result:
    files: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def cmd_mfunc(spec, args, res):
    if args.z_grid is None:
        raise SpecError("mfunc needs --z-grid")
    zs = parse_z_grid(args.z_grid)
    M = m_evaluator(spec)
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        vals = list(pool.map(lambda z: complex(M(z)), zs))
    rows = [(z.real, z.imag, v.real, v.imag) for z, v in zip(zs, vals)]
    res.files["mfunc.csv"] = csv_text(HEADERS["mfunc"], rows)


def cmd_density(spec, args, res):
    if args.lambda_grid is None:
        raise SpecError("density needs --lambda")
    lam = parse_lambda(args.lambda_grid)
    if lam.size < 2:
        raise SpecError("--lambda needs at least two points")
    eps = parse_eps_ladder(args.eps_ladder) if args.eps_ladder else DEFAULT_EPS_LADDER
    M = m_evaluator(spec)
    est = stieltjes_invert(M, float(lam[0]), float(lam[-1]), eps, n_lam=lam.size)
    rows = zip(est.lam, est.density, est.error)
    res.files["density.csv"] = csv_text(HEADERS["density"], rows)
    res.files["density.json"] = json_text({
        "window": est.window, "eps_ladder": list(eps), "mass": est.mass,
        "mass_error": est.mass_error, "masses": est.masses,
        "atom_candidates": [float(l) for l, f in zip(est.lam, est.atom_flags) if f],
        "consistent": est.consistent})
    if not est.consistent:
        res.warnings.append("density and window mass disagree")


def cmd_eig(spec, args, res):
    pr = _regular_problem(spec)
    window, sec = _window(spec, args)
    scan = pr.spectrum(window, grid=int(sec.get("grid", 128)), xtol=float(sec.get("xtol", 1e-10)))
    meas = pr.measure(scan.eigenvalues)
    rows = zip(_labels(scan.eigenvalues), meas.atoms, meas.gamma_sq)
    res.files["eig.csv"] = csv_text(HEADERS["eig"], rows)
    res.files["eig.json"] = json_text({
        "window": window, "count": int(scan.eigenvalues.size),
        "suspected_missed": scan.suspected_missed, "gap_ratio": scan.gap_ratio,
        "double_root_candidates": scan.double_root_candidates,
        "grid_points": scan.grid_points})
    if scan.suspected_missed:
        res.warnings.append("suspected missed roots")
    if scan.double_root_candidates:
        res.warnings.append("double-root candidates without sign change")


def _read_samples(spec, samples, cols):
    if isinstance(samples, str):
        data = np.genfromtxt(spec.base_dir / samples, delimiter=",", names=True)
        names = data.dtype.names or ()
        if not all(c in names for c in cols):
            raise SpecError("samples file lacks columns", need=list(cols), have=list(names))
        out = [np.atleast_1d(data[c]).astype(float) for c in cols]
        if not all(np.all(np.isfinite(v)) for v in out):
            raise SpecError("samples file holds non-numeric or non-finite values", path=samples)
        return out
    if not isinstance(samples, dict) or not all(c in samples for c in cols[:2]):
        raise SpecError("transform.samples needs columns", need=list(cols))
    out = [np.asarray(samples.get(c, np.zeros(len(samples[cols[0]]))), dtype=float) for c in cols]
    if len({v.size for v in out}) != 1:
        raise SpecError("sample columns differ in length")
    if not all(np.all(np.isfinite(v)) for v in out):
        raise SpecError("samples hold non-finite values")
    return out


def cmd_transform(spec, args, res):
    pr = _regular_problem(spec)
    sec = spec.section("transform")
    window, eig_sec = _window(spec, args)
    scan = pr.spectrum(window, grid=int(eig_sec.get("grid", 128)))
    meas = pr.measure(scan.eigenvalues)
    if scan.suspected_missed:
        res.warnings.append("suspected missed roots")
    direction = sec.get("direction", "forward")
    if direction == "forward":
        x, f1, f2 = _read_samples(spec, sec.get("samples"), ("x", "f1", "f2"))
        if x.size < 2 or np.any(np.diff(x) <= 0):
            raise SpecError("sample abscissae must increase")

        def f(nodes):
            inside = (nodes >= x[0]) & (nodes <= x[-1])
            return np.array([np.where(inside, np.interp(nodes, x, f1), 0.0),
                             np.where(inside, np.interp(nodes, x, f2), 0.0)])

        fhat = forward_transform(pr.frame, meas, f)
        res.files["transform.csv"] = csv_text(HEADERS["transform"], zip(meas.atoms, fhat.real))
    elif direction == "inverse":
        lam, fhat = _read_samples(spec, sec.get("samples"), ("lambda_n", "fhat"))
        if lam.size != meas.atoms.size or np.abs(lam - meas.atoms).max(initial=0) > 1e-6:
            raise SpecError("inverse transform samples must list the computed eigenvalues",
                            computed=meas.atoms.tolist())
        xs = np.asarray(sec.get("x") or np.linspace(*pr.span, 201), dtype=float)
        g = inverse_transform(pr.frame, meas, fhat, xs).values.real
        res.files["transform.csv"] = csv_text(HEADERS["inverse"], zip(xs, g[0], g[1]))
    else:
        raise SpecError("transform.direction must be forward or inverse")


def cmd_radial(spec, args, res):
    fr = spec.frame if spec is not None and spec.frame["kind"] == "radial" else {}
    kappa = args.kappa if args.kappa is not None else fr.get("kappa")
    m = args.m if args.m is not None else fr.get("m", 0.0)
    if kappa is None:
        raise SpecError("radial needs --kappa or a radial frame")
    if kappa < 0 or m < 0:
        raise SpecError("kappa and m must be nonnegative")
    if args.lambda_grid is None and args.z_grid is None:
        raise SpecError("radial needs --lambda and/or --z-grid")
    p = R.RadialParams(float(kappa), float(m))
    if args.lambda_grid is not None:
        lam = parse_lambda(args.lambda_grid)
        dens = np.array([R.rho_kappa_density(p, l) for l in lam], dtype=float)
        res.files["radial.csv"] = csv_text(HEADERS["radial"], zip(lam, dens))
    if args.z_grid is not None:
        zs = parse_z_grid(args.z_grid)
        rows = [(z.real, z.imag, v.real, v.imag)
                for z, v in ((z, complex(R.M_kappa(p, z))) for z in zs)]
        res.files["radial_M.csv"] = csv_text(HEADERS["mfunc"], rows)


def cmd_perturbed(spec, args, res):
    fr = spec.frame
    if fr["kind"] != "perturbed":
        raise SpecError("perturbed needs a perturbed frame")
    kappa, x_max = float(fr["kappa"]), float(fr["x_max"])
    P = parse_perturbation(fr.get("perturbation"))
    sec = spec.section("perturbed")
    zr = sec.get("z", [0.0, 1.0])
    z = complex(float(zr[0]), float(zr[1]))
    xs = np.asarray(sec.get("x") or np.linspace(x_max / 50, x_max, 50), dtype=float)
    if np.any(xs <= 0) or np.any(xs > x_max):
        raise SpecError("perturbed.x must lie in (0, x_max]")
    sol = neumann_solve(kappa, P, z, x_max)
    phi = sol(xs)
    res.files["perturbed.csv"] = csv_text(
        HEADERS["perturbed"], zip(xs, phi[0].real, phi[0].imag, phi[1].real, phi[1].imag))
    pot = sol.potential()
    rx = [residual(pot, sol, float(x), relative=True) for x in xs[xs < x_max * 0.999]]
    asym = asymptotics_check(kappa, P, float(sec.get("x_asym", min(x_max, 1.0))),
                             radii=tuple(sec.get("radii", (10, 20, 50, 100, 200))))
    decay = factorial_decay_ok(sol)
    res.files["perturbed.json"] = json_text({
        "kappa": kappa, "z": z, "x_max": x_max, "n_terms": sol.n_terms,
        "increments": sol.increments, "tail_estimate": sol.tail_estimate,
        "fitted_C": sol.fitted_C, "factorial_decay": decay,
        "ode_residual": max(rx) if rx else 0.0,
        "volterra_residual": float(sol.volterra_residuals()[1].max()),
        "asymptotics": {"radii": asym["radii"], "defect": asym["defect"],
                        "ratio": asym["ratio"], "decreasing": asym["decreasing"]}})
    if not decay:
        res.warnings.append("Neumann increments exceed the factorial bound")


def cmd_bm(spec, args, res):
    sec = spec.section("bm")
    kappa = float(sec.get("kappa", spec.frame.get("kappa", 0.0)))
    c = _num(sec, "c", required=True)
    Pa = parse_perturbation(sec.get("a"))
    Pb = parse_perturbation(sec["b"]) if "b" in sec else bump_after(c)
    radii = np.asarray(sec.get("radii", np.linspace(10, 60, 11)), dtype=float)
    scan = bm_decay_scan(kappa, Pa, Pb, c, radii=radii)
    doc = scan.to_json()
    doc.pop("schema_version")
    doc["rate_over_2c"] = scan.rate / (2 * c) if scan.rate is not None else None
    doc["notes"] = scan.notes
    res.files["bm.json"] = json_text(doc)
    if scan.indeterminate:
        res.warnings.append("decay rate indeterminate")


def cmd_susy(spec, args, res):
    sec = spec.section("susy") if spec is not None else {}
    fr = spec.frame if spec is not None and spec.frame["kind"] == "radial" else {}
    kappa = args.kappa if args.kappa is not None else sec.get("kappa", fr.get("kappa"))
    m = args.m if args.m is not None else sec.get("m", fr.get("m", 0.0))
    if kappa is None:
        raise SpecError("susy-check needs --kappa or a radial problem")
    zr = sec.get("z", [1.0, 1.0])
    z = complex(float(zr[0]), float(zr[1]))
    if "x" in sec:
        xs = np.asarray(sec["x"], dtype=float)
    else:
        rng = np.random.default_rng(args.seed)
        xs = np.sort(rng.uniform(0.1, 3.0, 30))
    if np.any(xs <= 0):
        raise SpecError("susy.x must be positive")
    span = (xs.min() / 2, xs.max() * 1.2)
    tol = float(spec.tolerances.get("susy", 1e-6)) if spec is not None else 1e-6
    sp = SusyProblem.radial(float(kappa), float(m))
    p = R.RadialParams(float(kappa), float(m))
    report = {}
    for name, fn in (("Phi", R.Phi_kappa), ("Theta", R.Theta_kappa), ("Psi", R.Psi_kappa)):
        report[name] = susy_factorization_residual(
            sp, z, lambda x, fn=fn: fn(p, z, x), xs, span=span, relative=True)
    relation = susy_weyl_relation_check(float(kappa), float(m), z)
    worst = max(r["max"] for r in report.values())
    res.files["susy.json"] = json_text({
        "kappa": kappa, "m": m, "z": z, "x": xs, "residual": worst,
        "factorization": report, "weyl_relation_defect": relation, "tolerance": tol})
    if worst > tol:
        res.warnings.append("factorization residual above tolerance")


COMMANDS = {
    "mfunc": cmd_mfunc, "density": cmd_density, "eig": cmd_eig, "transform": cmd_transform,
    "radial": cmd_radial, "perturbed": cmd_perturbed, "bm-check": cmd_bm, "susy-check": cmd_susy,
}
NEEDS_SPEC = {"mfunc", "density", "eig", "transform", "perturbed", "bm-check"}


def build_parser():
    ap = argparse.ArgumentParser(prog="diracweyl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--spec", type=Path)
        p.add_argument("--out", type=Path)
        p.add_argument("--z-grid", dest="z_grid")
        p.add_argument("--lambda", dest="lambda_grid")
        p.add_argument("--eps-ladder", dest="eps_ladder")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        if name in ("radial", "susy-check"):
            p.add_argument("--kappa", type=float)
            p.add_argument("--m", type=float)
    return ap


def _error(code, message, **context):
    sys.stderr.write(json.dumps({"code": code, "message": message,
                                 "context": _jsonable(context)}, sort_keys=True) + "\n")
    return code


def run(command, spec: ProblemSpec | None, args) -> int:
    """Run ``command``; writes outputs only if every one of them was produced."""
    res = Result()
    try:
        if args.threads < 1:
            raise SpecError("--threads must be >= 1")
        COMMANDS[command](spec, args, res)
    except SpecError as exc:
        return _error(EXIT_VALIDATION, str(exc), command=command, **exc.context)
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        return _error(EXIT_FAILURE, str(exc), command=command, error=type(exc).__name__)
    out = args.out or Path((spec.outputs.get("dir") if spec else None) or ".")
    if spec is not None and not out.is_absolute() and args.out is None:
        out = spec.base_dir / out
    for name, text in res.files.items():
        write_atomic(out / name, text)
    if res.warnings:
        return _error(EXIT_WARNING, "; ".join(res.warnings), command=command,
                      files=sorted(res.files))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = None
    try:
        if args.spec is not None:
            spec = load_spec(args.spec)
        elif args.command in NEEDS_SPEC:
            raise SpecError(f"{args.command} needs --spec")
    except SpecError as exc:
        return _error(EXIT_VALIDATION, str(exc), command=args.command, **exc.context)
    return run(args.command, spec, args)


if __name__ == "__main__":
    sys.exit(main())
