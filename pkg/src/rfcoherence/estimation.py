"""Parameter recovery: phase-resolved coincidence MLE and visibility-versus-flux fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize

from .correlations import coincidence_baseline, coincidence_side, coincidence_zero
from .emitter import EmitterParams, saturation_p1
from .errors import ConfigError, ModelValidityWarning, NumericError
from .traces import SCHEMA_VERSION, canonical_class, read_csv_rows

POPULATION_NAMES = ("p0", "p1", "p2")


class ConvergenceError(NumericError):
    pass


@dataclass
class FitResult:
    parameters: dict[str, float]
    errors: dict[str, float]
    objective: float  # log-likelihood (MLE) or residual norm (least squares)
    objective_kind: str
    converged: bool
    iterations: int
    model: str
    covariance: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(e < 0 or math.isnan(e) for e in self.errors.values()):
            raise NumericError("standard errors must be non-negative numbers")
        if all(k in self.parameters for k in POPULATION_NAMES):
            p = [self.parameters[k] for k in POPULATION_NAMES]
            if min(p) < -1e-12 or max(p) > 1 + 1e-12 or abs(sum(p) - 1.0) > 1e-9:
                raise NumericError(f"fitted populations {p} leave the simplex")

    def value(self, name: str) -> float:
        return self.parameters[name]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "type": "FitResult",
            "model": self.model,
            "parameters": {k: {"value": v, "stderr": self.errors.get(k)} for k, v in self.parameters.items()},
            self.objective_kind: self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
            "meta": self.meta,
        }


# ---------------------------------------------------------------------------
# coincidence MLE


@dataclass(frozen=True)
class CoincidencePoint:
    phi: float
    cls: str  # "zero" or "side"
    value: float  # coincidence normalized by the nondegenerate baseline
    error: float


def _as_points(data) -> list[CoincidencePoint]:
    pts = []
    for row in data:
        if isinstance(row, CoincidencePoint):
            pts.append(row)
            continue
        phi, cls, value, err = row
        c = canonical_class(cls)
        if c == "nondegenerate":
            continue  # normalized baseline carries no information
        c = "side" if c.startswith("side") else c
        if not err > 0:
            raise ConfigError(f"non-positive error {err} at phi={phi}")
        pts.append(CoincidencePoint(float(phi), c, float(value), float(err)))
    return pts


def coincidence_ratios(phi, p0, p1, p2, M, Mprime):
    """(C_zero / C0, C_side / C0) at the given phases."""
    c0 = coincidence_baseline(phi, p0, p1, M)
    return coincidence_zero(phi, p0, p1, p2, M, Mprime) / c0, coincidence_side(phi, p0, p1, M) / c0


def ratio_jacobian(phi, p1, p2, M, Mprime):
    """d(ratio)/d(p1, p2, M') with p0 = 1 - p1 - p2, for both ratios; shapes (n, 3)."""
    phi = np.asarray(phi, dtype=float)
    p0 = 1.0 - p1 - p2
    c, c2 = np.cos(phi), np.cos(2.0 * phi)
    a = p0 + p1
    c0 = 0.25 * p1 * p1 * (a * a - M * p0 * p0 * c * c)
    # partials with p0, p1, p2 treated as independent
    c0_p0 = 0.25 * p1 * p1 * (2.0 * a - 2.0 * M * p0 * c * c)
    c0_p1 = 0.5 * p1 * (a * a - M * p0 * p0 * c * c) + 0.5 * p1 * p1 * a
    side = coincidence_side(phi, p0, p1, M)
    side_p0 = p1 * p1 * (3.0 - 2.0 * M * c2) / 16.0
    side_p1 = p0 * p1 * (3.0 - 2.0 * M * c2) / 8.0 + 9.0 * p1 * p1 / 16.0
    q = p1 + 2.0 * p2
    zero = coincidence_zero(phi, p0, p1, p2, M, Mprime)
    zero_p0 = -p2 * M * c2 / 4.0
    zero_p1 = q * (1.0 - Mprime) / 4.0
    zero_p2 = (1.0 - p0 * M * c2) / 4.0 + q * (1.0 - Mprime) / 2.0
    zero_mp = -q * q / 8.0 * np.ones_like(phi)

    def total(d_p0, d_p1, d_p2):
        return d_p1 - d_p0, d_p2 - d_p0

    c0_d1, c0_d2 = total(c0_p0, c0_p1, 0.0)
    s_d1, s_d2 = total(side_p0, side_p1, 0.0)
    z_d1, z_d2 = total(zero_p0, zero_p1, zero_p2)

    def quotient(num, dn, dd):
        return dn / c0 - num * dd / (c0 * c0)

    jz = np.stack([quotient(zero, z_d1, c0_d1), quotient(zero, z_d2, c0_d2), zero_mp / c0], axis=-1)
    js = np.stack([quotient(side, s_d1, c0_d1), quotient(side, s_d2, c0_d2), np.zeros_like(phi)], axis=-1)
    return jz, js


def _softmax3(u1, u2):
    z = np.array([0.0, u1, u2])
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def _sigmoid(w):
    return 1.0 / (1.0 + math.exp(-w)) if w >= 0 else math.exp(w) / (1.0 + math.exp(w))


def _theta_to_natural(theta):
    p = _softmax3(theta[0], theta[1])
    p0 = 1.0 - p[1] - p[2]
    return p0, p[1], p[2], _sigmoid(theta[2])


def _natural_to_theta(p0, p1, p2, mprime, floor=1e-12):
    p0, p1, p2 = (max(v, floor) for v in (p0, p1, p2))
    mprime = min(max(mprime, 1e-9), 1 - 1e-9)
    return np.array([math.log(p1 / p0), math.log(p2 / p0), math.log(mprime / (1 - mprime))])


def _theta_jacobian(theta):
    """d(p1, p2, M')/d(theta)."""
    p = _softmax3(theta[0], theta[1])
    g = np.zeros((3, 3))
    # d p_i / d u_j = p_i (delta_ij - p_j) for the free logits u1 -> p1, u2 -> p2
    g[0, 0] = p[1] * (1 - p[1])
    g[0, 1] = -p[1] * p[2]
    g[1, 0] = -p[2] * p[1]
    g[1, 1] = p[2] * (1 - p[2])
    s = _sigmoid(theta[2])
    g[2, 2] = s * (1 - s)
    return g


class _CoincidenceProblem:
    def __init__(self, pts: list[CoincidencePoint], M: float):
        self.M = M
        self.phi_z = np.array([p.phi for p in pts if p.cls == "zero"])
        self.phi_s = np.array([p.phi for p in pts if p.cls == "side"])
        self.y = np.array([p.value for p in pts if p.cls == "zero"] + [p.value for p in pts if p.cls == "side"])
        self.sigma = np.array([p.error for p in pts if p.cls == "zero"] + [p.error for p in pts if p.cls == "side"])
        self.nz = self.phi_z.size

    def model(self, p0, p1, p2, mprime):
        z, _ = coincidence_ratios(self.phi_z, p0, p1, p2, self.M, mprime)
        _, s = coincidence_ratios(self.phi_s, p0, p1, p2, self.M, mprime)
        return np.concatenate([z, s])

    def residuals(self, theta):
        p0, p1, p2, mp = _theta_to_natural(theta)
        if p1 <= 0:
            return np.full(self.y.size, 1e6)
        return (self.model(p0, p1, p2, mp) - self.y) / self.sigma

    def natural_jacobian(self, p1, p2, mprime):
        jz, _ = ratio_jacobian(self.phi_z, p1, p2, self.M, mprime)
        _, js = ratio_jacobian(self.phi_s, p1, p2, self.M, mprime)
        return np.concatenate([jz, js]) / self.sigma[:, None]

    def jacobian(self, theta):
        _, p1, p2, mp = _theta_to_natural(theta)
        return self.natural_jacobian(p1, p2, mp) @ _theta_jacobian(theta)

    def cost(self, theta):
        r = self.residuals(theta)
        return 0.5 * float(r @ r)

    def log_likelihood(self, theta):
        return -self.cost(theta) - float(np.sum(np.log(self.sigma * math.sqrt(2 * math.pi))))


def _validate_coincidence_data(pts: list[CoincidencePoint]):
    if len({round(p.phi, 12) for p in pts}) < 4:
        raise ConfigError("need at least 4 distinct phase points")
    classes = {p.cls for p in pts}
    if not {"zero", "side"} <= classes:
        raise ConfigError("both the zero and the side classes are required")
    vals = np.array([p.value for p in pts])
    if np.ptp(vals) == 0.0:
        raise ConfigError("degenerate data: all values are equal")
    if not np.all(np.isfinite(vals)):
        raise ConfigError("non-finite coincidence values")


def _start_points(n: int, rng: np.random.Generator):
    """Spread initial guesses over the simplex and M' in (0.5, 1)."""
    starts = [(0.5, 0.45, 0.05, 0.9), (0.9, 0.099, 0.001, 0.95), (0.3, 0.65, 0.05, 0.8)]
    while len(starts) < n:
        p = rng.dirichlet([2.0, 2.0, 0.5])
        starts.append((p[0], p[1], p[2], rng.uniform(0.5, 0.999)))
    return [_natural_to_theta(*s) for s in starts[:n]]


def mle_fit_coincidences(data, fixed_M: float, n_starts: int = 8, seed: int = 0,
                         refine: bool = True) -> FitResult:
    """Maximum-likelihood {p0, p1, p2, M'} from normalized C(0)/C0 and C(+-tau)/C0 versus phi.

    ``data`` rows are (phi, class, value, error). The likelihood is Gaussian in
    the normalized values. Populations are softmax coordinates and M' a logistic
    one, so every iterate is a valid parameter set. Nelder-Mead runs from
    ``n_starts`` initial points; the best one is polished by least squares with
    the analytic Jacobian. Standard errors come from the curvature in (p1, p2, M')
    with p0 = 1 - p1 - p2.
    """
    if not 0.0 <= fixed_M <= 1.0:
        raise ConfigError("fixed M must lie in [0, 1]")
    if n_starts < 8:
        raise ConfigError("use at least 8 starting points")
    pts = _as_points(data)
    _validate_coincidence_data(pts)
    prob = _CoincidenceProblem(pts, fixed_M)
    rng = np.random.default_rng(seed)

    runs = []
    total_iter = 0
    for theta0 in _start_points(n_starts, rng):
        res = minimize(prob.cost, theta0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000, "maxfev": 8000})
        total_iter += int(res.nit)
        if np.isfinite(res.fun):
            runs.append(res)
    if not runs:
        raise ConvergenceError("no start converged")
    best = min(runs, key=lambda r: r.fun)
    theta = best.x
    converged = bool(best.success)
    if refine:
        ls = least_squares(prob.residuals, theta, jac=prob.jacobian, method="lm",
                           xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        total_iter += int(ls.nfev)
        if ls.status > 0 and prob.cost(ls.x) <= prob.cost(theta) + 1e-15:
            theta = ls.x
            converged = True
    if not converged and prob.cost(theta) > 1e-8 * prob.y.size:
        raise ConvergenceError("optimizer did not converge from any start")

    p0, p1, p2, mp = _theta_to_natural(theta)
    jn = prob.natural_jacobian(p1, p2, mp)
    cov = _safe_inverse(jn.T @ jn)
    se1, se2, sem = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    se0 = math.sqrt(max(cov[0, 0] + cov[1, 1] + 2 * cov[0, 1], 0.0))
    return FitResult(
        parameters={"p0": p0, "p1": p1, "p2": p2, "Mprime": mp},
        errors={"p0": se0, "p1": float(se1), "p2": float(se2), "Mprime": float(sem)},
        objective=prob.log_likelihood(theta), objective_kind="log_likelihood",
        converged=converged, iterations=total_iter, model="hom-coincidence-ratios",
        covariance=cov,
        meta={"M": fixed_M, "n_points": len(pts), "n_starts": n_starts,
              "chi2": 2.0 * prob.cost(theta), "covariance_order": ["p1", "p2", "Mprime"]},
    )


def _safe_inverse(fisher: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(fisher)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(fisher)


def synthetic_coincidences(params: EmitterParams, phis, noise: float = 0.0,
                           rng: np.random.Generator | None = None, error_floor: float = 1e-300):
    """Rows (phi, class, value, error) from the forward model, optionally with relative Gaussian noise."""
    phis = np.asarray(phis, dtype=float)
    z, s = coincidence_ratios(phis, params.p0, params.p1, params.p2, params.M, params.Mprime)
    rows = []
    for cls, vals in (("zero", z), ("side", s)):
        err = np.maximum(np.abs(vals) * (noise if noise > 0 else 1e-3), error_floor)
        if noise > 0:
            if rng is None:
                raise ConfigError("noisy data needs a random generator")
            vals = vals + err * rng.standard_normal(vals.size)
        rows.extend((float(p), cls, float(v), float(e)) for p, v, e in zip(phis, vals, err))
    return rows


# ---------------------------------------------------------------------------
# visibility versus flux


@dataclass(frozen=True)
class RabiModel:
    """Rabi frequency Omega = Omega_scale * sqrt(nbar) in rad/s; visibility ~ 1 / (1 + Omega^2 T1 T2)."""

    Omega_scale: float
    T1: float = 67.2e-12
    T2: float = 1.62 * 67.2e-12

    def __post_init__(self):
        if not (self.Omega_scale > 0 and self.T1 > 0 and self.T2 > 0):
            raise ConfigError("RabiModel fields must be positive")

    @classmethod
    def from_x(cls, x: float, T1: float = 67.2e-12, T2: float | None = None) -> "RabiModel":
        T2 = 1.62 * T1 if T2 is None else T2
        return cls(math.sqrt(x / (T1 * T2)), T1, T2)

    @property
    def x(self) -> float:
        return self.Omega_scale ** 2 * self.T1 * self.T2

    def omega(self, nbar):
        return self.Omega_scale * np.sqrt(np.asarray(nbar, dtype=float))

    def visibility(self, nbar, V0: float):
        om = self.omega(nbar)
        return V0 / (1.0 + om * om * self.T1 * self.T2)


def visibility_saturation(nbar, V0: float, x: float):
    return V0 / (1.0 + x * np.asarray(nbar, dtype=float))


VISIBILITY_MODELS = ("saturation", "rabi")


def fit_visibility_curve(data, model: str = "saturation", T1: float = 67.2e-12,
                         T2: float | None = None) -> FitResult:
    """Least squares for V = V0 / (1 + x nbar) or its Rabi form V0 / (1 + Omega^2 T1 T2).

    ``data`` rows are (nbar, visibility) or (nbar, visibility, error). The Rabi
    form uses Omega^2 = Omega_scale^2 nbar, so both forms give the same curve when
    x = Omega_scale^2 T1 T2. T2 defaults to 1.62 T1.
    """
    if model not in VISIBILITY_MODELS:
        raise ConfigError(f"unknown visibility model {model!r}; expected one of {VISIBILITY_MODELS}")
    arr = [tuple(r) for r in data]
    if any(len(r) not in (2, 3) for r in arr):
        raise ConfigError("rows must be (nbar, visibility[, error])")
    n = np.array([r[0] for r in arr], dtype=float)
    v = np.array([r[1] for r in arr], dtype=float)
    sig = np.array([r[2] if len(r) == 3 else 1.0 for r in arr], dtype=float)
    _check_spread(n)
    if np.any(sig <= 0):
        raise ConfigError("visibility errors must be positive")
    T2 = 1.62 * T1 if T2 is None else T2
    scale = math.sqrt(T1 * T2)  # y = Omega_scale * sqrt(T1 T2), so x = y^2

    # linearized start: 1/V = 1/V0 + (x/V0) nbar
    slope, icpt = np.polyfit(n, 1.0 / np.clip(v, 1e-12, None), 1)
    v0_init = 1.0 / icpt if icpt > 0 else float(v.max())
    x_init = max(slope * v0_init, 1e-6)

    if model == "saturation":
        def curve(q):
            return visibility_saturation(n, q[0], q[1])

        def jac(q):
            den = 1.0 + q[1] * n
            return np.column_stack([1.0 / den, -q[0] * n / den ** 2]) / sig[:, None]
        q0 = np.array([v0_init, x_init])
    else:
        def curve(q):
            return visibility_saturation(n, q[0], q[1] * q[1])

        def jac(q):
            den = 1.0 + q[1] * q[1] * n
            return np.column_stack([1.0 / den, -2.0 * q[0] * q[1] * n / den ** 2]) / sig[:, None]
        q0 = np.array([v0_init, math.sqrt(x_init)])

    res = least_squares(lambda q: (curve(q) - v) / sig, q0, jac=jac, method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000)
    if res.status <= 0:
        raise ConvergenceError(f"visibility fit failed: {res.message}")
    q = res.x
    resid = curve(q) - v
    dof = max(n.size - 2, 1)
    s2 = float(np.sum((resid / sig) ** 2)) / dof if len(arr[0]) == 2 else 1.0
    cov = _safe_inverse(res.jac.T @ res.jac) * s2
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if model == "saturation":
        params = {"V0": float(q[0]), "x": float(q[1])}
        errs = {"V0": float(se[0]), "x": float(se[1])}
    else:
        om = float(abs(q[1]) / scale)
        params = {"V0": float(q[0]), "Omega_scale": om, "x": float(q[1] ** 2)}
        errs = {"V0": float(se[0]), "Omega_scale": float(se[1] / scale), "x": float(2 * abs(q[1]) * se[1])}
    return FitResult(params, errs, float(np.linalg.norm(resid)), "residual_norm", True, int(res.nfev),
                     f"visibility-{model}",
                     covariance=cov,
                     meta={"T1": T1, "T2": T2, "residuals": resid.tolist(), "n_points": int(n.size)})


def _check_spread(nbar: np.ndarray):
    if nbar.size < 3 or np.unique(nbar).size < 3:
        raise ConfigError("insufficient spread in nbar: need at least 3 distinct points")
    if np.any(nbar < 0) or not np.all(np.isfinite(nbar)):
        raise ConfigError("nbar values must be finite and non-negative")
    lo = nbar[nbar > 0].min() if np.any(nbar > 0) else 0.0
    if lo == 0.0 or nbar.max() < 10.0 * lo:
        raise ConfigError("insufficient spread in nbar: points must span at least a decade")


# ---------------------------------------------------------------------------
# filtered g2


def infer_p1_from_g2(g2_zero_filtered: float, nbar: float | None = None, eta_ab: float = 0.97,
                     rtol: float = 0.25) -> float:
    """p1 = 1/sqrt(g2(0)) of the phi = pi filtered output.

    With ``nbar`` the result is compared with the saturation law and a
    ModelValidityWarning is raised if they disagree by more than ``rtol``.
    """
    g = float(g2_zero_filtered)
    if not g >= 1.0:
        raise ConfigError(f"g2={g} below 1 lies outside the model range")
    p1 = 1.0 / math.sqrt(g)
    if nbar is not None:
        expected = saturation_p1(nbar, eta_ab)
        if abs(p1 - expected) > rtol * expected:
            warnings.warn(f"p1={p1:.4g} from g2 disagrees with the saturation law "
                          f"p1={expected:.4g} at nbar={nbar}", ModelValidityWarning, stacklevel=2)
    return p1


# ---------------------------------------------------------------------------
# input files


def load_coincidence_csv(path: str | Path) -> list[tuple[float, str, float, float]]:
    """Rows of phi_radians, class, value, error; malformed rows are reported by line number."""
    header, rows = read_csv_rows(path)
    need = ["phi_radians", "class", "value", "error"]
    if header[:4] != need:
        raise ConfigError(f"{path}: expected columns {','.join(need)}, got {','.join(header)}")
    out = []
    for lineno, f in rows:
        try:
            if len(f) < 4:
                raise ValueError("too few fields")
            cls = canonical_class(f[1])
            phi, val, err = float(f[0]), float(f[2]), float(f[3])
            if not (math.isfinite(phi) and math.isfinite(val) and err > 0):
                raise ValueError("non-finite value or non-positive error")
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}: malformed row at line {lineno}: {exc}") from None
        out.append((phi, cls, val, err))
    if not out:
        raise ConfigError(f"{path}: no data rows")
    return out


def load_visibility_csv(path: str | Path) -> list[tuple[float, ...]]:
    header, rows = read_csv_rows(path)
    if header[:2] != ["nbar", "visibility"]:
        raise ConfigError(f"{path}: expected columns nbar,visibility[,error], got {','.join(header)}")
    with_err = len(header) >= 3 and header[2] == "error"
    out = []
    for lineno, f in rows:
        try:
            vals = tuple(float(x) for x in f[: 3 if with_err else 2])
            if len(vals) < (3 if with_err else 2) or not all(math.isfinite(x) for x in vals):
                raise ValueError
        except ValueError:
            raise ConfigError(f"{path}: malformed row at line {lineno}") from None
        out.append(vals)
    return out
