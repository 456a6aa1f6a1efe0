"""Least-squares panel estimation with fixed effects and robust covariance.

Region effects are absorbed by within-group demeaning; time effects enter as
explicit dummies with the first year as baseline. The least-squares core is
QR-based. Covariance is either classical or a cluster-by-region sandwich
with the small-sample factor G/(G-1) * (N-1)/(N-K), where K counts fitted
columns plus absorbed region effects (the same convention used for degrees
of freedom and t-distribution p-values).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import t as t_dist

from .errors import (
    MissingWeights,
    RankDeficient,
    RegionOrderMismatch,
    SingleCluster,
    UnknownVariable,
    ZeroDof,
)
from .panel import PanelDataset
from .weights import SpatialWeights, lag_values

COVARIANCE_KINDS = ("classical", "cluster_by_region")

# Table-style significance thresholds: *** 0.01, ** 0.05, * 0.10
STAR_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))


def significance_stars(p: float) -> str:
    for level, stars in STAR_LEVELS:
        if p < level:
            return stars
    return ""


@dataclass(frozen=True)
class Term:
    """One regressor: a variable, optionally squared, optionally spatially lagged."""

    name: str
    squared: bool = False
    lag: bool = False

    @property
    def label(self) -> str:
        lbl = self.name + ("^2" if self.squared else "")
        return f"sl{lbl}" if self.lag else lbl


def parse_term_label(label: str) -> Term:
    """Inverse of Term.label ("slFWCI" -> lag of FWCI, "FWCI^2" -> square)."""
    lag = label.startswith("sl")
    if lag:
        label = label[2:]
    squared = label.endswith("^2")
    if squared:
        label = label[:-2]
    return Term(label, squared=squared, lag=lag)


@dataclass(frozen=True)
class ModelSpec:
    """Declarative regression specification."""

    dependent: str
    regressors: tuple[Term, ...]
    intercept: bool = False
    region_effects: bool = False
    time_dummies: bool = False
    covariance: str = "cluster_by_region"

    def __post_init__(self):
        if self.intercept and self.region_effects:
            raise ValueError(
                "intercept and region_effects are mutually exclusive "
                "(fixed effects absorb the constant)"
            )
        if self.covariance not in COVARIANCE_KINDS:
            raise ValueError(f"covariance must be one of {COVARIANCE_KINDS}")
        terms = tuple(self.regressors)
        if len({(t.name, t.squared, t.lag) for t in terms}) != len(terms):
            raise ValueError("duplicate regressor terms")
        object.__setattr__(self, "regressors", terms)

    def needs_weights(self) -> bool:
        return any(t.lag for t in self.regressors)


@dataclass(frozen=True)
class Design:
    """Stacked design matrix, response, and region cluster labels.

    Rows are region-major, year-minor. Columns: regressor terms in spec
    order, then T-1 time dummies (first year baseline), then the intercept.
    """

    X: np.ndarray
    y: np.ndarray
    clusters: np.ndarray
    column_labels: tuple[str, ...]
    region_ids: tuple[str, ...]
    years: tuple[int, ...]


def _variable_checked(d: PanelDataset, name: str) -> np.ndarray:
    values = d.var(name)
    if np.isnan(values).any():
        i, j = [ax[0] for ax in np.nonzero(np.isnan(values))]
        raise UnknownVariable(
            f"variable {name!r} has missing cells (first at "
            f"{d.region_ids[i]}, {d.years[j]}); validate balance before fitting"
        )
    return values


def build_design(
    d: PanelDataset, spec: ModelSpec, w: SpatialWeights | None = None
) -> Design:
    """Assemble the stacked design matrix and response for a ModelSpec."""
    if spec.needs_weights() and w is None:
        raise MissingWeights("spec contains spatial-lag terms but no weights given")
    if w is not None and w.regions != d.region_ids:
        raise RegionOrderMismatch("weights regions do not match dataset regions")

    n, t = d.n_regions, d.n_years
    y = _variable_checked(d, spec.dependent).reshape(-1)

    columns: list[np.ndarray] = []
    labels: list[str] = []
    for term in spec.regressors:
        values = _variable_checked(d, term.name)
        if term.squared:
            values = values**2
        if term.lag:
            values = lag_values(w, values)
        columns.append(values.reshape(-1))
        labels.append(term.label)
    if spec.time_dummies:
        for j, year in enumerate(d.years[1:], start=1):
            dummy = np.zeros((n, t))
            dummy[:, j] = 1.0
            columns.append(dummy.reshape(-1))
            labels.append(f"year_{year}")
    if spec.intercept:
        columns.append(np.ones(n * t))
        labels.append("const")
    if not columns:
        raise ValueError("empty design: no regressors, dummies, or intercept")

    X = np.column_stack(columns)
    clusters = np.repeat(np.arange(n), t)
    return Design(X, y, clusters, tuple(labels), d.region_ids, d.years)


def within_transform(
    X: np.ndarray, y: np.ndarray, clusters: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Subtract per-cluster means from every column and the response."""
    Xd = X.astype(float).copy()
    yd = y.astype(float).copy()
    for g in np.unique(clusters):
        mask = clusters == g
        Xd[mask] -= Xd[mask].mean(axis=0)
        yd[mask] -= yd[mask].mean()
    return Xd, yd


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    ssr: float
    r_matrix: np.ndarray  # R from the QR factorization, for (X'X)^-1


def ols_fit(X: np.ndarray, y: np.ndarray, labels=None) -> OlsFit:
    """Least squares via QR; rank deficiency is a hard error.

    The first column whose R diagonal collapses is reported as linearly
    dependent on the columns before it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < X.shape[1]:
        raise ValueError(f"need at least as many rows as columns, got {X.shape}")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    tol = max(X.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    dependent = np.nonzero(diag <= tol)[0]
    if dependent.size:
        j = int(dependent[0])
        name = labels[j] if labels is not None else f"column {j}"
        raise RankDeficient(
            f"design matrix is rank deficient: {name} is collinear with "
            "preceding columns"
        )
    coef = solve_triangular(r, q.T @ y)
    fitted = X @ coef
    residuals = y - fitted
    return OlsFit(
        coefficients=coef,
        residuals=residuals,
        fitted=fitted,
        ssr=float(residuals @ residuals),
        r_matrix=r,
    )


def _xtx_inverse(fit: OlsFit) -> np.ndarray:
    r_inv = solve_triangular(fit.r_matrix, np.eye(fit.r_matrix.shape[0]))
    return r_inv @ r_inv.T


def classical_cov(fit: OlsFit, X: np.ndarray, n_absorbed: int = 0) -> np.ndarray:
    """s^2 (X'X)^-1 with s^2 = ssr / dof, dof adjusted for absorbed effects."""
    n, k = X.shape
    dof = n - k - n_absorbed
    if dof <= 0:
        raise ZeroDof(f"no residual degrees of freedom (n={n}, k={k}+{n_absorbed})")
    return (fit.ssr / dof) * _xtx_inverse(fit)


def cluster_robust_cov(
    fit: OlsFit, X: np.ndarray, clusters: np.ndarray, n_absorbed: int = 0
) -> np.ndarray:
    """Cluster sandwich (X'X)^-1 (sum_g X_g'u_g u_g'X_g) (X'X)^-1.

    Scaled by G/(G-1) * (N-1)/(N-K) with K = fitted columns + absorbed
    region effects.
    """
    n, k = X.shape
    groups = np.unique(clusters)
    g = groups.size
    if g < 2:
        raise SingleCluster("cluster-robust covariance needs at least 2 clusters")
    big_k = k + n_absorbed
    if n - big_k <= 0:
        raise ZeroDof(f"no residual degrees of freedom (n={n}, K={big_k})")
    meat = np.zeros((k, k))
    for group in groups:
        mask = clusters == group
        score = X[mask].T @ fit.residuals[mask]
        meat += np.outer(score, score)
    bread = _xtx_inverse(fit)
    factor = (g / (g - 1)) * ((n - 1) / (n - big_k))
    return factor * bread @ meat @ bread


@dataclass(frozen=True)
class FitResult:
    """Estimated coefficients, inference, and fit statistics for one spec."""

    spec: ModelSpec
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    t_stats: dict[str, float]
    p_values: dict[str, float]
    residuals: np.ndarray
    n_obs: int
    n_params: int
    n_absorbed: int
    dof: int
    ssr: float
    r_squared_within: float
    r_squared_overall: float
    aic: float
    region_effects_absorbed: bool
    covariance: str
    column_labels: tuple[str, ...] = field(default=())

    def stars(self, label: str) -> str:
        return significance_stars(self.p_values[label])

    def conf_int(self, label: str, level: float = 0.95) -> tuple[float, float]:
        half = t_dist.ppf(0.5 + level / 2, self.dof) * self.std_errors[label]
        est = self.coefficients[label]
        return est - half, est + half

    def to_dict(self) -> dict:
        return {
            "model": {
                "dependent": self.spec.dependent,
                "intercept": self.spec.intercept,
                "region_effects": self.spec.region_effects,
                "time_dummies": self.spec.time_dummies,
            },
            "coefficients": [
                {
                    "term": label,
                    "estimate": self.coefficients[label],
                    "std_error": self.std_errors[label],
                    "t": self.t_stats[label],
                    "p": self.p_values[label],
                    "stars": self.stars(label),
                }
                for label in self.column_labels
            ],
            "fit": {
                "n_obs": self.n_obs,
                "n_params": self.n_params,
                "dof": self.dof,
                "ssr": self.ssr,
                "r_squared_within": self.r_squared_within,
                "r_squared_overall": self.r_squared_overall,
                "aic": self.aic,
            },
            "metadata": {
                "covariance": self.covariance,
                "absorbed_region_effects": self.n_absorbed,
                "dof_convention": "n_obs - n_params - absorbed_region_effects",
                "p_value_distribution": "t",
                "cluster_small_sample_factor": "G/(G-1) * (N-1)/(N-K), K = n_params + absorbed",
            },
        }


def _squared_correlation(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if denom == 0:
        return 0.0
    return float(a @ b) ** 2 / denom**2


def fit_model(
    d: PanelDataset, spec: ModelSpec, w: SpatialWeights | None = None
) -> FitResult:
    """Estimate a ModelSpec: design -> (demean) -> QR least squares -> inference."""
    design = build_design(d, spec, w)
    X, y = design.X, design.y
    n_obs, k = X.shape

    if spec.region_effects:
        Xf, yf = within_transform(X, y, design.clusters)
        n_absorbed = len(design.region_ids)
    else:
        Xf, yf = X, y
        n_absorbed = 0

    fit = ols_fit(Xf, yf, design.column_labels)
    dof = n_obs - k - n_absorbed
    if dof <= 0:
        raise ZeroDof(f"no residual degrees of freedom (n={n_obs}, k={k}+{n_absorbed})")

    if spec.covariance == "classical":
        cov = classical_cov(fit, Xf, n_absorbed)
    else:
        cov = cluster_robust_cov(fit, Xf, design.clusters, n_absorbed)

    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, fit.coefficients / se, np.inf * np.sign(fit.coefficients))
    p_values = 2.0 * t_dist.sf(np.abs(t_stats), dof)

    # within R^2: on the (possibly demeaned) LS problem; centered when a
    # constant is present or implied by demeaning
    y_center = yf - yf.mean() if (spec.intercept or spec.region_effects) else yf
    tss = float(y_center @ y_center)
    r2_within = 1.0 - fit.ssr / tss if tss > 0 else 0.0
    # overall R^2: squared correlation of Xb with the raw response
    r2_overall = _squared_correlation(X @ fit.coefficients, y)

    k_aic = k + n_absorbed
    aic = (
        float("-inf")
        if fit.ssr <= 0
        else n_obs * math.log(fit.ssr / n_obs) + 2 * k_aic
    )

    labels = design.column_labels
    return FitResult(
        spec=spec,
        coefficients=dict(zip(labels, map(float, fit.coefficients))),
        std_errors=dict(zip(labels, map(float, se))),
        t_stats=dict(zip(labels, map(float, t_stats))),
        p_values=dict(zip(labels, map(float, p_values))),
        residuals=fit.residuals,
        n_obs=n_obs,
        n_params=k,
        n_absorbed=n_absorbed,
        dof=dof,
        ssr=fit.ssr,
        r_squared_within=r2_within,
        r_squared_overall=r2_overall,
        aic=aic,
        region_effects_absorbed=spec.region_effects,
        covariance=spec.covariance,
        column_labels=labels,
    )
