"""Least-squares fitting, autocorrelation-based MSE and grid-search order selection."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import models
from .errors import (
    GridSearchError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    PGVARError,
    RankDeficiencyError,
)
from .graph import make_product
from .metrics import rnmse
from .signal import SignalSequence, split_series


def _data(seq):
    return seq.data if isinstance(seq, SignalSequence) else np.asarray(seq, dtype=float)


def _default_targets(data, P, targets):
    if targets is None:
        targets = np.arange(P, data.shape[0])
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0 or targets.min() < P:
        raise InsufficientDataError(f"need target steps t >= P={P}; segment too short")
    return targets


# --- regression -----------------------------------------------------------------


def template(family, P, K=0, L=0, *, n_nodes, n_features=1, node_graph=None,
             feature_graph=None, product=None, separate_channels=False):
    """Zero-coefficient model fixing structure for :func:`build_regression` / :func:`fit`."""
    return models.zero_model(
        family, P, K, L, n_nodes=n_nodes, n_features=n_features, node_graph=node_graph,
        feature_graph=feature_graph, product=product, separate_channels=separate_channels,
    )


def _design_from_stack(stack, P, targets, entries, offset=0):
    blocks = []
    for p in range(P):
        cols = stack[:, targets - p - 1 - offset]  # (Q_lag, n_t, NF)
        if entries is not None:
            cols = cols[..., entries]
        blocks.append(cols.reshape(cols.shape[0], -1).T)
    return np.hstack(blocks)


def build_regression(seq, tmpl, targets=None, channel=None, stack=None):
    """Design matrix and target vector for a graph model.

    Rows run over ``(t, entry)`` for each target step ``t``; columns over
    ``(p, q)`` with ``q`` the per-lag regressor (``S^k``, ``S_prod^k`` or
    ``S^k kron S_F^l``), so ``Q`` equals the model's parameter count. For a
    GVAR, ``channel`` restricts rows to one feature channel.
    """
    data = _data(seq)
    if tmpl.family == "VAR":
        raise InvalidParameterError("use build_var_regression for the dense VAR")
    targets = _default_targets(data, tmpl.P, targets)
    if stack is None:
        stack = models.regressor_stack(tmpl, data)
    entries = None
    if channel is not None:
        entries = np.arange(channel, tmpl.dim, tmpl.n_features)
    design = _design_from_stack(stack, tmpl.P, targets, entries)
    target = data[targets] if entries is None else data[targets][:, entries]
    return design, target.ravel()


def build_var_regression(seq, P, targets=None):
    """``(n_t, P*NF)`` lagged design and ``(n_t, NF)`` multi-output target."""
    data = _data(seq)
    targets = _default_targets(data, P, targets)
    design = np.hstack([data[targets - p - 1] for p in range(P)])
    return design, data[targets]


@dataclass(frozen=True)
class SolveInfo:
    ridge_lambda: float
    condition_number: float


def default_ridge(gram):
    q = gram.shape[0]
    return 1e-8 * float(np.trace(gram)) / q


def least_squares_fit(design, target, ridge_lambda=0.0, return_info=False):
    """Ridge least squares via Cholesky on the normal equations.

    Minimizes ``||target - design a||^2 + lam ||a||^2`` and returns ``h = -a``
    (the sign used by the model recursions). ``ridge_lambda=None`` picks
    ``1e-8 * tr(G) / Q``. ``target`` may be 2-D for several outputs.
    """
    design = np.asarray(design, dtype=float)
    target = np.asarray(target, dtype=float)
    m, q = design.shape
    if ridge_lambda is not None and ridge_lambda < 0:
        raise InvalidParameterError("ridge_lambda must be nonnegative")
    gram = design.T @ design
    lam = default_ridge(gram) if ridge_lambda is None else float(ridge_lambda)
    if lam == 0.0 and m < q:
        raise RankDeficiencyError(f"{m} rows < {q} unknowns; add ridge regularization")
    eig = np.linalg.eigvalsh(gram)
    top = max(float(eig[-1]), 0.0)
    cond = (top + lam) / (float(eig[0]) + lam) if eig[0] + lam > 0 else np.inf
    if lam == 0.0 and (top == 0.0 or eig[0] <= top * q * np.finfo(float).eps * 10):
        raise RankDeficiencyError(
            f"normal equations are singular (condition {cond:.3g}); use ridge_lambda > 0"
        )
    g = gram + lam * np.eye(q)
    try:
        factor = linalg.cho_factor(g, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise RankDeficiencyError("Gram matrix is not positive definite; use ridge_lambda > 0") from None
    a = linalg.cho_solve(factor, design.T @ target, check_finite=False)
    h = -a
    if return_info:
        return h, SolveInfo(lam, float(cond))
    return h


@dataclass(frozen=True)
class FitResult:
    model: models.ModelParams
    residual_mse: float  # mean over target steps of ||x_t - xhat_t||^2
    residual_variance: float  # mean over all entries
    ridge_lambda: float
    condition_number: float
    n_targets: int


def fit(seq, tmpl, targets=None, ridge_lambda=None, stack=None):
    """Fit the coefficients of ``tmpl``'s structure on ``targets`` steps.

    ``stack`` is an optional precomputed ``regressor_stack(tmpl, data)`` (any
    ``K``/``L`` at least as large as the template's, already sliced).
    """
    data = _data(seq)
    targets = _default_targets(data, tmpl.P, targets)
    infos = []
    if tmpl.family == "VAR":
        design, target = build_var_regression(data, tmpl.P, targets)
        h, info = least_squares_fit(design, target, ridge_lambda, return_info=True)
        n = tmpl.dim
        A = np.stack([h[p * n:(p + 1) * n].T for p in range(tmpl.P)])
        model = models.ModelParams("VAR", tmpl.P, A, tmpl.n_nodes, tmpl.n_features)
        infos.append(info)
    else:
        if stack is None:
            stack = models.regressor_stack(tmpl, data)
        if tmpl.family == "GVAR" and tmpl.coeffs.shape[0] > 1:
            coeffs = []
            for f in range(tmpl.n_features):
                design, target = build_regression(data, tmpl, targets, channel=f, stack=stack)
                h, info = least_squares_fit(design, target, ridge_lambda, return_info=True)
                coeffs.append(h.reshape(tmpl.P, -1))
                infos.append(info)
            coeffs = np.stack(coeffs)
        else:
            design, target = build_regression(data, tmpl, targets, stack=stack)
            h, info = least_squares_fit(design, target, ridge_lambda, return_info=True)
            coeffs = h.reshape(tmpl.coeffs.shape)
            infos.append(info)
        model = models.with_coeffs(tmpl, coeffs)
    pred = models.predict_teacher_forced(model, data, targets, stack=stack)
    resid = data[targets] - pred
    return FitResult(
        model=model,
        residual_mse=float(np.sum(resid**2) / targets.size),
        residual_variance=float(np.mean(resid**2)),
        ridge_lambda=max(i.ridge_lambda for i in infos),
        condition_number=max(i.condition_number for i in infos),
        n_targets=int(targets.size),
    )


# --- autocorrelation form ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AutocorrelationSet:
    """``R[p] = mean_t x_t x_{t-p}^T`` for ``-P <= p <= P`` over ``t = P..T-1``.

    ``window_moments[a, b] = mean_t x_{t-a} x_{t-b}^T`` (``0 <= a, b <= P``)
    over the same steps; when present, :func:`mse_closed_form` uses it for the
    lag-pair terms so the result equals the sample residual mean square.
    """

    R: dict
    P: int
    window_moments: np.ndarray | None = None


def empirical_autocorrelation(seq, P, window_moments=True):
    data = _data(seq)
    T = data.shape[0]
    if T <= P:
        raise InsufficientDataError(f"need T > P (T={T}, P={P})")
    lagged = np.stack([data[P - a:T - a] for a in range(P + 1)])  # (P+1, T-P, n)
    M = np.einsum("atn,btm->abnm", lagged, lagged) / (T - P)
    R = {0: M[0, 0]}
    for p in range(1, P + 1):
        R[p] = M[0, p]
        R[-p] = M[0, p].T
    return AutocorrelationSet(R, P, M if window_moments else None)


def mse_closed_form(m, acs, stationary=False):
    """Prediction MSE of ``m`` from second moments (dense; test scale).

    ``tr(R_0 + sum_p H_p R_{-p} + sum_p R_p H_p^T + sum_{p1,p2} H_p1 R_{p2-p1} H_p2^T)``.
    With ``stationary=True`` (or no window moments) the lag-pair moment of
    ``(x_{t-p1}, x_{t-p2})`` is taken as ``R_{p2-p1}``.
    """
    if acs.P < m.P or any(p not in acs.R for p in range(-m.P, m.P + 1)):
        raise InvalidInputError(f"autocorrelations missing lags up to {m.P}")
    H = models.as_dense_var(m).coeffs
    use_window = acs.window_moments is not None and not stationary

    def moment(a, b):
        return acs.window_moments[a, b] if use_window else acs.R[b - a]

    total = np.trace(moment(0, 0))
    for p in range(1, m.P + 1):
        total += np.trace(H[p - 1] @ moment(p, 0)) + np.trace(moment(0, p) @ H[p - 1].T)
        for p2 in range(1, m.P + 1):
            total += np.trace(H[p - 1] @ moment(p, p2) @ H[p2 - 1].T)
    return float(total)


# --- grid search ----------------------------------------------------------------


@dataclass(frozen=True)
class FitConfig:
    family: str
    P_grid: tuple = (1, 2)
    K_grid: tuple = (0, 1, 2)
    L_grid: tuple = (0,)
    ridge_lambda: float | None = None
    in_fraction: float = 0.9
    train_fraction: float = 0.7
    product: str = "cartesian"
    separate_channels: bool = True

    def __post_init__(self):
        if self.family not in models.FAMILIES:
            raise InvalidParameterError(f"unknown family {self.family!r}")
        for name in ("P_grid", "K_grid", "L_grid"):
            vals = tuple(int(v) for v in getattr(self, name))
            if not vals:
                raise InvalidParameterError(f"{name} must be non-empty")
            object.__setattr__(self, name, vals)
        if min(self.P_grid) < 1 or min(self.K_grid) < 0 or min(self.L_grid) < 0:
            raise InvalidParameterError("grids need P >= 1, K >= 0, L >= 0")

    def tuples(self):
        ks = (0,) if self.family == "VAR" else self.K_grid
        ls = self.L_grid if self.family == "GPGVAR" else (0,)
        return [(p, k, l) for p in self.P_grid for k in ks for l in ls]


@dataclass
class FitReport:
    family: str
    selected: tuple
    model: models.ModelParams
    train_rnmse: float
    validation_rnmse: float
    test_rnmse: float
    residual_variance: float
    condition_number: float
    ridge_lambda: float
    split: dict
    grid: list = field(default_factory=list)

    def to_dict(self, include_coeffs=True):
        d = {
            "family": self.family,
            "selected": {"P": self.selected[0], "K": self.selected[1], "L": self.selected[2]},
            "n_params": self.model.n_params,
            "train_rnmse": self.train_rnmse,
            "validation_rnmse": self.validation_rnmse,
            "test_rnmse": self.test_rnmse,
            "residual_variance": self.residual_variance,
            "condition_number": self.condition_number,
            "ridge_lambda": self.ridge_lambda,
            "split": self.split,
            "grid": self.grid,
        }
        if include_coeffs:
            d["coeffs"] = self.model.coeffs.tolist()
        return d


def _tmpl_for(config, P, K, L, n_nodes, n_features, node_graph, feature_graph, product):
    return template(
        config.family, P, K, L, n_nodes=n_nodes, n_features=n_features, node_graph=node_graph,
        feature_graph=feature_graph, product=product, separate_channels=config.separate_channels,
    )


def _slice_stack(full, family, K, L, Kmax, Lmax):
    if family == "GPGVAR":
        st = full.reshape((Kmax + 1, Lmax + 1) + full.shape[1:])[:K + 1, :L + 1]
        return st.reshape((-1,) + full.shape[1:])
    return full[:K + 1]


def grid_search(config, seq, node_graph=None, feature_graph=None, progress=None, n_jobs=1):
    """Select ``(P, K, L)`` on validation rNMSE, refit in-sample, score on test.

    Ties are broken by parameter count, then ``P``, ``K``, ``L``. ``progress``
    is called with one record dict per grid point in grid order. Grid points
    are evaluated on ``n_jobs`` threads; the result does not depend on it.
    """
    data = _data(seq)
    if isinstance(seq, SignalSequence):
        n_nodes, n_features = seq.n_nodes, seq.n_features
    else:
        n_nodes, n_features = data.shape[1], 1
    tuples = config.tuples()
    max_p = max(t[0] for t in tuples)
    train, val, test = split_series(data.shape[0], config.in_fraction, config.train_fraction, max_p)
    n_in = val[-1] + 1
    product = None
    if config.family == "PGVAR":
        product = make_product(node_graph, feature_graph, config.product)

    kmax = max(t[1] for t in tuples)
    lmax = max(t[2] for t in tuples)
    full_stack = None
    if config.family != "VAR":
        big = _tmpl_for(config, 1, kmax, lmax, n_nodes, n_features, node_graph, feature_graph, product)
        full_stack = models.regressor_stack(big, data)

    def evaluate(tup):
        P, K, L = tup
        tmpl = _tmpl_for(config, P, K, L, n_nodes, n_features, node_graph, feature_graph, product)
        stack = None if full_stack is None else _slice_stack(full_stack, config.family, K, L, kmax, lmax)
        try:
            res = fit(data, tmpl, np.arange(P, train[-1] + 1), config.ridge_lambda, stack=stack)
            pred = models.predict_teacher_forced(res.model, data, val, stack=stack)
            score = rnmse(pred, data[val])
        except PGVARError as exc:
            return tup, tmpl.n_params, None, None, exc
        return tup, tmpl.n_params, res, score, None

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(evaluate, tuples))
    else:
        results = [evaluate(t) for t in tuples]

    records, failures, scored = [], {}, []
    for tup, n_params, res, score, exc in results:
        rec = {"P": tup[0], "K": tup[1], "L": tup[2], "n_params": n_params}
        if exc is None:
            rec["validation_rnmse"] = score
            scored.append(((score, n_params) + tup, tup, res))
        else:
            rec["error"] = str(exc)
            failures[tup] = exc
        records.append(rec)
        if progress is not None:
            progress(rec)
    if not scored:
        raise GridSearchError(f"all {len(tuples)} grid points failed", failures)

    key, best, best_res = min(scored, key=lambda s: s[0])
    P, K, L = best
    train_pred = models.predict_teacher_forced(best_res.model, data, np.arange(P, train[-1] + 1))
    train_score = rnmse(train_pred, data[P:train[-1] + 1])

    tmpl = _tmpl_for(config, P, K, L, n_nodes, n_features, node_graph, feature_graph, product)
    stack = None if full_stack is None else _slice_stack(full_stack, config.family, K, L, kmax, lmax)
    refit = fit(data, tmpl, np.arange(P, n_in), config.ridge_lambda, stack=stack)
    test_pred = models.predict_teacher_forced(refit.model, data, test, stack=stack)

    return FitReport(
        family=config.family,
        selected=best,
        model=refit.model,
        train_rnmse=train_score,
        validation_rnmse=key[0],
        test_rnmse=rnmse(test_pred, data[test]),
        residual_variance=refit.residual_variance,
        condition_number=refit.condition_number,
        ridge_lambda=refit.ridge_lambda,
        split={"train": int(train.size), "validation": int(val.size), "test": int(test.size)},
        grid=records,
    )


def progress_writer(fh):
    """Progress callback writing one JSON line per grid point to ``fh``."""

    def write(record):
        fh.write(json.dumps(record) + "\n")
        fh.flush()

    return write
