"""Quasi-equivalence classification for pairs and mode families.

At finite dimension, the two decisive quantities are the norm-equivalence
constants (sharp Rayleigh bounds of the Gram pencil) and the squared
Hilbert-Schmidt size of the discriminant 1 - rho e^{-chi} e^{chi'} rho'.
A family verdict extrapolates the per-mode series; numerical convergence of
an infinite series is undecidable from a prefix, so the verdict is a
documented heuristic with Inconclusive as a first-class outcome.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import InvalidArgumentError, ParseError
from .linalg import pairwise_sum
from .phase_space import Presentation, build_standard
from .quasifree import (
    QuasifreeForm,
    chi,
    double,
    rho,
    thermal_form,
)
from .implementers import _angle_data

__all__ = [
    "norm_equivalence_bounds",
    "discriminant",
    "hs_discriminant",
    "state_distance_lower_bound",
    "classify_pair",
    "PairReport",
    "ModeFamily",
    "FamilyConfig",
    "Verdict",
    "classify_family",
    "verdict_from_evidence",
    "family_from_json",
    "mode_expression",
]


def norm_equivalence_bounds(form: QuasifreeForm, other: QuasifreeForm):
    """Sharp constants with alpha ||f||_S <= ||f||_S' <= beta ||f||_S.

    These are square roots of the extreme generalized eigenvalues of the
    pencil (G_S', G_S).
    """
    if form.space.dim != other.space.dim:
        raise InvalidArgumentError("forms live on different spaces")
    ga, gb = other.gram, form.gram
    if np.abs(ga - np.diag(np.diag(ga))).max() == 0.0 and \
            np.abs(gb - np.diag(np.diag(gb))).max() == 0.0:
        ratio = np.diag(ga).real / np.diag(gb).real
        vals = np.sort(ratio)
    else:
        vals = sla.eigvalsh(ga, gb)
    return float(np.sqrt(max(vals[0], 0.0))), float(np.sqrt(max(vals[-1], 0.0)))


def discriminant(form: QuasifreeForm, other: QuasifreeForm) -> np.ndarray:
    """1 - rho(S) e^{-chi(S)} e^{chi(S')} rho(S') on the common space.

    rho e^{-chi} and e^{chi} rho are single operator functions of S_op and
    S'_op, so each factor comes from one cached eigendecomposition.
    """
    from .quasifree import _require_half_free, HALF_EIGENVALUE_TOL, chi_values

    for f in (form, other):
        _require_half_free(f, HALF_EIGENVALUE_TOL)
    eye = np.eye(form.space.dim)
    vals, vecs = form.s_eig
    left = form.calculus.fn_of_eig(
        vals, vecs, np.sign(2.0 * vals - 1.0) * np.exp(-chi_values(form)))
    vals_o, vecs_o = other.s_eig
    right = other.calculus.fn_of_eig(
        vals_o, vecs_o, np.exp(chi_values(other)) * np.sign(2.0 * vals_o - 1.0))
    return eye - left @ right


def hs_discriminant(form: QuasifreeForm, other: QuasifreeForm) -> float:
    """Squared Hilbert-Schmidt norm of the discriminant in the G_S metric."""
    m = discriminant(form, other)
    gram = form.gram
    if np.abs(gram - np.diag(np.diag(gram))).max() == 0.0:
        diag = np.diag(gram).real
        val = np.trace((m.conj().T * diag[None, :]) @ m / diag[:, None])
    else:
        val = np.trace(np.linalg.solve(gram, m.conj().T @ gram @ m))
    return float(max(val.real, 0.0))


def state_distance_lower_bound(form: QuasifreeForm, other: QuasifreeForm,
                               interior_tol: float = 1e-9) -> float:
    """2 (1 - det over the doubled range of (P P' P)^(-1/4)).

    Both spectra must lie strictly inside (0, 1); the determinant is taken
    through the doubled angle operator, whose cosh restricted to the doubled
    range reproduces P P' P.
    """
    for f in (form, other):
        vals, _ = f.s_eig
        if vals.min() < interior_tol or vals.max() > 1.0 - interior_tol:
            raise InvalidArgumentError(
                "state distance bound requires 0 < S < 1 on both sides"
            )
    hat = double(form).hat_form
    hat_other = double(other).hat_form
    vals, vecs = _angle_data(hat, hat_other, 1e-12)
    th_vals = np.arcsinh(np.sqrt(vals))
    s_vals, s_vecs = hat.s_eig
    range_vecs = s_vecs[:, s_vals > 0.5]
    th_herm = (vecs * th_vals) @ vecs.conj().T
    th_range = range_vecs.conj().T @ th_herm @ range_vecs
    mu = np.linalg.eigvalsh(0.5 * (th_range + th_range.conj().T))
    det = float(np.prod(1.0 / np.sqrt(np.cosh(mu))))
    return 2.0 * (1.0 - det)


@dataclass(frozen=True)
class PairReport:
    alpha: float
    beta: float
    hs_value: float
    hs_value_mirrored: float
    classification: str
    classification_other: str
    projection_mismatch: bool

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "hs_discriminant": self.hs_value,
            "hs_discriminant_mirrored": self.hs_value_mirrored,
            "classification": self.classification,
            "classification_other": self.classification_other,
            "projection_mismatch": self.projection_mismatch,
        }


def classify_pair(form: QuasifreeForm, other: QuasifreeForm,
                  tol: float = 1e-10) -> PairReport:
    """Single-pair report: norm constants, discriminant sizes and flags.

    At finite dimension both criteria always hold; a projection paired with
    a non-projection is flagged because the mode-family limit of such pairs
    always diverges.
    """
    alpha, beta = norm_equivalence_bounds(form, other)
    hs = hs_discriminant(form, other)
    hs_m = hs_discriminant(other, form)
    cls_a = "BasisProjection" if form.is_basis_projection(tol) else "Mixed"
    cls_b = "BasisProjection" if other.is_basis_projection(tol) else "Mixed"
    return PairReport(
        alpha=alpha,
        beta=beta,
        hs_value=hs,
        hs_value_mirrored=hs_m,
        classification=cls_a,
        classification_other=cls_b,
        projection_mismatch=cls_a != cls_b,
    )


@dataclass(frozen=True)
class FamilyConfig:
    divergence_threshold: float = 50.0
    convergence_tail: float = 1e-3
    alpha_min: float = 1e-3
    beta_max: float = 1e3
    slope_window_frac: float = 0.5
    min_fit_points: int = 4
    decay_margin: float = 0.05
    partial_slope_eps: float = 0.01
    fit_residual_max: float = 0.5

    @classmethod
    def from_dict(cls, data: dict) -> "FamilyConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore
        bad = set(data) - set(known)
        if bad:
            raise ParseError(f"unknown threshold keys: {sorted(bad)}")
        return cls(**data)


@dataclass(frozen=True)
class ModeFamily:
    """Lazily generated sequence of independent per-mode form pairs."""

    block: Callable[[int], tuple[QuasifreeForm, QuasifreeForm]]
    n_max: int

    def pair(self, k: int):
        if not (1 <= k <= self.n_max):
            raise InvalidArgumentError("mode index out of range")
        return self.block(k)


@dataclass(frozen=True)
class Verdict:
    outcome: str  # Equivalent | Inequivalent | Inconclusive
    evidence: dict

    def exit_code(self) -> int:
        return {"Equivalent": 0, "Inequivalent": 3, "Inconclusive": 4}[self.outcome]


def _loglog_slope(xs: np.ndarray, ys: np.ndarray):
    good = ys > 0
    if good.sum() < 2:
        return 0.0, 0.0, np.inf
    lx, ly = np.log(xs[good]), np.log(ys[good])
    a = np.vstack([np.ones_like(lx), lx]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    resid = float(np.sqrt(np.mean((ly - a @ coef) ** 2)))
    return float(coef[1]), float(coef[0]), resid


def verdict_from_evidence(evidence: dict, config: FamilyConfig) -> Verdict:
    """Pure decision function over the collected per-mode evidence."""
    t = np.asarray(evidence["t"], dtype=float)
    alphas = np.asarray(evidence["alpha"], dtype=float)
    betas = np.asarray(evidence["beta"], dtype=float)
    n = len(t)
    total = pairwise_sum(list(t))
    partial = np.cumsum(t)
    ks = np.arange(1, n + 1, dtype=float)
    window = max(int(np.ceil(n * config.slope_window_frac)), 1)
    sl_t, icpt, fit_res = _loglog_slope(ks[-window:], t[-window:])
    sl_partial, _, _ = _loglog_slope(ks[-window:], np.maximum(partial[-window:], 0.0))
    evidence = dict(evidence)
    evidence.update({
        "total": float(total),
        "fitted_slope": sl_t,
        "fit_intercept": icpt,
        "fit_residual": fit_res,
        "partial_sum_slope": sl_partial,
        "alpha_inf": float(alphas.min()) if n else 1.0,
        "beta_sup": float(betas.max()) if n else 1.0,
        "thresholds": config.__dict__,
    })

    if n and (evidence["alpha_inf"] <= config.alpha_min
              or evidence["beta_sup"] >= config.beta_max):
        return Verdict("Inequivalent", evidence)
    if total > config.divergence_threshold and sl_partial > config.partial_slope_eps:
        return Verdict("Inequivalent", evidence)

    enough = window >= config.min_fit_points
    if enough and fit_res <= config.fit_residual_max and \
            sl_t < -1.0 - config.decay_margin:
        # integral tail bound for t_k ~ e^icpt k^slope beyond the prefix
        tail = np.exp(icpt) * n ** (sl_t + 1.0) / (-sl_t - 1.0)
        evidence["tail_estimate"] = float(tail)
        if tail < config.convergence_tail and total <= config.divergence_threshold:
            return Verdict("Equivalent", evidence)
    return Verdict("Inconclusive", evidence)


def classify_family(family: ModeFamily, config: FamilyConfig | None = None,
                    threads: int = 1) -> Verdict:
    """Evaluate every block and reduce deterministically.

    Blocks are independent; with several workers the per-block results are
    gathered in index order and reduced by a fixed pairwise tree, so the
    verdict does not depend on the worker count.
    """
    config = config or FamilyConfig()
    ks = list(range(1, family.n_max + 1))

    def one(k: int):
        try:
            f, g = family.pair(k)
            a, b = norm_equivalence_bounds(f, g)
            return hs_discriminant(f, g), a, b
        except Exception as exc:
            raise InvalidArgumentError(f"block {k} failed: {exc}") from exc

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, ks))
    else:
        rows = [one(k) for k in ks]
    evidence = {
        "k": ks,
        "t": [r[0] for r in rows],
        "alpha": [r[1] for r in rows],
        "beta": [r[2] for r in rows],
    }
    return verdict_from_evidence(evidence, config)


_ALLOWED_FUNCS = {"sqrt": np.sqrt, "log": np.log, "exp": np.exp, "abs": abs}


def mode_expression(text: str) -> Callable[[int], float]:
    """Compile the restricted per-mode parameter language.

    Numbers, the variable k, + - * / **, unary minus and sqrt/log/exp/abs;
    anything else is a parse error.
    """
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"bad expression {text!r}: {exc}") from exc

    def _validate(node):
        if isinstance(node, ast.Expression):
            return _validate(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return
        if isinstance(node, ast.Name) and node.id == "k":
            return
        if isinstance(node, ast.BinOp) and isinstance(
            node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
        ):
            _validate(node.left)
            _validate(node.right)
            return
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            _validate(node.operand)
            return
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _ALLOWED_FUNCS and len(node.args) == 1 \
                and not node.keywords:
            _validate(node.args[0])
            return
        raise ParseError(f"disallowed construct in expression: {ast.dump(node)}")

    _validate(tree)

    def ev(node, k):
        if isinstance(node, ast.Expression):
            return ev(node.body, k)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "k":
            return float(k)
        if isinstance(node, ast.BinOp) and isinstance(
            node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
        ):
            a, b = ev(node.left, k), ev(node.right, k)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                return a / b
            return a ** b
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, k)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _ALLOWED_FUNCS and len(node.args) == 1 \
                and not node.keywords:
            return float(_ALLOWED_FUNCS[node.func.id](ev(node.args[0], k)))
        raise ParseError(f"disallowed construct in expression: {ast.dump(node)}")

    return lambda k: float(ev(tree, k))


def family_from_json(data: dict) -> ModeFamily:
    """Build a ModeFamily from its JSON description.

    Either {"generator": {"kind": "thermal_pair", "tau": expr,
    "tau_prime": expr}, "n_max": n} or {"generator": {"kind": "explicit",
    "blocks": [...]}, "n_max": n} with per-block serialized form pairs.
    """
    try:
        gen = data["generator"]
        n_max = int(data["n_max"])
        kind = gen["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed family description: {exc}") from exc
    if n_max < 1:
        raise ParseError("n_max must be positive")
    if kind == "thermal_pair":
        tau = mode_expression(gen.get("tau", "0"))
        tau_p = mode_expression(gen.get("tau_prime", "0"))
        space = build_standard(1, Presentation.DIAGONAL)

        def block(k: int):
            nu = float(np.sinh(tau(k)) ** 2)
            nu_p = float(np.sinh(tau_p(k)) ** 2)
            return thermal_form(space, nu), thermal_form(space, nu_p)

        return ModeFamily(block=block, n_max=n_max)
    if kind == "explicit":
        from .serialize import decode_form

        blocks = gen.get("blocks")
        if not isinstance(blocks, list) or len(blocks) < n_max:
            raise ParseError("explicit family needs at least n_max blocks")
        decoded = []
        for entry in blocks[:n_max]:
            space_form = decode_form({"space": entry["space"],
                                      "Sigma": entry["Sigma"]})
            other = decode_form({"space": entry["space"],
                                 "Sigma": entry["Sigma_prime"]})
            decoded.append((space_form, other))
        return ModeFamily(block=lambda k: decoded[k - 1], n_max=n_max)
    raise ParseError(f"unknown family kind {kind!r}")
