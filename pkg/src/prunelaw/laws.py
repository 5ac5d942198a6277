"""Closed-form loss laws for post-training of pruned models.

Every law maps (n0, d, rho, l0) to a predicted loss in nats/token, where
n0 is the pre-pruning model size, d the number of post-training tokens,
rho the pruning rate and l0 the pre-pruning loss.  Two structural families
exist:

* chinchilla-bracket laws: ``base + prefactor * (N_C/n0^alpha + D_C/d^beta + E)``
  with the N_C term dropped for the reduced forms;
* saturating-power laws: ``base + prefactor * (N_C/n0^alpha + D_C/d)^beta``.

The prefactor is ``(1/rho)^gamma * (1/n0)^delta`` with each factor present
only when the law uses it.  The ``*_24`` variants (for 2:4 semi-structured
pruning) take neither rho nor l0.

n0 and d are expected in whatever unit convention the caller fits in; the
recommended convention is billions (1e9) of parameters/tokens, which keeps
``n0**alpha`` well conditioned for fitting.

All derivatives here are hand-derived per law, no symbolic algebra.  The
partial with respect to tokens, the mixed (n0, d) partial, and the gradient
over the law's own parameter vector are exact closed forms; finite
differences are used only as an independent audit (see conditions module).
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import LawDomainError, LawEvaluationError, ValidationError

# Canonical ordering of the full parameter vector; each law uses a subset,
# always listed in this order.
PARAM_ORDER = ("N_C", "D_C", "E", "alpha", "beta", "gamma", "delta")

# Parameter subset per law id.
LAW_PARAMS: Mapping[str, tuple[str, ...]] = MappingProxyType({
    "L1": ("N_C", "D_C", "E", "alpha", "beta", "gamma", "delta"),
    "L2": ("N_C", "D_C", "E", "alpha", "beta", "gamma"),
    "L3": ("D_C", "E", "beta", "gamma", "delta"),
    "L4": ("N_C", "D_C", "alpha", "beta", "gamma", "delta"),
    "L5": ("N_C", "D_C", "alpha", "beta", "gamma"),
    "L1_24": ("N_C", "D_C", "E", "alpha", "beta", "delta"),
    "L2_24": ("N_C", "D_C", "E", "alpha", "beta"),
    "L3_24": ("D_C", "E", "beta", "delta"),
    "chinchilla_base": ("N_C", "D_C", "E", "alpha", "beta"),
    "openai_base": ("N_C", "D_C", "alpha", "beta"),
})

ALL_LAW_IDS = tuple(LAW_PARAMS)

# Laws whose formula contains the (1/rho)^gamma prefactor and the l0 offset.
RHO_LAWS = frozenset({"L1", "L2", "L3", "L4", "L5"})
# Laws with the (1/n0)^delta prefactor.
_DELTA_LAWS = frozenset({"L1", "L3", "L4", "L1_24", "L3_24"})
# Laws whose bracket includes the N_C/n0^alpha term.
_NC_LAWS = frozenset({"L1", "L2", "L1_24", "L2_24", "chinchilla_base"})
# Saturating-power family (inner sum raised to beta, token term has exponent 1).
_POWER_LAWS = frozenset({"L4", "L5", "openai_base"})


def compatible_methods(law_id: str) -> frozenset[str]:
    """Pruning methods whose curves a law can be fitted on."""
    if law_id in RHO_LAWS:
        return frozenset({"depth", "width"})
    if law_id.endswith("_24"):
        return frozenset({"semi24"})
    # Base forms ignore rho and l0, so any method's curves are admissible.
    return frozenset({"depth", "width", "semi24"})


@dataclass(frozen=True)
class LawSpec:
    """A law identifier plus a concrete value for each of its parameters."""

    law_id: str
    params: Mapping[str, float]

    def __post_init__(self):
        if self.law_id not in LAW_PARAMS:
            raise ValidationError(f"unknown law id {self.law_id!r}")
        required = LAW_PARAMS[self.law_id]
        got = tuple(self.params)
        if set(got) != set(required):
            raise ValidationError(
                f"{self.law_id} requires exactly parameters {required}, got {sorted(got)}"
            )
        for name, value in self.params.items():
            if not np.isfinite(value):
                raise ValidationError(f"parameter {name}={value!r} is not finite")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def param_names(self) -> tuple[str, ...]:
        return LAW_PARAMS[self.law_id]

    def param_vector(self) -> np.ndarray:
        """Parameter values as an array in the law's canonical order."""
        return np.array([self.params[k] for k in self.param_names], dtype=float)

    @classmethod
    def from_vector(cls, law_id: str, vector) -> "LawSpec":
        names = LAW_PARAMS[law_id]
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (len(names),):
            raise ValidationError(
                f"{law_id} takes {len(names)} parameters, got shape {vector.shape}"
            )
        return cls(law_id, dict(zip(names, (float(v) for v in vector))))


@dataclass(frozen=True)
class LawInput:
    """Physical inputs of a law evaluation.

    rho and l0 default to values only admissible for laws that ignore them;
    laws that use rho reject anything outside (0, 1).
    """

    n0: float
    d: float
    rho: float = 0.0
    l0: float = 0.0


def format_law_spec(spec: LawSpec) -> str:
    """Render ``law_id: key=value, ...`` with round-trip float precision."""
    body = ", ".join(f"{k}={spec.params[k]!r}" for k in spec.param_names)
    return f"{spec.law_id}: {body}"


def parse_law_spec(text: str) -> LawSpec:
    """Parse the textual form produced by :func:`format_law_spec`."""
    head, _, body = text.partition(":")
    law_id = head.strip()
    if law_id not in LAW_PARAMS:
        raise ValidationError(f"unknown law id {law_id!r} in {text!r}")
    params = {}
    for item in body.split(","):
        item = item.strip()
        if not item:
            continue
        key, eq, value = item.partition("=")
        if not eq:
            raise ValidationError(f"malformed parameter {item!r} in {text!r}")
        params[key.strip()] = float(value)
    return LawSpec(law_id, params)


# =====================================================================
# Vectorized core
# =====================================================================

def _as_arrays(law_id: str, n0, d, rho, l0):
    """Validate the physical domain and broadcast inputs to float arrays."""
    n0 = np.asarray(n0, dtype=float)
    d = np.asarray(d, dtype=float)
    rho = np.asarray(rho, dtype=float)
    l0 = np.asarray(l0, dtype=float)
    if np.any(~(n0 > 0)):
        raise LawDomainError("n0 must be > 0")
    if np.any(~(d > 0)):
        raise LawDomainError("d must be > 0 (laws are singular at zero tokens)")
    if law_id in RHO_LAWS:
        if np.any(~((rho > 0) & (rho < 1))):
            raise LawDomainError(f"{law_id} requires rho in (0, 1)")
    return np.broadcast_arrays(n0, d, rho, l0)


def _check_finite(law_id: str, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise LawEvaluationError(
                f"{law_id} produced a non-finite value (overflow or undefined power); "
                "check parameter magnitudes against the input range"
            )


def _prefactor(law_id: str, p: Mapping[str, float], n0, rho):
    """(1/rho)^gamma * (1/n0)^delta, with absent factors equal to 1."""
    pref = np.ones_like(n0)
    if law_id in RHO_LAWS:
        pref = pref * rho ** -p["gamma"]
    if law_id in _DELTA_LAWS:
        pref = pref * n0 ** -p["delta"]
    return pref


def _bracket(law_id: str, p: Mapping[str, float], n0, d):
    """The n0/d-dependent sum the prefactor multiplies.

    For the chinchilla family this is N_C/n0^alpha + D_C/d^beta + E (N_C term
    only where present); for the saturating-power family it is the inner sum
    N_C/n0^alpha + D_C/d, *before* raising to beta.
    """
    if law_id in _POWER_LAWS:
        return p["N_C"] * n0 ** -p["alpha"] + p["D_C"] / d
    total = p["D_C"] * d ** -p["beta"] + p["E"]
    if law_id in _NC_LAWS:
        total = total + p["N_C"] * n0 ** -p["alpha"]
    return total


def evaluate_arrays(spec: LawSpec, n0, d, rho=0.0, l0=0.0) -> np.ndarray:
    """Vectorized law evaluation; scalar inputs give a 0-d array."""
    law_id, p = spec.law_id, spec.params
    n0, d, rho, l0 = _as_arrays(law_id, n0, d, rho, l0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        pref = _prefactor(law_id, p, n0, rho)
        core = _bracket(law_id, p, n0, d)
        if law_id in _POWER_LAWS:
            core = core ** p["beta"]
        value = pref * core
        if law_id in RHO_LAWS:
            value = value + l0
    _check_finite(law_id, value)
    return value


def relative_loss_arrays(spec: LawSpec, n0, d, rho=0.0, l0=0.0) -> np.ndarray:
    """Post-training loss minus pre-pruning loss, vectorized.

    Computed directly as prefactor * bracket rather than evaluate() - l0,
    which would lose precision to cancellation whenever the pruning term is
    small against l0.  For laws without an l0 offset this equals evaluate().
    """
    law_id, p = spec.law_id, spec.params
    n0, d, rho, l0 = _as_arrays(law_id, n0, d, rho, l0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        core = _bracket(law_id, p, n0, d)
        if law_id in _POWER_LAWS:
            core = core ** p["beta"]
        value = _prefactor(law_id, p, n0, rho) * core
    _check_finite(law_id, value)
    return value


def partial_wrt_tokens_arrays(spec: LawSpec, n0, d, rho=0.0, l0=0.0) -> np.ndarray:
    """d(loss)/dd, vectorized."""
    law_id, p = spec.law_id, spec.params
    n0, d, rho, l0 = _as_arrays(law_id, n0, d, rho, l0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        pref = _prefactor(law_id, p, n0, rho)
        if law_id in _POWER_LAWS:
            inner = _bracket(law_id, p, n0, d)
            deriv = pref * p["beta"] * inner ** (p["beta"] - 1.0) * (-p["D_C"] / d**2)
        else:
            deriv = pref * (-p["beta"]) * p["D_C"] * d ** (-p["beta"] - 1.0)
    _check_finite(law_id, deriv)
    return deriv


def cross_partial_arrays(spec: LawSpec, n0, d, rho=0.0, l0=0.0) -> np.ndarray:
    """d2(loss)/dn0 dd, vectorized.

    Identically zero for L2, L2_24 and chinchilla_base, whose token term
    carries no n0-dependent factor.
    """
    law_id, p = spec.law_id, spec.params
    n0, d, rho, l0 = _as_arrays(law_id, n0, d, rho, l0)
    if law_id in ("L2", "L2_24", "chinchilla_base"):
        return np.zeros_like(n0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if law_id in _POWER_LAWS:
            beta, alpha, n_c, d_c = p["beta"], p["alpha"], p["N_C"], p["D_C"]
            inner = _bracket(law_id, p, n0, d)
            if law_id == "L4":
                pref = rho ** -p["gamma"]
                delta = p["delta"]
                value = (
                    pref * beta * d_c / d**2 * n0 ** (-delta - 1.0)
                    * inner ** (beta - 2.0)
                    * (delta * inner + (beta - 1.0) * alpha * n_c * n0**-alpha)
                )
            else:
                # L5 / openai_base: only the inner N_C term couples n0 and d.
                pref = rho ** -p["gamma"] if law_id == "L5" else 1.0
                value = (
                    pref * beta * (beta - 1.0) * alpha * n_c * d_c
                    / d**2 * n0 ** (-alpha - 1.0) * inner ** (beta - 2.0)
                )
        else:
            # L1/L3 and their 2:4 variants: differentiating the n0^-delta
            # prefactor against the token term gives delta*beta*D_C times
            # pure powers.
            pref = rho ** -p["gamma"] if law_id in RHO_LAWS else 1.0
            value = (
                pref * p["delta"] * p["beta"] * p["D_C"]
                * n0 ** (-p["delta"] - 1.0) * d ** (-p["beta"] - 1.0)
            )
    _check_finite(law_id, value)
    return value


def param_gradient_arrays(spec: LawSpec, n0, d, rho=0.0, l0=0.0) -> np.ndarray:
    """Gradient of the loss w.r.t. the law's parameter vector.

    Returns shape ``broadcast_shape + (n_params,)`` with columns in
    ``spec.param_names`` order.
    """
    law_id, p = spec.law_id, spec.params
    n0, d, rho, l0 = _as_arrays(law_id, n0, d, rho, l0)
    cols: dict[str, np.ndarray] = {}
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        pref = _prefactor(law_id, p, n0, rho)
        log_n0 = np.log(n0)
        if law_id in _POWER_LAWS:
            beta, alpha, n_c = p["beta"], p["alpha"], p["N_C"]
            inner = _bracket(law_id, p, n0, d)
            outer = inner**beta
            edge = pref * beta * inner ** (beta - 1.0)
            cols["N_C"] = edge * n0**-alpha
            cols["D_C"] = edge / d
            cols["alpha"] = edge * n_c * (-log_n0) * n0**-alpha
            cols["beta"] = pref * outer * np.log(inner)
        else:
            beta = p["beta"]
            core = _bracket(law_id, p, n0, d)
            outer = core
            cols["D_C"] = pref * d**-beta
            cols["E"] = pref * np.ones_like(d)
            cols["beta"] = pref * p["D_C"] * (-np.log(d)) * d**-beta
            if law_id in _NC_LAWS:
                alpha = p["alpha"]
                cols["N_C"] = pref * n0**-alpha
                cols["alpha"] = pref * p["N_C"] * (-log_n0) * n0**-alpha
        if law_id in RHO_LAWS:
            cols["gamma"] = -np.log(rho) * pref * outer
        if law_id in _DELTA_LAWS:
            cols["delta"] = -log_n0 * pref * outer
    grad = np.stack([np.broadcast_to(cols[k], n0.shape) for k in spec.param_names],
                    axis=-1)
    _check_finite(law_id, grad)
    return grad


# =====================================================================
# Scalar operations
# =====================================================================

def evaluate(spec: LawSpec, inp: LawInput) -> float:
    """Predicted loss at a single input point."""
    return float(evaluate_arrays(spec, inp.n0, inp.d, inp.rho, inp.l0))


def relative_loss(spec: LawSpec, inp: LawInput) -> float:
    """Predicted loss minus pre-pruning loss, free of cancellation error."""
    return float(relative_loss_arrays(spec, inp.n0, inp.d, inp.rho, inp.l0))


def partial_wrt_tokens(spec: LawSpec, inp: LawInput) -> float:
    """Analytic d(loss)/dd at a single input point."""
    return float(partial_wrt_tokens_arrays(spec, inp.n0, inp.d, inp.rho, inp.l0))


def cross_partial(spec: LawSpec, inp: LawInput) -> float:
    """Analytic d2(loss)/dn0 dd at a single input point."""
    return float(cross_partial_arrays(spec, inp.n0, inp.d, inp.rho, inp.l0))


def param_gradient(spec: LawSpec, inp: LawInput) -> dict[str, float]:
    """Analytic gradient over the law's parameters, keyed by name."""
    grad = param_gradient_arrays(spec, inp.n0, inp.d, inp.rho, inp.l0)
    return {name: float(grad[..., i]) for i, name in enumerate(spec.param_names)}
