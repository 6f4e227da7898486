"""Diagonal Gaussian measurement back-action on a collective spin.

A pulsed homodyne record Y acts on the Dicke amplitudes through the diagonal
operator

    M = pi^{-1/4} exp[ i eta m - (Y + chi_x m^2 + chi_p m)^2 / 2 ],

so each amplitude is damped by a Gaussian in the record centered at
-(chi_x m^2 + chi_p m) and phase-rotated by eta m.  The pi^{-1/4} prefactor
makes {M(Y)} a resolution of identity: ||M(Y) psi||^2 is an exact probability
density over Y (a mixture of variance-1/2 Gaussians weighted by P(m)).

Everything here works in the log domain until the final normalization, so
strong measurements (chi_x ~ 10, hundreds of atoms) cannot underflow the
state update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .spin_core import SpinEnsembleState

_LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class MeasurementSetting:
    """Strengths and accumulated phase of one homodyne measurement.

    ``chi_x`` couples to m^2 (amplitude quadrature), ``chi_p`` to m (phase
    quadrature); the two optimized protocols use one at a time, but mixed
    settings are legal.  ``eta`` is the deterministic phase per unit m.
    """

    chi_x: float = 0.0
    chi_p: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        for name in ("chi_x", "chi_p"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {val}")
        if not np.isfinite(self.eta):
            raise ValueError(f"eta must be finite, got {self.eta}")


@dataclass(frozen=True)
class MeasurementRecord:
    """One realized outcome with its exact probability density."""

    outcome: float
    probability_density: float
    setting: MeasurementSetting
    seed: int | None = None

    def __post_init__(self):
        if self.probability_density < 0:
            raise ValueError("probability density cannot be negative")

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "density": self.probability_density,
            "chi_x": self.setting.chi_x,
            "chi_p": self.setting.chi_p,
            "eta": self.setting.eta,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "MeasurementRecord":
        setting = MeasurementSetting(
            chi_x=data["chi_x"], chi_p=data["chi_p"], eta=data["eta"]
        )
        return cls(
            outcome=data["outcome"],
            probability_density=data["density"],
            setting=setting,
            seed=data.get("seed"),
        )


def _m_values(n_atoms: int) -> np.ndarray:
    return np.arange(n_atoms + 1) - n_atoms / 2.0


def _centers(setting: MeasurementSetting, m: np.ndarray) -> np.ndarray:
    """Gaussian centers -(chi_x m^2 + chi_p m) of the outcome per Dicke level."""
    return -(setting.chi_x * m * m + setting.chi_p * m)


def log_weights(setting: MeasurementSetting, outcome: float, n_atoms: int) -> np.ndarray:
    """Complex log of the diagonal operator entries, index k <-> m = k - S.

    log w_m = i eta m - (Y + chi_x m^2 + chi_p m)^2 / 2 - (1/4) log pi.
    Never exponentiated here, so arbitrarily strong damping stays exact.
    """
    m = _m_values(n_atoms)
    shift = outcome - _centers(setting, m)
    return 1j * setting.eta * m - 0.5 * shift * shift - 0.25 * _LOG_PI


def apply_measurement(
    state: SpinEnsembleState, setting: MeasurementSetting, outcome: float
) -> tuple[SpinEnsembleState, float]:
    """Conditioned state after recording ``outcome``, plus its density.

    The post state is M|psi> renormalized via a log-sum-exp shift; the
    returned density is ||M psi||^2 before renormalization, identical to
    :func:`outcome_pdf` at the same record value.
    """
    lw = log_weights(setting, outcome, state.atom_count)
    amps = state.amplitudes
    support = np.abs(amps) > 0.0
    if not np.any(support):
        raise RuntimeError("state has empty support")
    # shift by the largest weight on the occupied levels only; an unoccupied
    # level may carry a far larger weight, and exponentiating it would turn
    # the harmless product 0 * exp(big) into nan
    shift = float(np.max(lw.real[support]))
    scaled = np.zeros_like(amps)
    scaled[support] = amps[support] * np.exp(lw[support] - shift)
    norm2 = float(np.sum(np.abs(scaled) ** 2))
    if norm2 <= 0.0 or not np.isfinite(norm2):
        raise RuntimeError("measurement update lost all amplitude mass")
    post = SpinEnsembleState(state.atom_count, scaled / math.sqrt(norm2))
    density = float(np.exp(math.log(norm2) + 2.0 * shift))
    return post, density


def outcome_pdf(state: SpinEnsembleState, setting: MeasurementSetting, outcome):
    """Exact probability density of the record Y for the given state.

    A mixture of variance-1/2 Gaussians: sum_m P(m) pi^{-1/2}
    exp[-(Y + chi_x m^2 + chi_p m)^2].  ``outcome`` may be a scalar or an
    array; the density integrates to 1 over Y for any normalized state.
    """
    p = np.abs(state.amplitudes) ** 2
    centers = _centers(setting, _m_values(state.atom_count))
    y = np.asarray(outcome, dtype=float)
    diff = y[..., None] - centers
    dens = np.exp(-diff * diff) @ p / math.sqrt(math.pi)
    return float(dens) if y.ndim == 0 else dens


def sample_outcome(
    state: SpinEnsembleState, setting: MeasurementSetting, seed
) -> MeasurementRecord:
    """Draw one record: m with probability P(m), then Y ~ N(center_m, 1/2).

    ``seed`` may be an integer (deterministic record) or an existing
    numpy Generator (caller-owned stream, advanced by the draw).
    """
    if isinstance(seed, np.random.Generator):
        rng, seed_out = seed, None
    else:
        rng, seed_out = np.random.default_rng(seed), int(seed)
    p = np.abs(state.amplitudes) ** 2
    p = p / p.sum()
    centers = _centers(setting, _m_values(state.atom_count))
    idx = rng.choice(p.size, p=p)
    outcome = rng.normal(centers[idx], math.sqrt(0.5))
    return MeasurementRecord(
        outcome=float(outcome),
        probability_density=outcome_pdf(state, setting, float(outcome)),
        setting=setting,
        seed=seed_out,
    )


def sample_outcomes(
    state: SpinEnsembleState, setting: MeasurementSetting, n_shots: int, seed
) -> np.ndarray:
    """Vectorized i.i.d. records from the same pre-measurement state."""
    if n_shots < 1:
        raise ValueError(f"n_shots must be >= 1, got {n_shots}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = np.abs(state.amplitudes) ** 2
    p = p / p.sum()
    centers = _centers(setting, _m_values(state.atom_count))
    idx = rng.choice(p.size, size=n_shots, p=p)
    return rng.normal(centers[idx], math.sqrt(0.5))


def compose(settings_and_outcomes) -> tuple[MeasurementSetting, float, float]:
    """Collapse n equal-strength measurements into one effective operator.

    For records Y_1..Y_n taken at identical (chi_x, chi_p), completing the
    square per m gives the exact identity

        prod_j M(Y_j) = exp(C) * M_eff,

    with chi_eff = sqrt(n) chi, Y_eff = sum_j Y_j / sqrt(n),
    eta_eff = sum_j eta_j and the m-independent log constant
    C = -(n-1)/4 log pi - (sum Y_j^2 - (sum Y_j)^2 / n) / 2.

    Returns (effective setting, effective outcome, C).  Entries with unequal
    strengths are rejected; the collective sqrt(n) enhancement only holds
    for repeated identical probes.
    """
    pairs = list(settings_and_outcomes)
    if not pairs:
        raise ValueError("compose requires at least one measurement")
    first = pairs[0][0]
    for setting, _ in pairs[1:]:
        if setting.chi_x != first.chi_x or setting.chi_p != first.chi_p:
            raise ValueError(
                "compose supports equal strengths only; got mixed chi values"
            )
    n = len(pairs)
    outcomes = np.array([y for _, y in pairs], dtype=float)
    root_n = math.sqrt(n)
    eff = MeasurementSetting(
        chi_x=first.chi_x * root_n,
        chi_p=first.chi_p * root_n,
        eta=float(sum(s.eta for s, _ in pairs)),
    )
    total = float(outcomes.sum())
    eff_outcome = total / root_n
    log_const = -0.25 * (n - 1) * _LOG_PI - 0.5 * (
        float(np.sum(outcomes * outcomes)) - total * total / n
    )
    return eff, eff_outcome, log_const


def acceptance_probability(
    state: SpinEnsembleState,
    setting: MeasurementSetting,
    target: float,
    half_width: float,
) -> float:
    """Probability that the record falls within ``half_width`` of ``target``.

    Composite-Simpson quadrature of :func:`outcome_pdf` over the window; an
    infinite half-width integrates over the full support of the mixture and
    returns 1 up to quadrature error.
    """
    if not half_width > 0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    centers = _centers(setting, _m_values(state.atom_count))
    if math.isinf(half_width):
        lo = float(centers.min()) - 15.0
        hi = float(centers.max()) + 15.0
    else:
        lo, hi = target - half_width, target + half_width
    n_points = max(2001, int(math.ceil((hi - lo) / 0.01)))
    if n_points % 2 == 0:
        n_points += 1
    grid = np.linspace(lo, hi, n_points)
    return float(simpson(outcome_pdf(state, setting, grid), x=grid))
