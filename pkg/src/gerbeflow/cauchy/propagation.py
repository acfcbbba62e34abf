"""Constraint propagation identities and their empirical calibration.

Candidate identities share the shape::

    d_tau C1 = -tr/2 C1 + a dC2 + b e (C3 _| X),       X in {psi, d_tau psi}
    d_tau C2 = s delta C1 - tr C2
    d_tau C3 = -(tr/2 - 4c rho) C3 + t K(C3#)

with ``(C3 _| X)_j = C3^i X_ij`` and ``K(C3#)_j = K_ji C3^i``. A variant fixes
``(a, X, b, s, t)``. Calibration measures ``D_i = d_tau C_i - RHS_i`` along
constraint-violating trajectories at several resolutions, the time
derivative taken by 5-point differences of the recorded constraints.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..geometry import codifferential, form_contract, sharp, trace
from ..grid import exterior_derivative
from .evolve import Trajectory, evolve
from .state import CauchyState, EvolutionConfig, constraint_residuals, evolution_rhs

__all__ = [
    "PropagationVariant",
    "CANDIDATE_A",
    "CANDIDATE_B",
    "candidate_variants",
    "propagation_terms",
    "propagation_residuals",
    "CalibrationReport",
    "calibrate_identities",
    "random_violating_state",
]


@dataclass(frozen=True)
class PropagationVariant:
    dc2_weight: float
    c3_argument: str
    c3_weight: float
    dc1_weight: float
    kc3_sign: float

    def __post_init__(self):
        if self.c3_argument not in ("psi", "dpsi"):
            raise ValueError("c3_argument must be 'psi' or 'dpsi'")

    def label(self) -> str:
        return (f"dC2*{self.dc2_weight:g} | C3_{self.c3_argument}*{self.c3_weight:+g} | "
                f"dC1*{self.dc1_weight:+g} | K(C3)*{self.kc3_sign:+g}")

    def as_dict(self):
        return asdict(self)


# two mutually inconsistent coefficient sets, neither of which survives calibration
CANDIDATE_A = PropagationVariant(0.5, "dpsi", -0.5, -2.0, 1.0)
CANDIDATE_B = PropagationVariant(1.0, "psi", -1.0, 2.0, -1.0)


def candidate_variants(extended: bool = True):
    """The base candidate family, optionally widened by sign and weight flips.

    The base family has dC2 weight in {1/2, 1}, C3 argument in
    {psi, d_tau psi}, C3 weight in {-1/2, -1}, delta C1 weight in {+2, -2}
    and K(C3#) sign in {+, -}. The extended family also allows positive C3
    weights and delta C1 weights of +-1.
    """
    c3w = (-0.5, -1.0, 0.5, 1.0) if extended else (-0.5, -1.0)
    dc1 = (2.0, -2.0, 1.0, -1.0) if extended else (2.0, -2.0)
    return [PropagationVariant(a, x, b, s, t)
            for a, x, b, s, t in itertools.product((0.5, 1.0), ("psi", "dpsi"), c3w, dc1, (1.0, -1.0))]


_FD5 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def propagation_terms(traj: Trajectory, margin: int = 2):
    """Per-record building blocks of every candidate identity.

    Returns a list of dicts for records ``margin .. len-1-margin``; each
    holds the finite-difference time derivatives ``dC1, dC2, dC3`` and the
    fields entering the right-hand sides.
    """
    states = traj.states
    if len(states) < 5:
        raise ValueError(f"propagation needs at least 5 recorded states, got {len(states)}")
    cfg = traj.cfg
    step = traj.record_step
    cons = [constraint_residuals(s, cfg) for s in states]
    out = []
    for j in range(max(2, margin), len(states) - max(2, margin)):
        s = states[j]
        h = s.h
        c = 1.0 / (s.n - 1)
        e = np.exp(-4.0 * c * s.phi.data)
        window = cons[j - 2:j + 3]
        fd = {name: sum(w * getattr(r, name).data for w, r in zip(_FD5, window)) / step
              for name in ("C1", "C2", "C3")}
        r = cons[j]
        trk = trace(h, s.K).data
        dpsi = s.psi.like(evolution_rhs(s, cfg).psi)
        c3up = sharp(h, r.C3).data
        out.append({
            "tau": s.tau,
            "dC1": fd["C1"], "dC2": fd["C2"], "dC3": fd["C3"],
            "C1": r.C1.data, "C2": r.C2.data, "C3": r.C3.data,
            "trK": trk,
            "grad_C2": exterior_derivative(r.C2).data,
            "div_C1": codifferential(h, r.C1).data,
            "C3_psi": e * form_contract(h, r.C3, s.psi).data,
            "C3_dpsi": e * form_contract(h, r.C3, dpsi).data,
            "K_C3": np.einsum("ji...,i...->j...", s.K.data, c3up),
            "rho_C3": 4.0 * c * s.rho.data * r.C3.data,
        })
    return out


def _defects(t, v: PropagationVariant):
    d1 = t["dC1"] - (-0.5 * t["trK"] * t["C1"] + v.dc2_weight * t["grad_C2"]
                     + v.c3_weight * t["C3_" + v.c3_argument])
    d2 = t["dC2"] - (v.dc1_weight * t["div_C1"] - t["trK"] * t["C2"])
    d3 = t["dC3"] - (-0.5 * t["trK"] * t["C3"] + t["rho_C3"] + v.kc3_sign * t["K_C3"])
    return d1, d2, d3


def propagation_residuals(traj_or_terms, variant: PropagationVariant):
    """Max norms of ``(D1, D2, D3)`` per interior record, shape ``(T, 3)``."""
    terms = traj_or_terms
    if isinstance(traj_or_terms, Trajectory):
        terms = propagation_terms(traj_or_terms)
    return np.array([[float(np.max(np.abs(d))) for d in _defects(t, variant)] for t in terms])


def random_violating_state(grid, rng, amplitude=0.01, modes=1) -> CauchyState:
    """Smooth random Cauchy data on T^2 violating every constraint.

    Amplitudes much above the default can drive the metric degenerate
    within the calibration window.
    """
    xs = grid.coords()

    def smooth():
        val = np.zeros(grid.shape)
        for _ in range(3):
            ks = rng.integers(-modes, modes + 1, size=grid.n)
            arg = sum(2 * np.pi * k * x / L for k, x, L in zip(ks, xs, grid.lengths))
            val += rng.normal() * np.cos(arg + rng.uniform(0, 2 * np.pi))
        return val

    from ..geometry import Metric
    from ..grid import ScalarField, SymTensor2, TwoForm
    d = grid.dim
    h = np.zeros((d, d) + grid.shape)
    K = np.zeros((d, d) + grid.shape)
    psi = np.zeros((d, d) + grid.shape)
    for i in range(d):
        for j in range(i, d):
            h[i, j] = h[j, i] = (1.0 if i == j else 0.0) + amplitude * smooth()
            K[i, j] = K[j, i] = 0.3 * (i + 1) * (1.0 if i == j else 0.4) + amplitude * 4 * smooth()
        for j in range(i + 1, d):
            val = 0.7 + amplitude * 4 * smooth()
            psi[i, j], psi[j, i] = val, -val
    return CauchyState(Metric(grid, h), SymTensor2(grid, K),
                       ScalarField(grid, amplitude * 4 * smooth()),
                       ScalarField(grid, 0.2 + amplitude * 4 * smooth()),
                       TwoForm(grid, psi), TwoForm.zeros(grid))


@dataclass
class CalibrationReport:
    verdict: str
    winner: PropagationVariant | None
    levels: list
    scores: dict
    orders: dict
    non_discriminated: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def ledger_entry(self):
        return {
            "verdict": self.verdict,
            "winner": None if self.winner is None else {**self.winner.as_dict(), "label": self.winner.label()},
            "levels": self.levels,
            "winner_order": None if self.winner is None else self.orders[self.winner.label()],
            "best_rival_ratio": self.best_rival_ratio(),
            "non_discriminated": self.non_discriminated,
            "variants": {k: {"scores": self.scores[k], "order": self.orders[k]} for k in self.scores},
            "notes": self.notes,
        }

    def best_rival_ratio(self):
        if self.winner is None:
            return None
        w = self.scores[self.winner.label()][-1]
        rivals = [v[-1] for k, v in self.scores.items() if k != self.winner.label()]
        return min(rivals) / w if rivals and w > 0 else None


def _order(a, b):
    if a <= 0 or b <= 0:
        return float("nan")
    return math.log2(a / b)


def calibrate_identities(generator=None, resolutions=(16, 32, 64), tau_end=0.125, seed=0,
                         lengths=(1.0, 1.0), lam=0.0, variants=None, courant=0.25,
                         min_order=3.5, rival_factor=10.0, filter_modes=None) -> CalibrationReport:
    """Refinement study over candidate propagation identities.

    ``generator(grid, rng)`` builds Cauchy data; by default smooth random
    constraint-violating data. Grid spacing and time step are refined
    together. The score of a variant at a level is the maximum over interior
    records and over the three identities of ``max |D_i|``. A variant wins
    when its order between the two finest levels is at least ``min_order``
    and every rival scores at least ``rival_factor`` times higher at the
    finest level; otherwise the verdict is ``inconclusive``.
    """
    from ..grid import Grid
    if generator is None:
        generator = random_violating_state
    variants = candidate_variants() if variants is None else list(variants)
    scores = {v.label(): [] for v in variants}
    spread = []
    for N in resolutions:
        grid = Grid([N] * len(lengths), lengths)
        state = generator(grid, np.random.default_rng(seed))
        cfg = EvolutionConfig.for_span(grid, tau_end, lam=lam, courant=courant, filter_modes=filter_modes)
        traj = evolve(state, cfg)
        terms = propagation_terms(traj)
        per = {}
        for v in variants:
            per[v.label()] = propagation_residuals(terms, v)
            scores[v.label()].append(float(np.max(per[v.label()])))
        spread.append(per)
    orders = {k: _order(s[-2], s[-1]) for k, s in scores.items()}

    # coefficients whose flips never change any identity defect are flagged
    non_disc = []
    fields = ("dc2_weight", "c3_argument", "c3_weight", "dc1_weight", "kc3_sign")
    for fname in fields:
        distinct = False
        for v in variants:
            for u in variants:
                others_equal = all(getattr(u, f) == getattr(v, f) for f in fields if f != fname)
                if others_equal and getattr(u, fname) != getattr(v, fname):
                    a = spread[-1][v.label()]
                    b = spread[-1][u.label()]
                    if np.max(np.abs(a - b)) > 1e-9 * max(1e-300, float(np.max(np.abs(a)) + np.max(np.abs(b)))):
                        distinct = True
                        break
            if distinct:
                break
        if not distinct:
            non_disc.append(fname)

    converging = [v for v in variants if orders[v.label()] >= min_order]
    winner = None
    verdict = "inconclusive"
    notes = []
    if len(converging) == 1:
        cand = converging[0]
        best = scores[cand.label()][-1]
        rivals = [s[-1] for k, s in scores.items() if k != cand.label()]
        if all(r >= rival_factor * best for r in rivals):
            winner, verdict = cand, "selected"
        else:
            notes.append("a unique variant converges but some rival is within the separation factor")
    elif not converging:
        notes.append("no variant converges at the required order")
    else:
        notes.append(f"{len(converging)} variants converge; not discriminated")
    if non_disc:
        notes.append("trajectory does not discriminate: " + ", ".join(non_disc))
    levels = [{"N": N, "tau_end": tau_end} for N in resolutions]
    return CalibrationReport(verdict, winner, levels, scores, orders, non_disc, notes)
