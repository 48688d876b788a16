"""One weak-plus-projective trial, Monte Carlo batches, and the exact oracle.

A trial: prepare a Bell pair, weakly measure qubit 1 along a1 and qubit 2
along a2 (strength V), contaminate both raw outcomes with detector noise,
projectively measure qubit 1 along b1 and qubit 2 along b2, rescale the
noisy raws by 1/V.  The four correlators E(alpha_i, beta_j) combine into
the CHSH-style statistic e11 + e12 + e21 - e22.

Two execution paths share one draw layout: run_trial produces a single
record, simulate_trials a columnar batch; both read the same per-trial
counter window, so a trial's record is identical no matter which path,
chunking, or worker count produced it.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from . import streams
from .qubits import (
    ATOL,
    MIN_BRANCH_PROB,
    DegenerateBranchError,
    NO_NOISE,
    NoiseModel,
    QuantumState,
    bloch_observable,
    check_strength,
    concurrence,
    lift1,
    nonselective_weak,
    weak_kraus,
)

# Angles (radians) that maximize the ideal combination at 2*sqrt(2).
DEFAULT_A1 = 0.0
DEFAULT_A2 = math.pi / 2
DEFAULT_B1 = math.pi / 4
DEFAULT_B2 = -math.pi / 4

BELL_AMPLITUDES = {
    "phi_plus": np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / math.sqrt(2.0),
    "psi_minus": np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / math.sqrt(2.0),
}

FIELDS = ("alpha1", "alpha2", "beta1", "beta2")

# Per-trial draw window: 2 Philox blocks = 8 draws, 6 consumed, in order:
# weak qubit 1, weak qubit 2, noise raw 1, noise raw 2, projective qubit 1,
# projective qubit 2.
TRIAL_BLOCKS = 2
_MIN_UNIFORM = 2.0**-53  # floor before inverse-CDF so ndtri stays finite


@dataclass(frozen=True)
class Settings:
    """Axes (radians), coupling strength, noise, and Bell-state choice."""

    a1: float = DEFAULT_A1
    a2: float = DEFAULT_A2
    b1: float = DEFAULT_B1
    b2: float = DEFAULT_B2
    v: float = 1.0
    noise: NoiseModel = NO_NOISE
    bell_kind: str = "phi_plus"

    def __post_init__(self) -> None:
        for name in ("a1", "a2", "b1", "b2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"axis angle {name} must be finite")
        check_strength(self.v)
        if self.bell_kind not in BELL_AMPLITUDES:
            raise ValueError(
                f"unknown bell_kind {self.bell_kind!r}; supported: {sorted(BELL_AMPLITUDES)}"
            )

    @property
    def settings_id(self) -> str:
        n = self.noise
        return (
            f"{self.bell_kind};a1={self.a1:.12g};a2={self.a2:.12g};"
            f"b1={self.b1:.12g};b2={self.b2:.12g};v={self.v:.12g};"
            f"bias={n.bias:.12g};sigma={n.sigma:.12g}"
        )


def default_settings(v: float, noise: NoiseModel = NO_NOISE, bell_kind: str = "phi_plus") -> Settings:
    return Settings(v=v, noise=noise, bell_kind=bell_kind)


@dataclass(frozen=True)
class TrialRecord:
    """One realization: noisy raws, rescaled alphas, binary betas."""

    trial_index: int
    raw1: float
    raw2: float
    alpha1: float
    alpha2: float
    beta1: int
    beta2: int
    settings_id: str
    seed: int


@dataclass(frozen=True)
class CorrelatorEstimate:
    value: float
    stderr: float
    count: int


@dataclass(frozen=True)
class ChshReport:
    e11: CorrelatorEstimate
    e12: CorrelatorEstimate
    e21: CorrelatorEstimate
    e22: CorrelatorEstimate
    chsh: float
    chsh_stderr: float


class TrialTable:
    """Column-oriented batch of trial records."""

    __slots__ = ("trial_index", "raw1", "raw2", "alpha1", "alpha2", "beta1", "beta2", "settings_id", "seed")

    def __init__(self, trial_index, raw1, raw2, alpha1, alpha2, beta1, beta2, settings_id, seed):
        self.trial_index = np.asarray(trial_index, dtype=np.int64)
        self.raw1 = np.asarray(raw1, dtype=float)
        self.raw2 = np.asarray(raw2, dtype=float)
        self.alpha1 = np.asarray(alpha1, dtype=float)
        self.alpha2 = np.asarray(alpha2, dtype=float)
        self.beta1 = np.asarray(beta1, dtype=np.int64)
        self.beta2 = np.asarray(beta2, dtype=np.int64)
        # one id string per table when homogeneous, else an array of ids
        self.settings_id = settings_id
        self.seed = np.asarray(seed, dtype=np.uint64)

    def __len__(self) -> int:
        return self.trial_index.shape[0]

    def settings_ids(self) -> np.ndarray:
        if isinstance(self.settings_id, str):
            return np.full(len(self), self.settings_id, dtype=object)
        return np.asarray(self.settings_id, dtype=object)

    def column(self, name: str) -> np.ndarray:
        if name not in FIELDS:
            raise ValueError(f"unknown field {name!r}; choose one of {FIELDS}")
        return getattr(self, name).astype(float, copy=False)

    def row(self, i: int) -> TrialRecord:
        sid = self.settings_id if isinstance(self.settings_id, str) else str(self.settings_id[i])
        return TrialRecord(
            trial_index=int(self.trial_index[i]),
            raw1=float(self.raw1[i]),
            raw2=float(self.raw2[i]),
            alpha1=float(self.alpha1[i]),
            alpha2=float(self.alpha2[i]),
            beta1=int(self.beta1[i]),
            beta2=int(self.beta2[i]),
            settings_id=sid,
            seed=int(self.seed[i]),
        )

    @classmethod
    def concat(cls, parts: "list[TrialTable]") -> "TrialTable":
        if not parts:
            raise ValueError("cannot concatenate zero tables")
        if all(isinstance(p.settings_id, str) for p in parts) and len({p.settings_id for p in parts}) == 1:
            sid = parts[0].settings_id
        else:
            sid = np.concatenate([p.settings_ids() for p in parts])
        return cls(
            np.concatenate([p.trial_index for p in parts]),
            np.concatenate([p.raw1 for p in parts]),
            np.concatenate([p.raw2 for p in parts]),
            np.concatenate([p.alpha1 for p in parts]),
            np.concatenate([p.alpha2 for p in parts]),
            np.concatenate([p.beta1 for p in parts]),
            np.concatenate([p.beta2 for p in parts]),
            sid,
            np.concatenate([p.seed for p in parts]),
        )


def as_table(records) -> TrialTable:
    """Normalize a TrialTable or an iterable of TrialRecord into a table."""
    if isinstance(records, TrialTable):
        return records
    rows = list(records)
    if not rows:
        raise ValueError("empty record set")
    ids = {r.settings_id for r in rows}
    sid = rows[0].settings_id if len(ids) == 1 else np.array([r.settings_id for r in rows], dtype=object)
    return TrialTable(
        [r.trial_index for r in rows],
        [r.raw1 for r in rows],
        [r.raw2 for r in rows],
        [r.alpha1 for r in rows],
        [r.alpha2 for r in rows],
        [r.beta1 for r in rows],
        [r.beta2 for r in rows],
        sid,
        [r.seed for r in rows],
    )


def prepare_bell(kind: str) -> QuantumState:
    """Two-qubit Bell state: phi_plus = (|00>+|11>)/sqrt2 or psi_minus = (|01>-|10>)/sqrt2."""
    if kind not in BELL_AMPLITUDES:
        raise ValueError(f"unknown bell_kind {kind!r}; supported: {sorted(BELL_AMPLITUDES)}")
    return QuantumState.from_amplitudes(BELL_AMPLITUDES[kind])


# ---------------------------------------------------------------------------
# Vectorized trial engine


def _measure_columns(amps: np.ndarray, theta: float, v: float, qubit: int, u: np.ndarray):
    """Sample one x-z measurement across a batch of pure 2-qubit states.

    amps has shape (n, 4); u is one uniform per row.  Returns (outcomes,
    updated amplitudes).  Same probabilities and update as qubits.weak_measure.
    """
    obs = lift1(bloch_observable(theta), qubit, 2)
    pair = weak_kraus(v, theta)
    k_plus = lift1(pair.k_plus, qubit, 2)
    k_minus = lift1(pair.k_minus, qubit, 2)

    mean = np.einsum("ni,ij,nj->n", amps.conj(), obs, amps).real
    p_plus = np.clip((1.0 + v * mean) / 2.0, 0.0, 1.0)
    out = np.where(u < p_plus, 1, -1)
    prob = np.where(out > 0, p_plus, 1.0 - p_plus)
    if prob.size and float(prob.min()) < MIN_BRANCH_PROB:
        raise DegenerateBranchError("sampled branch probability below 1e-15")
    branch_plus = amps @ k_plus.T
    branch_minus = amps @ k_minus.T
    amps = np.where((out > 0)[:, None], branch_plus, branch_minus)
    amps /= np.sqrt(prob)[:, None]
    return out, amps


def _noisy(raw: np.ndarray, noise: NoiseModel, u: np.ndarray) -> np.ndarray:
    g = ndtri(np.maximum(u, _MIN_UNIFORM)) if noise.sigma > 0.0 else 0.0
    return raw + noise.bias + noise.sigma * g


def _simulate_range(settings: Settings, start: int, count: int, master_seed: int) -> TrialTable:
    """Trials [start, start+count) of the stream owned by master_seed."""
    u = streams.window_uniforms(master_seed, streams.TRIAL_STREAM, start, count, TRIAL_BLOCKS)
    amps = np.broadcast_to(BELL_AMPLITUDES[settings.bell_kind], (count, 4)).copy()

    raw1, amps = _measure_columns(amps, settings.a1, settings.v, 0, u[:, 0])
    raw2, amps = _measure_columns(amps, settings.a2, settings.v, 1, u[:, 1])
    noisy1 = _noisy(raw1.astype(float), settings.noise, u[:, 2])
    noisy2 = _noisy(raw2.astype(float), settings.noise, u[:, 3])
    beta1, amps = _measure_columns(amps, settings.b1, 1.0, 0, u[:, 4])
    beta2, _ = _measure_columns(amps, settings.b2, 1.0, 1, u[:, 5])

    index = np.arange(start, start + count, dtype=np.int64)
    return TrialTable(
        index,
        noisy1,
        noisy2,
        noisy1 / settings.v,
        noisy2 / settings.v,
        beta1,
        beta2,
        settings.settings_id,
        streams.derived_seed(master_seed, index),
    )


def _range_task(args) -> TrialTable:
    return _simulate_range(*args)


def run_trial(settings: Settings, trial_index: int, master_seed: int) -> TrialRecord:
    """One trial, fully determined by (master_seed, trial_index)."""
    return _simulate_range(settings, trial_index, 1, master_seed).row(0)


def simulate_trials(
    settings: Settings,
    n_trials: int,
    master_seed: int,
    start: int = 0,
    workers: int = 1,
    chunk: int = 1 << 16,
) -> TrialTable:
    """Monte Carlo batch of trials [start, start + n_trials).

    Chunked over the per-trial counter windows; results are identical for
    every chunk size and worker count.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    spans = [
        (settings, s, min(chunk, start + n_trials - s), master_seed)
        for s in range(start, start + n_trials, chunk)
    ]
    if workers > 1 and len(spans) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_range_task, spans))
    else:
        parts = [_range_task(span) for span in spans]
    return parts[0] if len(parts) == 1 else TrialTable.concat(parts)


# ---------------------------------------------------------------------------
# Estimation


def estimate_correlator(records, left: str, right: str) -> CorrelatorEstimate:
    """Sample mean and stderr of the product of two record fields."""
    table = as_table(records)
    n = len(table)
    if n < 2:
        raise ValueError(f"need at least 2 records to estimate a correlator, got {n}")
    products = table.column(left) * table.column(right)
    value = float(products.mean())
    stderr = float(products.std(ddof=1) / math.sqrt(n))
    return CorrelatorEstimate(value=value, stderr=stderr, count=n)


def chsh_combine(
    e11: CorrelatorEstimate,
    e12: CorrelatorEstimate,
    e21: CorrelatorEstimate,
    e22: CorrelatorEstimate,
) -> ChshReport:
    """Combine the four correlators with signature (+, +, +, -)."""
    chsh = e11.value + e12.value + e21.value - e22.value
    stderr = math.sqrt(e11.stderr**2 + e12.stderr**2 + e21.stderr**2 + e22.stderr**2)
    return ChshReport(e11=e11, e12=e12, e21=e21, e22=e22, chsh=chsh, chsh_stderr=stderr)


def estimate_chsh(records) -> ChshReport:
    table = as_table(records)
    return chsh_combine(
        estimate_correlator(table, "alpha1", "beta1"),
        estimate_correlator(table, "alpha1", "beta2"),
        estimate_correlator(table, "alpha2", "beta1"),
        estimate_correlator(table, "alpha2", "beta2"),
    )


# ---------------------------------------------------------------------------
# Exact oracle: enumerate both weak and both projective outcomes (16 branches)


def branch_distribution(settings: Settings) -> dict:
    """Joint pmf of (raw1, raw2, beta1, beta2) before detector noise.

    Sixteen branches: the evolving density operator is conditioned through
    weak Kraus updates on both qubits and eigenprojections on both qubits,
    in the same order as run_trial.  Probabilities sum to 1.
    """
    rho = prepare_bell(settings.bell_kind).density()
    pair1 = weak_kraus(settings.v, settings.a1)
    pair2 = weak_kraus(settings.v, settings.a2)
    proj1 = weak_kraus(1.0, settings.b1)
    proj2 = weak_kraus(1.0, settings.b2)
    pmf = {}
    for r1 in (1, -1):
        m1 = lift1(pair1.operator(r1), 0, 2)
        for r2 in (1, -1):
            m2 = lift1(pair2.operator(r2), 1, 2) @ m1
            for s1 in (1, -1):
                m3 = lift1(proj1.operator(s1), 0, 2) @ m2
                for s2 in (1, -1):
                    m = lift1(proj2.operator(s2), 1, 2) @ m3
                    pmf[(r1, r2, s1, s2)] = float(np.trace(m @ rho @ m.conj().T).real)
    return pmf


_FIELD_SLOT = {"alpha1": 0, "alpha2": 1, "beta1": 2, "beta2": 3}


def exact_correlator(settings: Settings, left: str, right: str) -> float:
    """E[left * right] from the 16-branch enumeration; no sampling.

    Detector noise enters analytically: independent zero-mean Gaussians drop
    out of cross moments, bias shifts alpha means, and the same-field alpha
    second moment picks up sigma^2.  Rescaling by 1/V is applied to alphas.
    """
    for name in (left, right):
        if name not in _FIELD_SLOT:
            raise ValueError(f"unknown field {name!r}; choose one of {FIELDS}")
    pmf = branch_distribution(settings)
    v, bias, sigma = settings.v, settings.noise.bias, settings.noise.sigma
    li, ri = _FIELD_SLOT[left], _FIELD_SLOT[right]
    total = 0.0
    for branch, p in pmf.items():
        if li < 2 and ri < 2:
            if li == ri:
                term = ((branch[li] + bias) ** 2 + sigma**2) / v**2
            else:
                term = (branch[li] + bias) * (branch[ri] + bias) / v**2
        elif li < 2:
            term = (branch[li] + bias) / v * branch[ri]
        elif ri < 2:
            term = branch[li] * (branch[ri] + bias) / v
        else:
            term = 1.0 if li == ri else branch[li] * branch[ri]
        total += p * term
    return total


def exact_mean(settings: Settings, field: str) -> float:
    """E[field] from the 16-branch enumeration (alphas include bias/V)."""
    if field not in _FIELD_SLOT:
        raise ValueError(f"unknown field {field!r}; choose one of {FIELDS}")
    pmf = branch_distribution(settings)
    slot = _FIELD_SLOT[field]
    raw_mean = sum(p * branch[slot] for branch, p in pmf.items())
    if slot < 2:
        return (raw_mean + settings.noise.bias) / settings.v
    return raw_mean


def exact_chsh(settings: Settings) -> float:
    """Exact e11 + e12 + e21 - e22 for the alpha_i x beta_j pairing."""
    return (
        exact_correlator(settings, "alpha1", "beta1")
        + exact_correlator(settings, "alpha1", "beta2")
        + exact_correlator(settings, "alpha2", "beta1")
        - exact_correlator(settings, "alpha2", "beta2")
    )


def chsh_curve(settings: Settings, v_grid) -> list:
    """Exact combination per coupling strength, as (v, chsh) pairs."""
    grid = [check_strength(v) for v in v_grid]
    if not grid:
        raise ValueError("v grid must be nonempty")
    return [(v, exact_chsh(replace(settings, v=v))) for v in grid]


# ---------------------------------------------------------------------------
# Residual entanglement after outcome-averaged coupling


def coupled_state(v: float, axis1: float, axis2: float, bell_kind: str = "phi_plus") -> QuantumState:
    """Bell pair after non-selective weak measurement of both qubits."""
    state = prepare_bell(bell_kind)
    state = nonselective_weak(state, 0, axis1, v)
    return nonselective_weak(state, 1, axis2, v)


def entanglement_curve(v_grid, axis: float = 0.0, bell_kind: str = "phi_plus") -> list:
    """Concurrence after symmetric coupling (both qubits, one shared axis).

    Returns (v, concurrence) pairs. With a common axis the curve is 1 - v^2:
    1 in the v -> 0 limit, strictly positive below v = 1.
    """
    grid = [check_strength(v) for v in v_grid]
    if not grid:
        raise ValueError("v grid must be nonempty")
    return [(v, concurrence(coupled_state(v, axis, axis, bell_kind))) for v in grid]
