"""Predicting projective Bell outcomes from sequentially read ancillas.

Protocol per trial: couple an ancilla to each Bell qubit along the very
axis that will later be tested projectively (strength V = settings.v),
read each ancilla out through a long sequence of very weak z measurements
(strength v = readout.v, `steps` repetitions), average the readouts, and
predict the later projective outcome from the sign of that average.

Because the coupling and the projective test share an axis, every
operation on the Bell side is diagonal in the same eigenbasis, so the
joint distribution factors exactly: the projective outcome pair (t1, t2)
follows the Born rule of the undisturbed Bell state, and conditioned on
t_i the ancilla is a z-diagonal qubit with <sigma_z> = t_i * V.  The
batch engine samples that factorization directly; it is not a shortcut
around the physics but an exact reformulation, and the test suite checks
it against the explicit coupling-unitary route.

At saturated readout (steps * v^2 >= 25) the readout sign recovers the
ancilla eigenbranch almost surely, so prediction accuracy approaches
(1 + V)/2: perfect at V = 1, coin-flip as V -> 0.  The complementary
post_protocol_chsh shows what the coupling costs: the Bell pair's own
violation decays toward the classical bound as V grows.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import streams
from .qubits import (
    MIN_BRANCH_PROB,
    DegenerateBranchError,
    QuantumState,
    axis_projectors,
    check_strength,
    lift1,
    nonselective_weak,
    weak_kraus,
    weak_measure,
)
from .trials import (
    ChshReport,
    CorrelatorEstimate,
    Settings,
    chsh_combine,
    prepare_bell,
)

SATURATION_THRESHOLD = 25.0  # steps * v^2 at which readout is treated as saturated

# Projective test axes for the after-protocol Bell check (radians):
# qubit 1 in {0, pi/2}, qubit 2 in {pi/4, -pi/4} maximize the ideal combination.
POST_TEST_AXES_1 = (0.0, math.pi / 2)
POST_TEST_AXES_2 = (math.pi / 4, -math.pi / 4)

_WILSON_Z = 1.959963984540054  # two-sided 95%

# Outcome pairs in cumulative-probability order for branch sampling.
_BRANCHES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class SequentialReadoutParams:
    """Per-step strength and length of the ancilla readout sequence."""

    v: float
    steps: int

    def __post_init__(self) -> None:
        check_strength(self.v)
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be an integer >= 1, got {self.steps}")

    @property
    def saturated(self) -> bool:
        return self.steps * self.v**2 >= SATURATION_THRESHOLD

    @property
    def blocks_per_trial(self) -> int:
        return -(-int(self.steps) // streams.DRAWS_PER_BLOCK)


@dataclass(frozen=True)
class PredictionRecord:
    trial_index: int
    trajectory_mean1: float
    trajectory_mean2: float
    predicted1: int
    predicted2: int
    actual1: int
    actual2: int
    settings_id: str
    seed: int


@dataclass(frozen=True)
class AccuracyEstimate:
    """Pooled match fraction with a Wilson 95% interval."""

    accuracy: float
    ci_low: float
    ci_high: float
    matches: int
    count: int


class PredictionTable:
    """Column-oriented batch of prediction records."""

    __slots__ = (
        "trial_index",
        "trajectory_mean1",
        "trajectory_mean2",
        "predicted1",
        "predicted2",
        "actual1",
        "actual2",
        "settings_id",
        "seed",
    )

    def __init__(self, trial_index, mean1, mean2, pred1, pred2, act1, act2, settings_id, seed):
        self.trial_index = np.asarray(trial_index, dtype=np.int64)
        self.trajectory_mean1 = np.asarray(mean1, dtype=float)
        self.trajectory_mean2 = np.asarray(mean2, dtype=float)
        self.predicted1 = np.asarray(pred1, dtype=np.int64)
        self.predicted2 = np.asarray(pred2, dtype=np.int64)
        self.actual1 = np.asarray(act1, dtype=np.int64)
        self.actual2 = np.asarray(act2, dtype=np.int64)
        self.settings_id = settings_id
        self.seed = np.asarray(seed, dtype=np.uint64)

    def __len__(self) -> int:
        return self.trial_index.shape[0]

    def settings_ids(self) -> np.ndarray:
        if isinstance(self.settings_id, str):
            return np.full(len(self), self.settings_id, dtype=object)
        return np.asarray(self.settings_id, dtype=object)

    def row(self, i: int) -> PredictionRecord:
        sid = self.settings_id if isinstance(self.settings_id, str) else str(self.settings_id[i])
        return PredictionRecord(
            trial_index=int(self.trial_index[i]),
            trajectory_mean1=float(self.trajectory_mean1[i]),
            trajectory_mean2=float(self.trajectory_mean2[i]),
            predicted1=int(self.predicted1[i]),
            predicted2=int(self.predicted2[i]),
            actual1=int(self.actual1[i]),
            actual2=int(self.actual2[i]),
            settings_id=sid,
            seed=int(self.seed[i]),
        )

    @classmethod
    def concat(cls, parts: "list[PredictionTable]") -> "PredictionTable":
        if not parts:
            raise ValueError("cannot concatenate zero tables")
        if all(isinstance(p.settings_id, str) for p in parts) and len({p.settings_id for p in parts}) == 1:
            sid = parts[0].settings_id
        else:
            sid = np.concatenate([p.settings_ids() for p in parts])
        return cls(
            np.concatenate([p.trial_index for p in parts]),
            np.concatenate([p.trajectory_mean1 for p in parts]),
            np.concatenate([p.trajectory_mean2 for p in parts]),
            np.concatenate([p.predicted1 for p in parts]),
            np.concatenate([p.predicted2 for p in parts]),
            np.concatenate([p.actual1 for p in parts]),
            np.concatenate([p.actual2 for p in parts]),
            sid,
            np.concatenate([p.seed for p in parts]),
        )


def as_prediction_table(records) -> PredictionTable:
    if isinstance(records, PredictionTable):
        return records
    rows = list(records)
    if not rows:
        raise ValueError("empty record set")
    ids = {r.settings_id for r in rows}
    sid = rows[0].settings_id if len(ids) == 1 else np.array([r.settings_id for r in rows], dtype=object)
    return PredictionTable(
        [r.trial_index for r in rows],
        [r.trajectory_mean1 for r in rows],
        [r.trajectory_mean2 for r in rows],
        [r.predicted1 for r in rows],
        [r.predicted2 for r in rows],
        [r.actual1 for r in rows],
        [r.actual2 for r in rows],
        sid,
        [r.seed for r in rows],
    )


def predict(mean: float) -> int:
    """Sign rule for a trajectory mean; exact zero breaks to +1."""
    return -1 if mean < 0 else 1


def prediction_settings(v: float) -> Settings:
    """Same-axis protocol settings: couple and test along z and x."""
    return Settings(a1=0.0, a2=math.pi / 2, b1=0.0, b2=math.pi / 2, v=v)


def sequential_weak_sequence(
    state: QuantumState, qubit: int, axis: float, params: SequentialReadoutParams, rng: np.random.Generator
) -> tuple:
    """Read one qubit out `steps` times at per-step strength params.v.

    Returns (mean of the +-1 raw outcomes, final conditioned state).  Each
    step consumes exactly one uniform draw.  The conditioned state performs
    a random walk that collapses toward a sigma(axis) eigenstate; the walk's
    <sigma(axis)> sequence is a martingale.
    """
    total = 0
    for _ in range(params.steps):
        raw, state = weak_measure(state, qubit, axis, params.v, rng)
        total += raw
    return total / params.steps, state


# ---------------------------------------------------------------------------
# Batch engine


def _bell_branch_probs(settings: Settings) -> np.ndarray:
    """P(t1, t2) for projective axes (b1, b2), in _BRANCHES order."""
    rho = prepare_bell(settings.bell_kind).density()
    plus1, minus1 = axis_projectors(settings.b1)
    plus2, minus2 = axis_projectors(settings.b2)
    pick1 = {1: plus1, -1: minus1}
    pick2 = {1: plus2, -1: minus2}
    probs = np.array(
        [float(np.trace(np.kron(pick1[t1], pick2[t2]) @ rho).real) for t1, t2 in _BRANCHES]
    )
    return np.clip(probs, 0.0, 1.0)


def _sample_branches(probs: np.ndarray, u: np.ndarray) -> tuple:
    cum = np.cumsum(probs)
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(_BRANCHES) - 1)
    t1 = np.where(idx < 2, 1, -1).astype(np.int64)
    t2 = np.where(idx % 2 == 0, 1, -1).astype(np.int64)
    return t1, t2


def _readout_chain(m0: np.ndarray, readout: SequentialReadoutParams, u: np.ndarray) -> np.ndarray:
    """Run z-readout chains on z-diagonal ancillas, vectorized over trials.

    m0 holds each ancilla's initial <sigma_z>; u has one uniform per
    (trial, step), rows contiguous per step after transpose.  Returns the
    per-trial mean of the +-1 readout outcomes.  Per step: outcome o = +-1
    with P(+) = (1 + v m)/2, then the conditioned Bloch-z update
    m' = (m + o v)/(1 + o v m).
    """
    v = readout.v
    steps = int(readout.steps)
    by_step = np.ascontiguousarray(u[:, :steps].T)
    m = m0.astype(float).copy()
    total = np.zeros(m.shape, dtype=np.int64)
    for s in range(steps):
        p_plus = (1.0 + v * m) / 2.0
        o = np.where(by_step[s] < p_plus, 1, -1)
        total += o
        ov = o * v
        m = (m + ov) / (1.0 + ov * m)
    return total / steps


def _predict_range(
    settings: Settings, readout: SequentialReadoutParams, start: int, count: int, master_seed: int
) -> PredictionTable:
    probs = _bell_branch_probs(settings)
    u_bell = streams.window_uniforms(master_seed, streams.PREDICT_BELL_STREAM, start, count, 1)
    t1, t2 = _sample_branches(probs, u_bell[:, 0])

    blocks = readout.blocks_per_trial
    u1 = streams.window_uniforms(master_seed, streams.PREDICT_ANCILLA1_STREAM, start, count, blocks)
    mean1 = _readout_chain(t1 * settings.v, readout, u1)
    del u1
    u2 = streams.window_uniforms(master_seed, streams.PREDICT_ANCILLA2_STREAM, start, count, blocks)
    mean2 = _readout_chain(t2 * settings.v, readout, u2)
    del u2

    index = np.arange(start, start + count, dtype=np.int64)
    return PredictionTable(
        index,
        mean1,
        mean2,
        np.where(mean1 < 0, -1, 1),
        np.where(mean2 < 0, -1, 1),
        t1,
        t2,
        settings.settings_id,
        streams.derived_seed(master_seed, index),
    )


def _predict_task(args) -> PredictionTable:
    return _predict_range(*args)


def _require_same_axis(settings: Settings) -> None:
    if settings.a1 != settings.b1 or settings.a2 != settings.b2:
        raise ValueError(
            "prediction protocol requires coupling axes equal to projective axes "
            f"(a1={settings.a1}, b1={settings.b1}, a2={settings.a2}, b2={settings.b2})"
        )


def run_prediction_experiment(
    settings: Settings, readout: SequentialReadoutParams, trial_index: int, master_seed: int
) -> PredictionRecord:
    """One prediction trial, fully determined by (master_seed, trial_index).

    settings.v is the system-ancilla coupling strength; settings must have
    a_i = b_i (the protocol couples along the axes to be tested).  Detector
    noise in settings is not part of this protocol and is ignored.
    """
    _require_same_axis(settings)
    return _predict_range(settings, readout, trial_index, 1, master_seed).row(0)


def prediction_batch(
    settings: Settings,
    readout: SequentialReadoutParams,
    n_trials: int,
    master_seed: int,
    start: int = 0,
    workers: int = 1,
    chunk: int = 2048,
) -> PredictionTable:
    """Batch of prediction trials [start, start + n_trials), chunked.

    Identical output for every chunk size and worker count.
    """
    _require_same_axis(settings)
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    spans = [
        (settings, readout, s, min(chunk, start + n_trials - s), master_seed)
        for s in range(start, start + n_trials, chunk)
    ]
    if workers > 1 and len(spans) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_predict_task, spans))
    else:
        parts = [_predict_task(span) for span in spans]
    return parts[0] if len(parts) == 1 else PredictionTable.concat(parts)


def prediction_accuracy(records) -> AccuracyEstimate:
    """Fraction of predicted_i = actual_i, pooled over both qubits."""
    table = as_prediction_table(records)
    n = 2 * len(table)
    matches = int((table.predicted1 == table.actual1).sum()) + int(
        (table.predicted2 == table.actual2).sum()
    )
    p = matches / n
    z2 = _WILSON_Z**2
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = _WILSON_Z * math.sqrt(p * (1.0 - p) / n + z2 / (4 * n * n)) / denom
    return AccuracyEstimate(
        accuracy=p,
        ci_low=max(0.0, center - half),
        ci_high=min(1.0, center + half),
        matches=matches,
        count=n,
    )


# ---------------------------------------------------------------------------
# The after-protocol Bell check on the Bell qubits alone


def post_coupling_state(settings: Settings, post_select=None) -> QuantumState:
    """Bell pair after ancilla coupling along (a1, a2) at strength settings.v.

    Default marginalizes the ancilla record (non-selective channel).  With
    post_select = (c1, c2), c_i in {-1, +1}, the state is instead
    conditioned on ancilla i having collapsed to branch c_i, which at
    saturated readout applies the selective Kraus branch.
    """
    state = prepare_bell(settings.bell_kind)
    if post_select is None:
        state = nonselective_weak(state, 0, settings.a1, settings.v)
        return nonselective_weak(state, 1, settings.a2, settings.v)
    c1, c2 = post_select
    if c1 not in (-1, 1) or c2 not in (-1, 1):
        raise ValueError(f"post_select branches must be -1 or +1, got {post_select!r}")
    rho = state.density()
    for qubit, axis, c in ((0, settings.a1, c1), (1, settings.a2, c2)):
        big = lift1(weak_kraus(settings.v, axis).operator(c), qubit, 2)
        rho = big @ rho @ big.conj().T
        p = float(np.trace(rho).real)
        if p < MIN_BRANCH_PROB:
            raise DegenerateBranchError(f"post-selected branch {c} on qubit {qubit} has probability {p}")
        rho = rho / p
    return QuantumState.from_density((rho + rho.conj().T) / 2.0)


def _post_pair_probs(rho: np.ndarray, th1: float, th2: float) -> np.ndarray:
    plus1, minus1 = axis_projectors(th1)
    plus2, minus2 = axis_projectors(th2)
    pick1 = {1: plus1, -1: minus1}
    pick2 = {1: plus2, -1: minus2}
    probs = np.array(
        [float(np.trace(np.kron(pick1[t1], pick2[t2]) @ rho).real) for t1, t2 in _BRANCHES]
    )
    return np.clip(probs, 0.0, 1.0)


def exact_post_protocol_chsh(settings: Settings, post_select=None) -> float:
    """Exact combination the after-protocol Bell check converges to."""
    rho = post_coupling_state(settings, post_select).density()
    corr = {}
    for i, th1 in enumerate(POST_TEST_AXES_1):
        for j, th2 in enumerate(POST_TEST_AXES_2):
            probs = _post_pair_probs(rho, th1, th2)
            corr[(i, j)] = float(sum(t1 * t2 * p for (t1, t2), p in zip(_BRANCHES, probs)))
    return corr[(0, 0)] + corr[(0, 1)] + corr[(1, 0)] - corr[(1, 1)]


def post_protocol_chsh(
    settings: Settings,
    readout: SequentialReadoutParams,
    n_trials: int = 40000,
    master_seed: int = 0,
    post_select=None,
) -> ChshReport:
    """Standard projective Bell check on the Bell qubits after the protocol.

    Estimates the four correlators at the fixed test axes from n_trials
    projective samples (n_trials // 4 per axis pair) of the marginal
    (or post-selected) coupled state.  The marginal distribution of the
    Bell pair is unchanged by how the ancillas were read out, so `readout`
    does not shift this estimate; it is accepted because post-selection is
    only defined at saturated readout, which is validated here.
    """
    if post_select is not None and not readout.saturated:
        raise ValueError(
            "post-selection conditions on the readout collapse branch, which requires "
            f"saturated readout (steps * v^2 >= {SATURATION_THRESHOLD})"
        )
    n_per = n_trials // 4
    if n_per < 2:
        raise ValueError(f"n_trials must be >= 8 to estimate four correlators, got {n_trials}")
    rho = post_coupling_state(settings, post_select).density()
    estimates = {}
    for k, (i, j) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        probs = _post_pair_probs(rho, POST_TEST_AXES_1[i], POST_TEST_AXES_2[j])
        u = streams.window_uniforms(master_seed, streams.POST_CHSH_STREAM, k * n_per, n_per, 1)
        t1, t2 = _sample_branches(probs, u[:, 0])
        products = (t1 * t2).astype(float)
        estimates[(i, j)] = CorrelatorEstimate(
            value=float(products.mean()),
            stderr=float(products.std(ddof=1) / math.sqrt(n_per)),
            count=n_per,
        )
    return chsh_combine(estimates[(0, 0)], estimates[(0, 1)], estimates[(1, 0)], estimates[(1, 1)])
