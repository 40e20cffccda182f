"""Scenario distributions, sampling and Monte Carlo power estimation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import streams
from .permutation import ConfigError, PermutationPlan, asymptotic_test, run_test
from .statistics import Method
from .tables import Dataset

log = logging.getLogger(__name__)

SCENARIOS = tuple(range(1, 9))
WORST_CASE = "worst-case"


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Dense pmf with ``probs[x - 1, y - 1, z - 1] = P(X=x, Y=y, Z=z)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 3 or min(p.shape) < 1:
            raise ValueError(f"pmf must be a nonempty 3-d array, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("pmf has negative or non-finite entries")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"pmf sums to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def l1(self) -> int:
        return self.probs.shape[0]

    @property
    def l2(self) -> int:
        return self.probs.shape[1]

    @property
    def d(self) -> int:
        return self.probs.shape[2]

    def p_z(self) -> np.ndarray:
        return self.probs.sum(axis=(0, 1))

    def conditional(self, z: int) -> np.ndarray:
        """``P(X, Y | Z = z)`` as an (l1, l2) array."""
        sl = self.probs[:, :, z - 1]
        return sl / sl.sum()


def _from_conditionals(cond: np.ndarray, p_z: np.ndarray) -> JointPmf:
    p_z = p_z / p_z.sum()
    probs = cond * p_z[None, None, :]
    # absorb the last rounding error of the product so the total is 1 to machine precision
    return JointPmf(probs / math.fsum(probs.ravel()))


def _checkerboard(l1, l2, amplitude):
    """``{1 + (-1)^(x+y) * amplitude} / (l1 l2)`` for 1-based x, y."""
    x = np.arange(1, l1 + 1)[:, None]
    y = np.arange(1, l2 + 1)[None, :]
    return (1.0 + np.where((x + y) % 2 == 0, 1.0, -1.0) * amplitude) / (l1 * l2)


def _power_law(l1, l2):
    x = np.arange(1, l1 + 1, dtype=np.float64)[:, None]
    y = np.arange(1, l2 + 1, dtype=np.float64)[None, :]
    p = x**-2.0 * y**-2.0
    return p / p.sum()


def scenario_pmf(scenario: int, l1: int = 20, l2: int = 20, d: int = 10, q: float = 0.2) -> JointPmf:
    """The eight alternatives of the power study.

    1. power-law ``x^-2 y^-2`` with the corner cell set to 0.015, renormalised
    2. power-law with a +-delta checkerboard on the top-left 2x2 block
    3. diagonal construction (requires ``l1 == l2``), parameter ``q``
    4. perturbed uniform ``{1 + (-1)^(x+y)} / (l1 l2)``
    5. uniform 2x2 block in z=1, scenario 4 elsewhere
    6. 0.4/0.1 dependent 2x2 block in z=1, uniform elsewhere
    7. ``p_Z ~ 1/z``, checkerboard amplitude ``1/z``
    8. ``p_Z ~ 1/z``, checkerboard amplitude ``1/(d - z + 1)``
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected 1..8 or {WORST_CASE!r}")
    if min(l1, l2) < 2 or d < 1:
        raise ConfigError("scenarios need l1, l2 >= 2 and d >= 1")
    if scenario in (4, 5, 7, 8) and l1 % 2 and l2 % 2:
        raise ConfigError(f"scenario {scenario} is not a distribution when l1 and l2 are both odd")

    cond = np.empty((l1, l2, d))
    p_z = np.ones(d)
    if scenario == 1:
        base = _power_law(l1, l2)
        base[l1 - 1, l2 - 1] = 0.015
        cond[:] = (base / base.sum())[:, :, None]
    elif scenario == 2:
        base = _power_law(l1, l2)
        delta = base[:2, :2].min()
        base[:2, :2] += np.array([[1.0, -1.0], [-1.0, 1.0]]) * delta
        cond[:] = base[:, :, None]
    elif scenario == 3:
        if l1 != l2:
            raise ConfigError("scenario 3 requires l1 == l2")
        base = np.zeros((l1, l2))
        base[0, 0] = (1 - q) ** 2
        base[0, 1:] = (1 - q) * q / (l1 - 1)
        base[1:, 0] = (1 - q) * q / (l1 - 1)
        idx = np.arange(1, l1)
        base[idx, idx] = q**2 / (l1 - 1)
        total = base.sum()
        if abs(total - 1.0) > 1e-9:
            log.warning("scenario 3 conditional sums to %r; renormalising", total)
        cond[:] = (base / total)[:, :, None]
    elif scenario == 4:
        cond[:] = _checkerboard(l1, l2, 1.0)[:, :, None]
    elif scenario in (5, 6):
        first = np.zeros((l1, l2))
        if scenario == 5:
            first[:2, :2] = 0.25
            rest = _checkerboard(l1, l2, 1.0)
        else:
            first[:2, :2] = [[0.4, 0.1], [0.1, 0.4]]
            rest = np.full((l1, l2), 1.0 / (l1 * l2))
        cond[:] = rest[:, :, None]
        cond[:, :, 0] = first
    else:
        z = np.arange(1, d + 1)
        p_z = 1.0 / z
        amp = 1.0 / z if scenario == 7 else 1.0 / (d - z + 1)
        for m in range(d):
            cond[:, :, m] = _checkerboard(l1, l2, amp[m])
    return _from_conditionals(cond, p_z)


def worst_case_pmf(n: int, d: int) -> JointPmf:
    """Perfectly dependent 2x2 conditionals with almost all Z mass on z=1.

    ``P(Z=1) = (1 - 1/n)^(1/n)`` so a sample of size ``n`` lands entirely in
    bin 1 with probability ``1 - 1/n``; the chi-square reference still uses
    ``d`` degrees of freedom.
    """
    if n < 2 or d < 2:
        raise ConfigError("worst-case construction needs n >= 2 and d >= 2")
    p1 = (1.0 - 1.0 / n) ** (1.0 / n)
    p_z = np.full(d, (1.0 - p1) / (d - 1))
    p_z[0] = p1
    probs = np.zeros((2, 2, d))
    probs[0, 0, :] = probs[1, 1, :] = 0.5 * p_z
    return JointPmf(probs)


def sample_from(pmf: JointPmf, n: int, rng: np.random.Generator) -> Dataset:
    """``n`` i.i.d. draws by inverse-CDF lookup over the flattened pmf."""
    flat = pmf.probs.ravel()
    cdf = np.cumsum(flat)
    u = rng.random(n) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), flat.size - 1)
    x, y, z = np.unravel_index(idx, pmf.probs.shape)
    return Dataset(x + 1, y + 1, z + 1, pmf.l1, pmf.l2, pmf.d)


@dataclass(frozen=True)
class PowerEstimate:
    scenario: str
    method: str
    calibration: str
    n: int
    B: int | None
    alpha: float
    reps: int
    rejections: int
    seed: int

    @property
    def power(self) -> float:
        return self.rejections / self.reps

    @property
    def se(self) -> float:
        p = self.power
        return math.sqrt(p * (1 - p) / self.reps)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["power"] = self.power
        out["se"] = self.se
        return out


def _trial(pmf, n, plan, calibration, master_seed, i) -> bool:
    data = sample_from(pmf, n, streams.stream(master_seed, i, 0))
    if calibration == "asymptotic":
        return asymptotic_test(data, plan.method, plan.alpha).reject
    trial_plan = PermutationPlan(plan.method, plan.B, streams.derive_seed(master_seed, i, 1), plan.alpha)
    return run_test(data, trial_plan, workers=1).reject


def _trial_chunk(args):
    pmf, n, plan, calibration, master_seed, lo, hi = args
    return [_trial(pmf, n, plan, calibration, master_seed, i) for i in range(lo, hi)]


def estimate_power(
    pmf: JointPmf,
    n: int,
    plan: PermutationPlan,
    reps: int,
    master_seed: int,
    calibration: str = "permutation",
    scenario: str = "custom",
    workers: int | None = None,
) -> PowerEstimate:
    """Rejection rate of ``plan`` over ``reps`` independent samples of size ``n``.

    Trial ``i`` samples from stream ``(master_seed, i, 0)`` and tests with a seed
    derived from ``(master_seed, i, 1)``; trials may run in worker processes
    without changing the result.  ``plan.seed`` is ignored.
    """
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    if n < 0:
        raise ConfigError("n must be >= 0")
    if calibration not in ("permutation", "asymptotic"):
        raise ConfigError(f"unknown calibration {calibration!r}")
    if calibration == "asymptotic" and not plan.method.classical:
        raise ConfigError("asymptotic calibration is only defined for chi2 and g")
    streams.check_seed(master_seed)
    workers = streams.default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    if workers == 1:
        outcomes = _trial_chunk((pmf, n, plan, calibration, master_seed, 0, reps))
    else:
        step = max(1, -(-reps // (4 * workers)))
        chunks = [(pmf, n, plan, calibration, master_seed, lo, min(lo + step, reps)) for lo in range(0, reps, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = [r for part in pool.map(_trial_chunk, chunks) for r in part]
    return PowerEstimate(
        scenario=str(scenario),
        method=plan.method.value,
        calibration=calibration,
        n=n,
        B=plan.B if calibration == "permutation" else None,
        alpha=plan.alpha,
        reps=reps,
        rejections=int(sum(outcomes)),
        seed=master_seed,
    )
