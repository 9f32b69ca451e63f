# services/runner/core/suites.py
"""
随机化性质检查 (bounds_suite 与 check 共用)
每个函数接收自己的随机数流，返回 CheckResult，metrics 里至少有 trials / violations / min_slack
"""
from typing import Callable, Dict

import numpy as np

from common.errors import NumericalError
from common.schemas import CheckResult, ProbabilitySequence, SiteGeometry
from services.chain.core.arealaw_analysis import binary_relative_entropy, dephasing_channel, expectation_E, relative_entropy
from services.chain.core.spectra_entropy import (
    example_state,
    example_state_renyi,
    gibbs_entropy,
    gibbs_entropy_bound,
    gibbs_state,
    majorizes,
    renyi_entropy,
    renyi_lower_bound,
    renyi_upper_bound,
    tail_weights,
)
from services.chain.core.tensor_core import (
    partial_trace,
    random_state,
    reduced_density_matrix,
    schmidt_spectrum,
    truncation_error,
)

LOWER_ALPHAS = (0.3, 0.5, 0.9)
UPPER_ALPHAS = (1.5, 2.0, 5.0)
SCHUR_ALPHAS = (0.3, 0.7, 1.0, 2.0, 5.0)
SLACK = 1e-9


def _trials(base: int, scale: float) -> int:
    return max(1, int(round(base * scale)))


def _result(name: str, trials: int, violations: int, min_slack: float, detail: str = "") -> CheckResult:
    return CheckResult(
        name=name,
        passed=violations == 0,
        detail=detail or f"{violations}/{trials} 次违反",
        metrics={"trials": float(trials), "violations": float(violations), "min_slack": float(min_slack)},
    )


def random_spectrum(rng: np.random.Generator, low: int = 4, high: int = 256) -> ProbabilitySequence:
    """长度 [low, high] 的随机谱，衰减速度也随机"""
    n = int(rng.integers(low, high + 1))
    weights = rng.random(n) ** rng.uniform(1.0, 8.0)
    return ProbabilitySequence.from_weights(weights)


def renyi_sandwich(rng: np.random.Generator, scale: float = 1.0) -> CheckResult:
    """每个随机谱、每个 r：下界 ≤ S^α (α<1)，S^α ≤ 上界 (α>1)"""
    trials = _trials(1000, scale)
    violations, worst = 0, np.inf
    for _ in range(trials):
        p = random_spectrum(rng)
        eps2 = tail_weights(p)
        r = np.arange(eps2.size)
        lower_mask = (r >= 2) & (eps2 > 0)
        upper_mask = (r >= 1) & (eps2 < 1)
        for alpha in LOWER_ALPHAS:
            if not np.any(lower_mask):
                continue
            bound = renyi_lower_bound(np.minimum(eps2[lower_mask], 1.0), r[lower_mask], alpha)
            slack = renyi_entropy(p, alpha).value - np.atleast_1d(bound)
            worst = min(worst, float(slack.min()))
            violations += int(np.count_nonzero(slack < -SLACK))
        for alpha in UPPER_ALPHAS:
            bound = renyi_upper_bound(eps2[upper_mask], r[upper_mask], alpha)
            slack = np.atleast_1d(bound) - renyi_entropy(p, alpha).value
            worst = min(worst, float(slack.min()))
            violations += int(np.count_nonzero(slack < -SLACK))
    return _result("renyi_sandwich", trials, violations, worst)


def _prefix_oracle(a: np.ndarray, b: np.ndarray) -> bool:
    n = max(a.size, b.size)
    pa = np.pad(a, (0, n - a.size))
    pb = np.pad(b, (0, n - b.size))
    return all(pa[:m].sum() >= pb[:m].sum() - 1e-12 for m in range(1, n + 1))


def majorization(rng: np.random.Generator, scale: float = 1.0) -> CheckResult:
    """
    构造 a ≻ b (b = 若干置换的凸组合作用在 a 上)，检查 Schur 凹性；
    另取一对无关的随机序列，检查 majorizes 与前缀和暴力判定一致
    """
    trials = _trials(10000, scale)
    violations, worst = 0, np.inf
    for _ in range(trials):
        n = int(rng.integers(2, 17))
        a = ProbabilitySequence.from_weights(rng.random(n) ** 3)
        w = rng.dirichlet(np.ones(3))
        mixed = sum(wk * a.values[rng.permutation(n)] for wk in w)
        b = ProbabilitySequence.from_weights(mixed)
        if not majorizes(a, b):
            violations += 1
        for alpha in SCHUR_ALPHAS:
            slack = renyi_entropy(b, alpha).value - renyi_entropy(a, alpha).value
            worst = min(worst, slack)
            violations += int(slack < -SLACK)

        c = ProbabilitySequence.from_weights(rng.random(int(rng.integers(1, 17))))
        if majorizes(a, c) != _prefix_oracle(a.values, c.values):
            violations += 1
    return _result("majorization", trials, violations, worst)


def expectation_dual_path(rng: np.random.Generator, scale: float = 1.0) -> CheckResult:
    """随机态上 𝔼 的两条计算路径一致 (不一致时 expectation_E 抛 NumericalError)"""
    trials = _trials(100, scale)
    violations = 0
    for _ in range(trials):
        d = int(rng.integers(2, 7))
        state = random_state(SiteGeometry.uniform(d, 2), rng)
        try:
            expectation_E(state, int(rng.integers(1, d)))
        except NumericalError:
            violations += 1
    return _result("expectation_dual_path", trials, violations, 0.0)


def _random_density(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


def _random_contraction(rng: np.random.Generator, n: int) -> np.ndarray:
    h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    _, u = np.linalg.eigh(h + h.conj().T)
    o = (u * rng.random(n)) @ u.conj().T
    return 0.5 * (o + o.conj().T)


def data_processing(rng: np.random.Generator, scale: float = 1.0) -> CheckResult:
    """相对熵经过两结果退相干信道后不增"""
    trials = _trials(500, scale)
    violations, worst = 0, np.inf
    for _ in range(trials):
        n = int(rng.integers(2, 9))
        rho, sigma, o_b = _random_density(rng, n), _random_density(rng, n), _random_contraction(rng, n)
        before = relative_entropy(rho, sigma)
        p, e = dephasing_channel(rho, o_b)[0], dephasing_channel(sigma, o_b)[0]
        slack = before - binary_relative_entropy(p, e)
        worst = min(worst, slack)
        violations += int(slack < -SLACK)
    return _result("data_processing", trials, violations, worst)


def example_state_suite(rng: np.random.Generator, scale: float = 1.0) -> CheckResult:
    """反例态：秩一近似误差 = √p，切口 j ≤ d 的 S^{1/2} 与闭式一致"""
    violations, worst, trials = 0, np.inf, 0
    for d in (2, 3, 4):
        p = 1.0 / d
        state = example_state(d, p)
        err = truncation_error(schmidt_spectrum(state, d), 1)
        trials += 1
        violations += int(abs(err - np.sqrt(p)) > 1e-12)
        for j in range(1, d + 1):
            trials += 1
            diff = abs(renyi_entropy(schmidt_spectrum(state, j), 0.5).value - example_state_renyi(p, j, 0.5))
            worst = min(worst, -diff)
            violations += int(diff > 1e-9)
    return _result("example_state", trials, violations, worst)


def chained_partial_trace(rng: np.random.Generator, scale: float = 1.0) -> CheckResult:
    """先迹掉 C 再迹掉 B，与一次迹掉 B∪C 相同"""
    trials = _trials(50, scale)
    violations, worst = 0, np.inf
    for _ in range(trials):
        d = int(rng.integers(3, 6))
        geometry = SiteGeometry.uniform(d, 2)
        state = random_state(geometry, rng)
        a = int(rng.integers(1, d))
        b = int(rng.integers(a, d))
        rho = np.outer(state.amplitudes, state.amplitudes.conj())
        step = partial_trace(rho, geometry.dims, (1, b + 1))
        chained = partial_trace(step, geometry.dims[:b + 1], (1, a))
        diff = float(np.max(np.abs(chained - reduced_density_matrix(state, (1, a)))))
        worst = min(worst, -diff)
        violations += int(diff > 1e-12)
    return _result("chained_partial_trace", trials, violations, worst)


def gibbs_linear(rng: np.random.Generator, scale: float = 1.0) -> CheckResult:
    """64 能级线性谱，E = 1：β ≈ ln 2，界等于 Gibbs 态的精确熵"""
    levels = np.arange(64, dtype=np.float64)
    beta, bound = gibbs_entropy_bound(levels, 1.0)
    exact = gibbs_entropy(gibbs_state(levels, beta))
    beta_err = abs(beta - np.log(2.0))
    bound_err = abs(bound - exact)
    violations = int(beta_err > 1e-6) + int(bound_err > 1e-9)
    result = _result("gibbs_linear", 2, violations, -max(beta_err, bound_err), f"β={beta!r}, 界={bound!r}, 精确熵={exact!r}")
    return result.model_copy(update={"metrics": {**result.metrics, "beta": beta, "bound": bound}})


SUITES: Dict[str, Callable[[np.random.Generator, float], CheckResult]] = {
    "renyi_sandwich": renyi_sandwich,
    "majorization": majorization,
    "expectation_dual_path": expectation_dual_path,
    "data_processing": data_processing,
    "example_state": example_state_suite,
    "chained_partial_trace": chained_partial_trace,
    "gibbs_linear": gibbs_linear,
}
