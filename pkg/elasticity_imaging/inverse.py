"""
Statistical modulus reconstruction by fixed-point proximal splitting.

The integrated observation model f = D(u^m)·E + w̃ has signal-dependent
colored noise w̃ = w − K(E)·n with covariance Γ = Σ_w + K(E)·Σ_n·K(E)ᵀ.
The solver alternates a Γ update from the current estimate (outer loop)
with proximal-gradient steps on

    g(E) + λ·TV(E),   g(E) = ½ (f − D·E)ᵀ Γ⁻¹ (f − D·E),

subject to E ≥ floor (inner loop). Only free DOFs enter the residual.
"""

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy import sparse

from .constants import (
    DEFAULT_ACCELERATION,
    DEFAULT_FLOOR,
    DEFAULT_INNER_ITERS,
    DEFAULT_LAMBDA_REL,
    DEFAULT_OUTER_ITERS,
    DEFAULT_SIGMA_FLOOR_REL,
    DEFAULT_TOLERANCE,
    DEFAULT_TV_INNER_ITERS,
    DIVERGENCE_FACTOR,
    FLOAT_FORMAT,
    GAMMA_JITTER,
    MAX_STEP_HALVINGS,
    POWER_ITER_MAX,
    POWER_ITER_RTOL,
    POWER_ITER_SEED,
    STEP_SAFETY,
)
from .fem_core import PsiTensor, dmatrix
from .prox import Regularizer, prox_nonneg
from .synth import NoiseModel

logger = logging.getLogger(__name__)

ACCELERATIONS = ("none", "fista")
TRACE_COLUMNS = ["outer", "iteration", "g", "tv", "cost", "step", "rel_change"]


class SolverError(Exception):
    """Custom exception for reconstruction errors."""

    pass


class CovarianceError(SolverError):
    """Raised when the effective noise covariance Γ cannot be factorized."""

    pass


class SolverDivergedError(SolverError):
    """Raised when the objective blows up; carries the partial trace."""

    def __init__(self, message: str, trace: "SolverTrace", estimate: np.ndarray) -> None:
        super().__init__(message)
        self.trace = trace
        self.estimate = estimate


@dataclass(frozen=True)
class SolverConfig:
    """
    Parameters of the fixed-point proximal-splitting solver.

    Attributes:
        lam: TV weight λ. None selects λ from lambda_rel.
        lambda_rel: Relative TV weight used when lam is None.
        outer_iters: Γ updates.
        inner_iters: Proximal steps per Γ.
        tv_inner_iters: Dual iterations of the TV prox.
        tolerance: Inner early-stop threshold on ‖ΔE‖/‖E‖.
        floor: Lower bound ε_floor on the modulus.
        initial_modulus: Homogeneous E₀. None fits it to the data.
        exact_prox: Use the joint prox of TV and E ≥ floor instead of
            composing the two.
        acceleration: "fista" (monotone, the default) or "none" for plain
            proximal-gradient steps.
        sigma_floor_rel: Minimum force noise std relative to ‖f‖_∞.
        step_safety: Factor applied to 1/L.
    """

    lam: Optional[float] = None
    lambda_rel: float = DEFAULT_LAMBDA_REL
    outer_iters: int = DEFAULT_OUTER_ITERS
    inner_iters: int = DEFAULT_INNER_ITERS
    tv_inner_iters: int = DEFAULT_TV_INNER_ITERS
    tolerance: float = DEFAULT_TOLERANCE
    floor: float = DEFAULT_FLOOR
    initial_modulus: Optional[float] = None
    exact_prox: bool = False
    acceleration: str = DEFAULT_ACCELERATION
    sigma_floor_rel: float = DEFAULT_SIGMA_FLOOR_REL
    step_safety: float = STEP_SAFETY

    def __post_init__(self) -> None:
        if self.lam is not None and not self.lam >= 0:
            raise SolverError(f"λ must be non-negative, got {self.lam}")
        if not self.lambda_rel >= 0:
            raise SolverError(f"lambda_rel must be non-negative, got {self.lambda_rel}")
        for name in ("outer_iters", "inner_iters", "tv_inner_iters"):
            if getattr(self, name) < 1:
                raise SolverError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.tolerance < 0:
            raise SolverError(f"tolerance must be non-negative, got {self.tolerance}")
        if self.floor < 0:
            raise SolverError(f"floor must be non-negative, got {self.floor}")
        if self.initial_modulus is not None and not self.initial_modulus > 0:
            raise SolverError(
                f"initial_modulus must be positive, got {self.initial_modulus}"
            )
        if self.acceleration not in ACCELERATIONS:
            raise SolverError(
                f"acceleration must be one of {ACCELERATIONS}, got {self.acceleration!r}"
            )
        if not 0 < self.step_safety <= 1:
            raise SolverError(f"step_safety must lie in (0, 1], got {self.step_safety}")


@dataclass(frozen=True, eq=False)
class GammaOperator:
    """
    Cholesky-factorized Γ on the free DOFs.

    Attributes:
        free: Free DOF indices the operator acts on.
        matrix: Dense Γ, or None for the identity.
        factor: (L, lower) from scipy.linalg.cho_factor, or None for identity.
        logdet: log|Γ|.
        jitter: Diagonal shift added to make the factorization succeed.
    """

    free: np.ndarray
    matrix: Optional[np.ndarray] = None
    factor: Optional[Tuple[np.ndarray, bool]] = None
    logdet: float = 0.0
    jitter: float = 0.0

    @classmethod
    def identity(cls, free: Any) -> "GammaOperator":
        """Γ = I, on `free` indices or on range(free) when given an int."""
        indices = np.arange(free) if np.isscalar(free) else np.asarray(free)
        return cls(free=indices.astype(np.int64))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, free: Any = None) -> "GammaOperator":
        """
        Factorize a symmetric Γ, retrying once with a small diagonal jitter.

        Raises:
            CovarianceError: If Γ is not positive definite even after jitter.
        """
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0]
        indices = np.arange(n) if free is None else np.asarray(free, dtype=np.int64)
        if not np.all(np.isfinite(matrix)):
            raise CovarianceError("Γ has non-finite entries")

        jitter = 0.0
        try:
            factor = scipy.linalg.cho_factor(matrix, lower=True)
        except np.linalg.LinAlgError:
            jitter = GAMMA_JITTER * float(np.trace(matrix)) / max(n, 1)
            if not jitter > 0:
                raise CovarianceError("Γ is singular and has zero trace")
            logger.warning(f"Γ factorization failed, retrying with jitter {jitter:.3e}")
            matrix = matrix + jitter * np.eye(n)
            try:
                factor = scipy.linalg.cho_factor(matrix, lower=True)
            except np.linalg.LinAlgError as e:
                raise CovarianceError(f"Γ is not positive definite after jitter: {e}")

        logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
        return cls(free=indices, matrix=matrix, factor=factor, logdet=logdet, jitter=jitter)

    @property
    def size(self) -> int:
        return int(self.free.size)

    def solve(self, v: np.ndarray) -> np.ndarray:
        """Γ⁻¹·v by triangular solves against the stored factor."""
        if self.factor is None:
            return np.array(v, dtype=float)
        return np.asarray(scipy.linalg.cho_solve(self.factor, v))

    def min_eigenvalue(self) -> float:
        if self.matrix is None:
            return 1.0
        return float(scipy.linalg.eigvalsh(self.matrix, subset_by_index=[0, 0])[0])


def gamma_matrix(psi: PsiTensor, E: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """Dense Γ = Σ_w + K(E)·Σ_n·K(E)ᵀ restricted to the free DOFs."""
    E = np.asarray(E, dtype=float)
    if not np.all(np.isfinite(E)):
        raise SolverError("Γ update requires a finite modulus field")
    free = psi.free_dofs
    K = psi.stiffness(E)[free][:, free].toarray()
    sigma_n = noise.displacement_variances(psi.fixed)[free]
    sigma_w = noise.force_variances(psi.fixed)[free]
    gamma = (K * sigma_n) @ K.T
    gamma = 0.5 * (gamma + gamma.T)
    gamma[np.diag_indices_from(gamma)] += sigma_w
    return np.asarray(gamma)


def gamma_update(psi: PsiTensor, E: np.ndarray, noise: NoiseModel) -> GammaOperator:
    """
    Rebuild and factorize Γ from the current modulus estimate.

    Raises:
        SolverError: If E is not finite.
        CovarianceError: If Γ cannot be factorized.
    """
    return GammaOperator.from_matrix(gamma_matrix(psi, E, noise), psi.free_dofs)


def _restrict(D: Any, free: np.ndarray) -> np.ndarray:
    if sparse.issparse(D):
        return np.asarray(D.tocsr()[free].toarray())
    return np.asarray(D, dtype=float)[free]


class _Objective:
    """g and ∇g for a fixed Γ, with D and f restricted to the free DOFs."""

    def __init__(self, D_free: np.ndarray, f_free: np.ndarray, gamma: GammaOperator):
        self.D = D_free
        self.f = f_free
        self.gamma = gamma

    def weighted_residual(self, E: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r = self.f - self.D @ E
        return r, self.gamma.solve(r)

    def value(self, E: np.ndarray) -> float:
        r, z = self.weighted_residual(E)
        return 0.5 * float(r @ z)

    def gradient(self, E: np.ndarray) -> np.ndarray:
        _, z = self.weighted_residual(E)
        return np.asarray(-self.D.T @ z)

    def normal_apply(self, v: np.ndarray) -> np.ndarray:
        """DᵀΓ⁻¹D·v."""
        return np.asarray(self.D.T @ self.gamma.solve(self.D @ v))


def _objective(D: Any, f: np.ndarray, gamma: GammaOperator) -> _Objective:
    f = np.asarray(f, dtype=float)
    return _Objective(_restrict(D, gamma.free), f[gamma.free], gamma)


def cost_g(D: Any, f: np.ndarray, gamma: GammaOperator, E: np.ndarray) -> float:
    """
    g(E) = ½ rᵀΓ⁻¹r with r = f − D·E on the free DOFs.

    Raises:
        SolverError: If the value is not finite.
    """
    value = _objective(D, f, gamma).value(np.asarray(E, dtype=float))
    if not np.isfinite(value):
        raise SolverError("g(E) is not finite")
    return value


def grad_g(D: Any, f: np.ndarray, gamma: GammaOperator, E: np.ndarray) -> np.ndarray:
    """∇g(E) = −DᵀΓ⁻¹(f − D·E)."""
    gradient = _objective(D, f, gamma).gradient(np.asarray(E, dtype=float))
    if not np.all(np.isfinite(gradient)):
        raise SolverError("∇g(E) has non-finite entries")
    return gradient


def _power_iteration(
    apply: Callable[[np.ndarray], np.ndarray],
    n: int,
    max_iter: int = POWER_ITER_MAX,
    rtol: float = POWER_ITER_RTOL,
    seed: int = POWER_ITER_SEED,
) -> Tuple[float, bool]:
    """Largest eigenvalue of a symmetric PSD operator by seeded power iteration."""
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = apply(v)
        updated = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0, True
        v = w / norm
        if abs(updated - estimate) <= rtol * abs(updated):
            return updated, True
        estimate = updated
    return estimate, False


def lipschitz_constant(D: Any, gamma: GammaOperator) -> float:
    """
    L = λ_max(DᵀΓ⁻¹D), by power iteration.

    Falls back to the bound ‖D‖_F² / λ_min(Γ) when the iteration does not
    converge.

    Raises:
        SolverError: If D is zero.
    """
    return _lipschitz(_Objective(_restrict(D, gamma.free), np.zeros(gamma.size), gamma))


def _lipschitz(objective: _Objective) -> float:
    gamma = objective.gamma
    if not np.any(objective.D):
        raise SolverError("Lipschitz constant undefined for D = 0")
    L, converged = _power_iteration(objective.normal_apply, objective.D.shape[1])
    if not converged:
        bound = float(np.sum(objective.D**2)) / gamma.min_eigenvalue()
        logger.warning(
            f"Power iteration did not converge in {POWER_ITER_MAX} iterations; "
            f"using bound L = {bound:.3e} instead of {L:.3e}"
        )
        return bound
    return L


def lipschitz_step(D: Any, gamma: GammaOperator, safety: float = STEP_SAFETY) -> float:
    """Step size γ = safety / L for the gradient of g."""
    return safety / lipschitz_constant(D, gamma)


@dataclass(frozen=True)
class InnerRecord:
    outer: int
    iteration: int
    g: float
    tv: float
    cost: float
    step: float
    rel_change: float


@dataclass(frozen=True)
class OuterRecord:
    outer: int
    gamma_seconds: float
    logdet: float
    lipschitz: float
    step: float
    inner_iterations: int
    jitter: float


@dataclass
class SolverTrace:
    """Per-iteration history of a reconstruction."""

    lam: float = 0.0
    inner: List[InnerRecord] = field(default_factory=list)
    outer: List[OuterRecord] = field(default_factory=list)
    status: str = "running"

    def rows(self) -> List[Dict[str, Any]]:
        return [asdict(record) for record in self.inner]

    def summary(self) -> Dict[str, Any]:
        final = self.inner[-1] if self.inner else None
        return {
            "status": self.status,
            "lambda": self.lam,
            "outer_iterations": len(self.outer),
            "inner_iterations": len(self.inner),
            "final_cost": final.cost if final else None,
            "outer": [asdict(record) for record in self.outer],
        }

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=TRACE_COLUMNS)
            writer.writeheader()
            for row in self.rows():
                writer.writerow(
                    {
                        key: FLOAT_FORMAT % value if isinstance(value, float) else value
                        for key, value in row.items()
                    }
                )

    def write_summary(self, path: str) -> None:
        with open(path, "w") as handle:
            json.dump(self.summary(), handle, indent=2, sort_keys=True)


def effective_noise(noise: NoiseModel, f: np.ndarray, rel: float) -> NoiseModel:
    """Raise σ_w to rel·‖f‖_∞ when lower, so Γ stays positive definite."""
    floor = rel * float(np.max(np.abs(f))) if np.size(f) else 0.0
    if noise.sigma_force >= floor:
        return noise
    logger.debug(f"Flooring force noise std from {noise.sigma_force:g} to {floor:g}")
    return replace(noise, sigma_force=floor)


def _homogeneous_fit(D_free: np.ndarray, f_free: np.ndarray) -> float:
    column = D_free.sum(axis=1)
    denominator = float(column @ column)
    if denominator == 0:
        raise SolverError("Cannot fit an initial modulus: D·1 is zero")
    c = float(column @ f_free) / denominator
    if not c > 0:
        raise SolverError(f"Homogeneous fit gave a non-positive modulus {c:.3e}")
    return c


def default_initial_modulus(D: Any, f: np.ndarray, free: np.ndarray) -> float:
    """
    Homogeneous modulus c minimizing ‖f − c·D·1‖ on the free DOFs.

    Raises:
        SolverError: If D·1 is zero or the fit is not positive.
    """
    return _homogeneous_fit(_restrict(D, free), np.asarray(f, dtype=float)[free])


def resolve_lambda(
    config: SolverConfig, lipschitz: float, E_scale: float, regularizer: Regularizer
) -> float:
    """λ from the config, or lambda_rel·L·E_scale / length scale of R."""
    if config.lam is not None:
        return config.lam
    return config.lambda_rel * lipschitz * E_scale / regularizer.length_scale


class _ProximalSolver:
    """
    The double loop shared by the statistical and baseline reconstructions.

    `gamma_for` maps the current estimate to the Γ used by the next inner loop.
    """

    def __init__(
        self,
        psi: PsiTensor,
        f: np.ndarray,
        u_m: np.ndarray,
        gamma_for: Callable[[np.ndarray], GammaOperator],
        config: SolverConfig,
        regularizer: Regularizer,
    ) -> None:
        free = psi.free_dofs
        self.psi = psi
        self.D = _restrict(dmatrix(psi, u_m), free)
        self.f = np.asarray(f, dtype=float)[free]
        if not np.any(self.D):
            raise SolverError("D(u^m) is zero; the displacement carries no information")
        self.gamma_for = gamma_for
        self.config = config
        self.regularizer = regularizer
        self.lam: Optional[float] = None
        self.trace = SolverTrace()

    def initial_estimate(self, E0: Optional[np.ndarray]) -> np.ndarray:
        if E0 is None:
            c = self.config.initial_modulus or _homogeneous_fit(self.D, self.f)
            E = np.full(self.psi.n_nodes, c)
        else:
            E = np.array(E0, dtype=float)
            if E.shape != (self.psi.n_nodes,):
                raise SolverError(
                    f"E0 must have shape ({self.psi.n_nodes},), got {E.shape}"
                )
        return prox_nonneg(E, self.config.floor)

    def prox_step(self, x: np.ndarray, weight: float) -> np.ndarray:
        if self.config.exact_prox:
            return self.regularizer.prox_constrained(x, weight, self.config.floor)
        return prox_nonneg(self.regularizer.prox(x, weight), self.config.floor)

    def run(self, E0: Optional[np.ndarray]) -> Tuple[np.ndarray, SolverTrace]:
        E = self.initial_estimate(E0)
        initial_cost: Optional[float] = None
        for outer in range(self.config.outer_iters):
            started = time.perf_counter()
            gamma = self.gamma_for(E)
            gamma_seconds = time.perf_counter() - started
            objective = _Objective(self.D, self.f, gamma)
            lipschitz = _lipschitz(objective)
            step = self.config.step_safety / lipschitz
            if self.lam is None:
                self.lam = resolve_lambda(
                    self.config, lipschitz, float(np.mean(np.abs(E))), self.regularizer
                )
                self.trace.lam = self.lam
                logger.info(f"Using λ = {self.lam:.4e}")

            E, cost, iterations = self.inner_loop(objective, E, step, outer, initial_cost)
            if initial_cost is None:
                initial_cost = self.trace.inner[0].cost if self.trace.inner else cost

            self.trace.outer.append(
                OuterRecord(
                    outer=outer,
                    gamma_seconds=gamma_seconds,
                    logdet=gamma.logdet,
                    lipschitz=lipschitz,
                    step=step,
                    inner_iterations=iterations,
                    jitter=gamma.jitter,
                )
            )
            logger.info(
                f"Outer iteration {outer + 1}/{self.config.outer_iters}: "
                f"cost {cost:.6e}, log|Γ| {gamma.logdet:.4e}, step {step:.3e}, "
                f"{iterations} inner steps"
            )
        self.trace.status = "ok"
        return E, self.trace

    def costs(self, objective: _Objective, E: np.ndarray) -> Tuple[float, float, float]:
        g_value = objective.value(E)
        tv_value = self.regularizer.value(E)
        return g_value, tv_value, g_value + (self.lam or 0.0) * tv_value

    def inner_loop(
        self,
        objective: _Objective,
        E: np.ndarray,
        base_step: float,
        outer: int,
        initial_cost: Optional[float],
    ) -> Tuple[np.ndarray, float, int]:
        """Proximal-gradient steps with Γ frozen; returns (E, cost, steps taken)."""
        lam = self.lam or 0.0
        fista = self.config.acceleration == "fista"
        _, _, cost = self.costs(objective, E)
        _check_finite(cost, outer, 0)
        reference = initial_cost if initial_cost is not None else cost
        point, t = E, 1.0
        iterations = 0

        for iteration in range(1, self.config.inner_iters + 1):
            gradient = objective.gradient(point)
            step = base_step
            accepted = False
            for halving in range(MAX_STEP_HALVINGS + 1):
                candidate = self.prox_step(point - step * gradient, lam * step)
                g_value, tv_value, candidate_cost = self.costs(objective, candidate)
                _check_finite(candidate_cost, outer, iteration)
                accepted = candidate_cost <= cost + 1e-12 * abs(cost)
                if accepted or halving == MAX_STEP_HALVINGS:
                    break
                step *= 0.5

            iterations = iteration
            restart = fista and not accepted and t > 1.0
            if not accepted and not restart:
                logger.warning(
                    f"Descent guard exhausted at outer {outer}, iteration {iteration}; "
                    "stopping the inner loop"
                )
                break

            new_E = candidate if accepted else E
            if not accepted:
                g_value, tv_value, candidate_cost = self.costs(objective, E)
            norm = np.linalg.norm(E)
            rel_change = float(np.linalg.norm(new_E - E) / norm) if norm > 0 else 0.0
            self.trace.inner.append(
                InnerRecord(
                    outer, iteration, g_value, tv_value, candidate_cost, step, rel_change
                )
            )
            logger.debug(
                f"outer {outer} iteration {iteration}: cost {candidate_cost:.6e}, "
                f"step {step:.3e}, change {rel_change:.3e}"
            )

            if reference > 0 and candidate_cost > DIVERGENCE_FACTOR * reference:
                self.trace.status = "diverged"
                raise SolverDivergedError(
                    f"Cost {candidate_cost:.3e} exceeds {DIVERGENCE_FACTOR:g}x the "
                    f"initial cost at outer {outer}, iteration {iteration}",
                    self.trace,
                    new_E,
                )

            if restart:
                # Momentum overshot: continue from E with a plain step.
                point, t = E, 1.0
                continue
            if fista:
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                point = new_E + ((t - 1.0) / t_next) * (new_E - E)
                t = t_next
            else:
                point = new_E
            E, cost = new_E, candidate_cost
            if rel_change < self.config.tolerance:
                break

        return E, cost, iterations


def _check_finite(value: float, outer: int, iteration: int) -> None:
    if not np.isfinite(value):
        raise SolverError(
            f"Objective became non-finite at outer {outer}, iteration {iteration}"
        )


def reconstruct(
    psi: PsiTensor,
    f: np.ndarray,
    u_m: np.ndarray,
    noise: NoiseModel,
    config: SolverConfig,
    regularizer: Regularizer,
    E0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolverTrace]:
    """
    Statistical reconstruction of the modulus field.

    Each outer iteration rebuilds Γ from the current estimate and recomputes
    the Lipschitz step; each inner iteration applies
    E ← prox_nonneg(prox_TV(E − γ∇g(E))) with a descent guard that halves γ
    whenever g + λ·TV would increase.

    Args:
        psi: Stiffness tensor with the Dirichlet set of the experiment.
        f: Measured force FieldVector.
        u_m: Measured displacement FieldVector.
        noise: Displacement and force noise model.
        config: Solver parameters.
        regularizer: Penalty R, typically TotalVariation(mesh).
        E0: Initial estimate; defaults to a homogeneous fit.

    Returns:
        (Ê, trace): The estimate after config.outer_iters outer iterations.

    Raises:
        SolverError: On invalid inputs or a non-finite objective.
        CovarianceError: If Γ cannot be factorized.
        SolverDivergedError: If the cost exceeds its divergence threshold.
    """
    effective = effective_noise(noise, f, config.sigma_floor_rel)
    logger.info(
        f"Statistical reconstruction: σ_lat {effective.sigma_lateral:.3e}, "
        f"σ_ax {effective.sigma_axial:.3e}, σ_f {effective.sigma_force:.3e}"
    )
    solver = _ProximalSolver(
        psi, f, u_m, lambda E: gamma_update(psi, E, effective), config, regularizer
    )
    return solver.run(E0)


def baseline_lsq(
    psi: PsiTensor,
    f: np.ndarray,
    u_m: np.ndarray,
    lam: Optional[float] = None,
    iters: Optional[int] = None,
    config: Optional[SolverConfig] = None,
    regularizer: Optional[Regularizer] = None,
    E0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolverTrace]:
    """
    Unweighted comparator: the same proximal loop with Γ fixed to I.

    Args:
        lam: Overrides config.lam when given.
        iters: Overrides config.outer_iters when given.

    Raises:
        SolverError: If no regularizer is supplied.
    """
    if regularizer is None:
        raise SolverError("baseline_lsq needs a regularizer")
    config = config or SolverConfig()
    if lam is not None:
        config = replace(config, lam=lam)
    if iters is not None:
        config = replace(config, outer_iters=iters)
    identity = GammaOperator.identity(psi.free_dofs)
    logger.info("Baseline least-squares reconstruction (Γ = I)")
    solver = _ProximalSolver(psi, f, u_m, lambda E: identity, config, regularizer)
    return solver.run(E0)
