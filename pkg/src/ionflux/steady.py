"""Algebraic steady state of the linearized chain: moments, currents, temperatures.

Linearizing the dynamics around equilibrium (y = x - x_eq) gives

    dy_n/dt = p_n / m
    dp_n/dt = -sum_l K_nl y_l - (gamma_n/m) p_n + xi_n(t)

with <xi_n(t) xi_l(t')> = 2 D_n delta_nl delta(t-t'). Setting every second
moment's time derivative to zero and using <p_n xi_l> = delta_nl D_n,
<y_n xi_l> = 0 yields a closed linear system for the stationary moments
S_nl = <y_n y_l>, P_nl = <p_n p_l>, C_nl = <y_n p_l>:

    (i)  P_nl / m - sum_k K_lk S_nk - (gamma_l/m) C_nl = 0      (all n, l)
    (ii) sum_k [K_nk C_kl + K_lk C_kn] + (gamma_n+gamma_l) P_nl / m
           = 2 delta_nl D_n                                     (n <= l)

Stationarity of S forces C_nl = -C_ln (zero diagonal), so the independent
unknowns are the N(N+1)/2 entries of S, the N(N+1)/2 of P, and the strict
upper triangle of C: N(3N+1)/2 in total, matching the equation count.

Two permanent backends solve the same physics: the packed moment system above
(default) and the dense stationary covariance equation A C + C A^T + Q = 0.
They act as mutual oracles and are never reduced to one.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve, solve_continuous_lyapunov

from .chain import ChainConfig, equilibrium_positions, hessian_at
from .constants import CODATA
from .errors import (ConfigurationError, InternalConsistencyError, SolverError,
                     UndefinedRectificationError)
from .molasses import BathAssignment
from .units import NaturalUnits

BALANCE_RTOL = 1e-8       # |J_L + J_R| <= BALANCE_RTOL * max(|J_L|, |J_R|)
RESIDUAL_RTOL = 1e-10     # solver residual contract, both backends
CONDITION_LIMIT = 1e14    # 1-norm condition estimate above this is a failure


@dataclass(frozen=True)
class LinearizedSystem:
    """Stiffness, friction, and noise of the linearized chain.

    Unit-agnostic: any consistent unit system works. left_sites/right_sites
    name the bathed regions for current bookkeeping; by default bathed sites
    left of the chain midpoint count as left.
    """

    K: np.ndarray
    gamma: np.ndarray
    diffusion: np.ndarray
    mass: float = 1.0
    left_sites: tuple = ()
    right_sites: tuple = ()

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        d = np.asarray(self.diffusion, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ConfigurationError("K must be a square matrix")
        n = K.shape[0]
        if g.shape != (n,) or d.shape != (n,):
            raise ConfigurationError("gamma and diffusion must have length N")
        if np.any(g < 0) or np.any(d < 0):
            raise ConfigurationError("gamma and diffusion must be nonnegative")
        if self.mass <= 0:
            raise ConfigurationError("mass must be positive")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "diffusion", d)
        if not self.left_sites and not self.right_sites:
            bathed = np.nonzero(g > 0)[0]
            object.__setattr__(self, "left_sites",
                               tuple(int(i) for i in bathed if i < n / 2))
            object.__setattr__(self, "right_sites",
                               tuple(int(i) for i in bathed if i >= n / 2))

    @property
    def N(self) -> int:
        return self.K.shape[0]


def _tri(N, i, j):
    # flat index of (i, j), i <= j, in the row-major upper triangle
    return i * N - i * (i + 1) // 2 + j


def _stri(N, i, j):
    # flat index of (i, j), i < j, in the strict upper triangle
    return i * (N - 1) - i * (i + 1) // 2 + (j - 1)


def moment_length(N: int) -> int:
    return N * (3 * N + 1) // 2


@dataclass(frozen=True)
class MomentVector:
    """Packed stationary moments [S upper, P upper, C strict upper].

    eta is float64; eta_hi, when present, is an extended-precision copy kept
    by the solver so current bookkeeping can subtract nearly equal numbers
    without hitting the float64 representation floor.
    """

    eta: np.ndarray
    N: int
    residual: float = 0.0
    condition: float = 0.0
    eta_hi: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if eta.shape != (moment_length(self.N),):
            raise ConfigurationError(
                f"moment vector must have length {moment_length(self.N)} for N={self.N}")
        object.__setattr__(self, "eta", eta)

    def _raw(self):
        return self.eta if self.eta_hi is None else self.eta_hi

    def _blocks(self, raw=False):
        N = self.N
        ns = N * (N + 1) // 2
        src = self._raw() if raw else self.eta
        dt = src.dtype
        S = np.zeros((N, N), dtype=dt)
        P = np.zeros((N, N), dtype=dt)
        C = np.zeros((N, N), dtype=dt)
        iu = np.triu_indices(N)
        S[iu] = src[:ns]
        S.T[iu] = src[:ns]
        P[iu] = src[ns:2 * ns]
        P.T[iu] = src[ns:2 * ns]
        su = np.triu_indices(N, k=1)
        C[su] = src[2 * ns:]
        C.T[su] = -src[2 * ns:]
        return S, P, C

    def position_block(self) -> np.ndarray:
        """<y_n y_l> as a symmetric N x N matrix."""
        return np.asarray(self._blocks()[0], dtype=float)

    def momentum_block(self) -> np.ndarray:
        """<p_n p_l> as a symmetric N x N matrix."""
        return np.asarray(self._blocks()[1], dtype=float)

    def cross_block(self) -> np.ndarray:
        """<y_n p_l> as an antisymmetric N x N matrix (zero diagonal)."""
        return np.asarray(self._blocks()[2], dtype=float)

    @classmethod
    def pack(cls, S, P, C, residual=0.0, condition=0.0):
        S = np.asarray(S, dtype=float)
        N = S.shape[0]
        iu = np.triu_indices(N)
        su = np.triu_indices(N, k=1)
        eta = np.concatenate([S[iu], np.asarray(P, dtype=float)[iu],
                              np.asarray(C, dtype=float)[su]])
        return cls(eta=eta, N=N, residual=residual, condition=condition)

    def to_covariance(self) -> "CovarianceMatrix":
        S, P, C = (np.asarray(b, dtype=float) for b in self._blocks())
        top = np.hstack([S, C])
        bot = np.hstack([C.T, P])
        return CovarianceMatrix(matrix=np.vstack([top, bot]), residual=self.residual)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Stationary covariance of the state (y_1..y_N, p_1..p_N).

    matrix is float64; matrix_hi, when present, is the extended-precision
    refined copy used for current bookkeeping (same role as eta_hi on
    MomentVector).
    """

    matrix: np.ndarray
    residual: float = 0.0
    matrix_hi: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
            raise ConfigurationError("covariance must be 2N x 2N")
        object.__setattr__(self, "matrix", M)

    @property
    def N(self) -> int:
        return self.matrix.shape[0] // 2

    def position_block(self):
        return self.matrix[:self.N, :self.N]

    def momentum_block(self):
        return self.matrix[self.N:, self.N:]

    def cross_block(self):
        return self.matrix[:self.N, self.N:]

    def to_moments(self) -> MomentVector:
        S = 0.5 * (self.position_block() + self.position_block().T)
        P = 0.5 * (self.momentum_block() + self.momentum_block().T)
        C = 0.5 * (self.cross_block() - self.cross_block().T)
        return MomentVector.pack(S, P, C, residual=self.residual)


def build_drift_and_noise(sys: LinearizedSystem):
    """Drift A and noise Q of the linear SDE dz = A z dt + noise, z = (y, p)."""
    N = sys.N
    A = np.zeros((2 * N, 2 * N))
    A[:N, N:] = np.eye(N) / sys.mass
    A[N:, :N] = -sys.K
    A[N:, N:] = -np.diag(sys.gamma) / sys.mass
    Q = np.zeros((2 * N, 2 * N))
    Q[N:, N:] = np.diag(2.0 * sys.diffusion)
    return A, Q


def _check_solvable(sys: LinearizedSystem):
    if not np.any(sys.gamma > 0):
        raise SolverError("no dissipation: stationary state undefined")
    try:
        np.linalg.cholesky(sys.K)
    except np.linalg.LinAlgError:
        raise SolverError(
            "stiffness matrix is not positive definite: "
            "no stable equilibrium to linearize around") from None


def _assemble_moment_system(sys: LinearizedSystem):
    """Rows of the stationary-moment equations in the packed unknown order."""
    N = sys.N
    K = sys.K
    g = sys.gamma
    m = sys.mass
    ns = N * (N + 1) // 2
    nm = moment_length(N)
    A = np.zeros((nm, nm))
    B = np.zeros(nm)

    def s_idx(i, j):
        return _tri(N, i, j) if i <= j else _tri(N, j, i)

    def p_idx(i, j):
        return ns + (_tri(N, i, j) if i <= j else _tri(N, j, i))

    def c_idx(i, j):
        # stored entry and sign for C_ij under antisymmetry; diagonal is absent
        if i == j:
            return None, 0.0
        if i < j:
            return 2 * ns + _stri(N, i, j), 1.0
        return 2 * ns + _stri(N, j, i), -1.0

    row = 0
    # (i): d<y_n p_l>/dt = 0 for every ordered pair
    for n in range(N):
        for l in range(N):
            A[row, p_idx(n, l)] += 1.0 / m
            for k in range(N):
                A[row, s_idx(n, k)] -= K[l, k]
            idx, sign = c_idx(n, l)
            if idx is not None:
                A[row, idx] -= g[l] / m * sign
            row += 1
    # (ii): d<p_n p_l>/dt = 0 on the upper triangle
    for n in range(N):
        for l in range(n, N):
            for k in range(N):
                idx, sign = c_idx(k, l)
                if idx is not None:
                    A[row, idx] += K[n, k] * sign
                idx, sign = c_idx(k, n)
                if idx is not None:
                    A[row, idx] += K[l, k] * sign
            A[row, p_idx(n, l)] += (g[n] + g[l]) / m
            if n == l:
                B[row] = 2.0 * sys.diffusion[n]
            row += 1
    return A, B


def _refined_solve(A, B):
    """LU solve with mixed-precision iterative refinement.

    The correction is accumulated in extended precision so the returned
    solution is accurate past the float64 representation of eta itself;
    the bath currents subtract nearly equal numbers and need the headroom.
    Returns (x_extended, relative_residual, condition_estimate).
    """
    anorm = np.abs(A).sum(axis=0).max()
    lu, piv = lu_factor(A)
    gecon, = get_lapack_funcs(("gecon",), (A,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or rcond <= 0 or 1.0 / rcond > CONDITION_LIMIT:
        cond = np.inf if rcond <= 0 else 1.0 / rcond
        raise SolverError(
            f"moment system ill-conditioned (estimate {cond:.2e}): "
            "check for vanishing dissipation or an unstable stiffness matrix")
    A_hi = A.astype(np.longdouble)
    B_hi = B.astype(np.longdouble)
    x = lu_solve((lu, piv), B).astype(np.longdouble)
    bnorm = float(np.linalg.norm(B))
    for _ in range(4):
        r = B_hi - A_hi @ x
        delta = lu_solve((lu, piv), np.asarray(r, dtype=float))
        x = x + delta.astype(np.longdouble)
        if np.linalg.norm(delta) <= 1e-19 * np.linalg.norm(np.asarray(x, dtype=float)):
            break
    res = float(np.linalg.norm(np.asarray(B_hi - A_hi @ x, dtype=float)))
    rel = res / bnorm if bnorm > 0 else res
    return x, rel, 1.0 / rcond


def solve_moments_paper(sys: LinearizedSystem,
                        residual_rtol: float = RESIDUAL_RTOL) -> MomentVector:
    """Solve the packed stationary-moment system (default backend)."""
    _check_solvable(sys)
    A, B = _assemble_moment_system(sys)
    x, rel, cond = _refined_solve(A, B)
    if rel > residual_rtol:
        raise SolverError(f"moment solve residual {rel:.2e} exceeds {residual_rtol:g}")
    return MomentVector(eta=np.asarray(x, dtype=float), N=sys.N,
                        residual=rel, condition=cond, eta_hi=x)


def solve_moments_lyapunov(sys: LinearizedSystem,
                           residual_rtol: float = RESIDUAL_RTOL) -> CovarianceMatrix:
    """Solve the stationary covariance equation A C + C A^T + Q = 0."""
    _check_solvable(sys)
    A, Q = build_drift_and_noise(sys)
    C = solve_continuous_lyapunov(A, -Q)
    # refine with extended-precision residuals; the float64 solution alone
    # loses the small-net-flow cancellation digits the currents need
    A_hi = A.astype(np.longdouble)
    Q_hi = Q.astype(np.longdouble)
    C_hi = (0.5 * (C + C.T)).astype(np.longdouble)
    qnorm = np.linalg.norm(Q)
    rel = np.inf
    for _ in range(4):
        R = A_hi @ C_hi + C_hi @ A_hi.T + Q_hi
        res = np.linalg.norm(R.astype(float))
        rel = res / qnorm if qnorm > 0 else res
        if rel < 64 * np.finfo(np.longdouble).eps:
            break
        delta = solve_continuous_lyapunov(A, -R.astype(float))
        C_hi = C_hi + 0.5 * (delta + delta.T).astype(np.longdouble)
    if rel > residual_rtol:
        raise SolverError(f"covariance residual {rel:.2e} exceeds {residual_rtol:g}")
    C = C_hi.astype(float)
    eig = np.linalg.eigvalsh(C)
    if eig[0] < -1e-12 * max(eig[-1], 0.0):
        raise InternalConsistencyError(
            f"stationary covariance has negative eigenvalue {eig[0]:.3e}")
    return CovarianceMatrix(matrix=C, residual=rel, matrix_hi=C_hi)


def _momentum_diag(moments):
    """Diagonal <p_n^2> in the best precision the moments object carries."""
    if isinstance(moments, MomentVector):
        raw = moments._raw()
        N = moments.N
        ns = N * (N + 1) // 2
        idx = np.asarray([ns + _tri(N, n, n) for n in range(N)])
        return raw[idx]
    if isinstance(moments, CovarianceMatrix):
        M = moments.matrix if moments.matrix_hi is None else moments.matrix_hi
        N = moments.N
        return np.diag(M[N:, N:]).copy()
    raise ConfigurationError(f"unsupported moments object {type(moments).__name__}")


def local_temperatures(sys: LinearizedSystem, moments,
                       units: NaturalUnits = None, constants=CODATA) -> np.ndarray:
    """Equipartition temperatures k_B T_n = <p_n^2>/m, in kelvin.

    With a natural-unit system pass its NaturalUnits so theta converts to K;
    an SI system needs no units argument.
    """
    pp = np.asarray(_momentum_diag(moments), dtype=float)
    theta = pp / sys.mass
    if units is not None:
        return units.kelvin(theta)
    return theta / constants.k_B


def site_currents(sys: LinearizedSystem, moments) -> np.ndarray:
    """Stationary power each bath feeds its site: (D_n - gamma_n <p_n^2>/m)/m.

    Exactly zero on unbathed sites. Computed in the precision of the moments
    so the near cancellation at small net flow keeps significant digits.
    """
    pp = _momentum_diag(moments)
    dt = pp.dtype
    g = sys.gamma.astype(dt)
    d = sys.diffusion.astype(dt)
    j = (d - g * pp / sys.mass) / sys.mass
    j[sys.gamma == 0] = 0.0
    return j


def bath_site_current(sys: LinearizedSystem, moments, n: int) -> float:
    return float(site_currents(sys, moments)[n])


def _balance_floor(sys: LinearizedSystem, moments) -> float:
    # what rounding of the stored moments can produce even for a perfect solve
    eps = np.finfo(_momentum_diag(moments).dtype).eps
    pp = np.abs(np.asarray(_momentum_diag(moments), dtype=float))
    scale = np.sum(sys.diffusion + sys.gamma * pp / sys.mass) / sys.mass
    return 64.0 * float(eps) * float(scale)


def total_currents(sys: LinearizedSystem, moments, check: bool = True,
                   balance_rtol: float = BALANCE_RTOL):
    """(J_L, J_R): net power from the left and right bath regions.

    The steady state requires J_L + J_R = 0; a violation beyond the relative
    tolerance (with an absolute floor at the moment-representation rounding
    level, which covers the equal-bath case where both currents vanish) means
    the solve failed and raises.
    """
    j = site_currents(sys, moments)
    J_L = float(sum(j[list(sys.left_sites)])) if sys.left_sites else 0.0
    J_R = float(sum(j[list(sys.right_sites)])) if sys.right_sites else 0.0
    if check:
        scale = max(abs(J_L), abs(J_R))
        tol = max(balance_rtol * scale, _balance_floor(sys, moments))
        if abs(J_L + J_R) > tol:
            raise InternalConsistencyError(
                f"energy balance violated: J_L + J_R = {J_L + J_R:.3e} "
                f"against max(|J_L|,|J_R|) = {scale:.3e}")
    return J_L, J_R


def rectification_factor(J_right_going: float, J_left_going: float) -> float:
    """R = (J_fwd - J_bwd)/max(J_fwd, J_bwd) for the two bias magnitudes."""
    jf = abs(J_right_going)
    jb = abs(J_left_going)
    top = max(jf, jb)
    if top == 0.0:
        raise UndefinedRectificationError(
            "both bias currents vanish; rectification factor undefined")
    return (jf - jb) / top


def stationarity_residuals(sys: LinearizedSystem, moments) -> np.ndarray:
    """Per-site net energy rate (bath input plus internal exchange).

    Zero for the exact stationary moments; reported as a solve diagnostic,
    never thrown.
    """
    pp = _momentum_diag(moments)
    dt = pp.dtype
    if isinstance(moments, MomentVector):
        S, P, C = moments._blocks(raw=True)
    else:
        C = moments.cross_block().astype(dt)
    K = sys.K.astype(dt)
    g = sys.gamma.astype(dt)
    d = sys.diffusion.astype(dt)
    exchange = np.einsum("nk,kn->n", K, C)
    r = (d - g * pp / sys.mass - exchange) / sys.mass
    return np.asarray(r, dtype=float)


def moment_system_residual(sys: LinearizedSystem, moments) -> float:
    """Relative residual of the packed moment system for any moments object."""
    A, B = _assemble_moment_system(sys)
    eta = moments._raw() if isinstance(moments, MomentVector) else moments.to_moments().eta
    r = np.linalg.norm(np.asarray(B - A @ np.asarray(eta, dtype=float), dtype=float))
    bnorm = np.linalg.norm(B)
    return float(r / bnorm) if bnorm > 0 else float(r)


@dataclass(frozen=True)
class SteadyStateReport:
    """SI-facing summary of one steady-state solve."""

    omegas: np.ndarray           # rad/s trap frequencies
    temperatures: np.ndarray     # K per site
    site_currents: np.ndarray    # W per site
    J_L: float                   # W
    J_R: float                   # W
    moments: CovarianceMatrix    # SI covariance of (y, p)
    residuals: dict              # moment_system: float, stationarity: W array
    left_sites: tuple
    right_sites: tuple
    backend: str

    @property
    def balance(self) -> float:
        top = max(abs(self.J_L), abs(self.J_R))
        return abs(self.J_L + self.J_R) / top if top > 0 else 0.0


def natural_linear_system(config: ChainConfig, bath: BathAssignment):
    """Build the nondimensional LinearizedSystem for a chain and bath.

    Returns (system, units, equilibrium) with the system in natural units.
    """
    units = NaturalUnits.for_chain(config)
    eq = equilibrium_positions(config)
    K_si = hessian_at(config, eq.positions).K
    sys = LinearizedSystem(
        K=units.stiffness_natural(K_si),
        gamma=units.friction_natural(bath.gamma),
        diffusion=units.diffusion_natural(bath.diffusion),
        mass=1.0,
        left_sites=bath.left_sites,
        right_sites=bath.right_sites)
    return sys, units, eq


def steady_state_report(config: ChainConfig, bath: BathAssignment,
                        backend: str = "moments",
                        residual_rtol: float = RESIDUAL_RTOL,
                        balance_rtol: float = BALANCE_RTOL) -> SteadyStateReport:
    """One full algebraic solve, converted to SI at the boundary."""
    sys, units, _ = natural_linear_system(config, bath)
    if backend == "moments":
        mom = solve_moments_paper(sys, residual_rtol=residual_rtol)
        cov_nat = mom.to_covariance()
    elif backend == "lyapunov":
        cov_nat = solve_moments_lyapunov(sys, residual_rtol=residual_rtol)
        mom = cov_nat
    else:
        raise ConfigurationError(f"unknown solver backend {backend!r}")

    T = local_temperatures(sys, mom, units=units)
    j_nat = site_currents(sys, mom)
    J_L, J_R = total_currents(sys, mom, balance_rtol=balance_rtol)
    stat = stationarity_residuals(sys, mom)

    # covariance blocks back to SI
    N = sys.N
    M = cov_nat.matrix.copy()
    M[:N, :N] *= units.length**2
    M[:N, N:] *= units.length * units.momentum
    M[N:, :N] *= units.length * units.momentum
    M[N:, N:] *= units.momentum**2

    return SteadyStateReport(
        omegas=config.frequencies(),
        temperatures=T,
        site_currents=units.watts(np.asarray(j_nat, dtype=float)),
        J_L=units.watts(J_L),
        J_R=units.watts(J_R),
        moments=CovarianceMatrix(matrix=M, residual=cov_nat.residual),
        residuals={
            "moment_system": moment_system_residual(sys, mom),
            "stationarity": units.watts(stat),
        },
        left_sites=bath.left_sites,
        right_sites=bath.right_sites,
        backend=backend)
