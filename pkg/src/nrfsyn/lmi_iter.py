"""Iterative convex synthesis of the structured parameter.

The norm bound and the well-posedness conditions are bilinear in the
decision variables.  Lifting the products into auxiliary matrices turns
the feasible set into an LMI system plus one bilinear equation T_A T_B =
T_C between block-diagonal factors; the equation is relaxed to a nuclear
norm objective and driven to zero by alternating which factor is frozen.
"""

import dataclasses
import time

import cvxpy as cp
import numpy as np

from .errors import DimensionMismatch, InitializationInfeasible, SolverFailure
from .factorization import Dcf
from .matching import BasisSet, MatchingProblem, closed_loop_blocks
from .norms import hinf_norm
from .realization import DescriptorRealization

__all__ = [
    "IterConfig",
    "IterState",
    "IterVariables",
    "IterationAssembly",
    "SdpModel",
    "SynthesisResult",
    "WellPosednessData",
    "assemble_iteration",
    "convex_subproblem",
    "nuclear_norm",
    "run_algorithm1",
    "wellposed_data",
]


def nuclear_norm(M: np.ndarray) -> float:
    if min(M.shape) == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False).sum())


@dataclasses.dataclass(frozen=True)
class WellPosednessData:
    """Constant data of the controller well-posedness inequalities.

    One constraint certifies the full denominator at infinity, then one
    per diagonal entry; all share the generic sandwich form, so only the
    triples and their parameter-dependent offsets are stored."""

    triples: tuple
    zhat1: tuple
    zhat2: tuple
    m: int
    p: int

    @property
    def count(self) -> int:
        return len(self.triples)

    def widths(self) -> list[int]:
        return [Z1.shape[0] for Z1, _, _ in self.triples]

    def value_at(self, k: int, d: np.ndarray) -> np.ndarray:
        """Exact quadratic form of constraint k at static coordinates d."""
        V = self.zhat1[k].copy()
        for i, Z2 in enumerate(self.zhat2[k]):
            V = V + float(d[i]) * Z2
        return V.T @ V

    def margins(self, d: np.ndarray) -> np.ndarray:
        return np.array(
            [np.linalg.eigvalsh(self.value_at(k, d)).min() for k in range(self.count)]
        )


def wellposed_data(dcf: Dcf, Q0: DescriptorRealization, basis: BasisSet) -> WellPosednessData:
    m, p = dcf.m, dcf.p
    if (Q0.p, Q0.m) != (m, p):
        raise DimensionMismatch(f"parameter must be {m}x{p}, got {Q0.p}x{Q0.m}")
    if (basis.m, basis.p) != (m, p):
        raise DimensionMismatch("basis dimensions do not match the factorization")
    Yinf = dcf.Y_t.D
    Ninf = dcf.N_t.D
    Q0inf = Q0.D
    directions = [basis.regrouped_blocks()[3] @ basis.selector(i) for i in range(basis.q)]

    triples = [(Yinf, np.eye(m), Ninf)]
    for i in range(m):
        e = np.zeros((m, 1))
        e[i, 0] = 1.0
        triples.append((Yinf[i : i + 1, i : i + 1], e.T, Ninf @ e))

    zhat1, zhat2 = [], []
    for Z1, Z2, Z3 in triples:
        zhat1.append(Z1 + Z2 @ Q0inf @ Z3)
        zhat2.append(tuple(Z2 @ Qi @ Z3 for Qi in directions))
    return WellPosednessData(
        triples=tuple(triples), zhat1=tuple(zhat1), zhat2=tuple(zhat2), m=m, p=p
    )


@dataclasses.dataclass(frozen=True)
class IterVariables:
    """One full set of decision-variable values."""

    A_x: np.ndarray
    b_x: np.ndarray
    C_x: np.ndarray
    d_x: np.ndarray
    d_bar: np.ndarray
    F_list: tuple
    P: np.ndarray
    P_bar: np.ndarray
    PD_bar: np.ndarray
    P_x: np.ndarray
    Px_bar: np.ndarray
    PB_list: tuple
    PBbar_list: tuple

    def x_parts(self):
        return self.A_x, self.b_x, self.C_x, self.d_x


@dataclasses.dataclass(frozen=True)
class IterState:
    T_A: np.ndarray
    T_B: np.ndarray
    T_C: np.ndarray
    f: float
    k: int
    theta_side: str | None


@dataclasses.dataclass(frozen=True)
class IterConfig:
    n_x: int = 0
    eta1: float = 1e-9
    eta2: float = 1e-6
    max_iter: int = 200
    delta_strict: float = 1e-7
    solver: str | None = None
    solver_opts: dict | None = None
    verbose: bool = False


@dataclasses.dataclass(frozen=True)
class SynthesisResult:
    converged: bool
    reason: str
    x_realization: tuple
    F_list: tuple
    variables: IterVariables | None
    trace: list
    f: float
    nuclear_residual: float
    n_T: int
    iterations: int


def _diag_blocks(blocks, hcat, vcat):
    """Block diagonal that tolerates 0-row or 0-column blocks; zero-row
    blocks still reserve their columns."""
    shapes = [tuple(b.shape) for b in blocks]
    total = sum(c for _, c in shapes)
    strips, offset = [], 0
    for b, (r, c) in zip(blocks, shapes):
        if r:
            parts = []
            if offset:
                parts.append(np.zeros((r, offset)))
            if c:
                parts.append(b)
            if total - offset - c:
                parts.append(np.zeros((r, total - offset - c)))
            strips.append(parts[0] if len(parts) == 1 else hcat(parts))
        offset += c
    if not strips:
        return np.zeros((0, total))
    return strips[0] if len(strips) == 1 else vcat(strips)


class IterationAssembly:
    """Constant data plus affine builders for the iteration's matrices.

    Every method that takes variables accepts either numeric arrays or
    symbolic expressions; concatenation hooks pick the backend."""

    def __init__(self, problem: MatchingProblem, basis: BasisSet, wpd: WellPosednessData, n_x: int):
        tf = problem.Tf
        if basis is None:
            raise DimensionMismatch("a basis is required to assemble the iteration")
        if (tf.m2, tf.p2) != (basis.m, basis.p):
            raise DimensionMismatch("match plant and basis disagree on loop dimensions")
        if wpd.count and any(Z2.shape[1] != basis.m for _, Z2, _ in wpd.triples):
            raise DimensionMismatch("well-posedness data has the wrong input size")
        if n_x < 0:
            raise DimensionMismatch("coordinate order must be nonnegative")
        if not np.allclose(tf.E, np.eye(tf.G.n)):
            raise DimensionMismatch("match plant must be in standard form")

        self.problem = problem
        self.tf = tf
        self.basis = basis
        self.wpd = wpd
        self.m, self.p, self.q = basis.m, basis.p, basis.q
        self.n_x = n_x
        self.n_f = tf.G.n
        self.n_list = basis.n_list
        self.n_sum = basis.n_sum
        self.n_barB = basis.n_bar
        self.n_bar = self.n_f + self.n_barB + self.p * n_x
        self.m_S = self.p + self.n_barB + self.p * n_x
        self.p_T = self.n_sum + n_x + self.q + self.n_bar + self.q
        self.n_T = self.n_sum + n_x + 1 + self.n_bar + 1
        self.m_T = self.q + n_x + self.q + self.m_S + 1
        self.w1 = tf.m1
        self.z1 = tf.p1

        nb, nf, px = self.n_barB, self.n_f, self.p * n_x
        self.Af_bar = np.zeros((self.n_bar, self.n_bar))
        self.Af_bar[:nf, :nf] = tf.A
        self.B1f_bar = np.vstack([tf.B1, np.zeros((nb + px, self.w1))])
        self.C2f_bar = np.zeros((self.m_S, self.n_bar))
        self.C2f_bar[: self.p, :nf] = tf.C2
        self.C2f_bar[self.p : self.p + nb, nf : nf + nb] = np.eye(nb)
        self.C2f_bar[self.p + nb :, nf + nb :] = np.eye(px)
        self.D21f_bar = np.vstack([tf.D21, np.zeros((nb + px, self.w1))])

        TA, TB, TC = self.t_matrices(self.zero_variables())
        got = (TA.shape, TB.shape, TC.shape)
        want = ((self.p_T, self.n_T), (self.n_T, self.m_T), (self.p_T, self.m_T))
        if got != want:
            raise DimensionMismatch(f"factor bookkeeping failed: {got} != {want}")

    def zero_variables(self) -> IterVariables:
        q, n_x, n_bar = self.q, self.n_x, self.n_bar
        return IterVariables(
            A_x=np.zeros((n_x, n_x)),
            b_x=np.zeros((n_x, 1)),
            C_x=np.zeros((q, n_x)),
            d_x=np.zeros((q, 1)),
            d_bar=np.zeros((q, 1)),
            F_list=tuple(np.zeros((1, n)) for n in self.n_list),
            P=np.zeros((n_bar, n_bar)),
            P_bar=np.zeros((n_bar, self.m_S)),
            PD_bar=np.zeros((q, q)),
            P_x=np.zeros((n_x, n_x)),
            Px_bar=np.zeros((n_x, n_x)),
            PB_list=tuple(np.zeros((n, n)) for n in self.n_list),
            PBbar_list=tuple(np.zeros((n, 1)) for n in self.n_list),
        )

    def a_s(self, F_list, A_x, b_x, C_x, d_x, hcat=np.hstack, vcat=np.vstack, kron=np.kron):
        """Coupling factor: the closed-loop state matrix minus its plant
        core, with the output map factored out of each block column."""
        tf, basis, p = self.tf, self.basis, self.p
        n_barB, n_x = self.n_barB, self.n_x
        Abar, Bbar, Cbar, Dbar = basis.regrouped_blocks(F_list, hcat, vcat)
        Dpd = kron(np.eye(p), d_x)
        rows = []
        if self.n_f:
            top = [tf.B2 @ (Dbar @ Dpd)]
            if n_barB:
                top.append(tf.B2 @ Cbar)
            if n_x:
                top.append(tf.B2 @ (Dbar @ kron(np.eye(p), C_x)))
            rows.append(top[0] if len(top) == 1 else hcat(top))
        if n_barB:
            mid = [Bbar @ Dpd, Abar]
            if n_x:
                mid.append(Bbar @ kron(np.eye(p), C_x))
            rows.append(hcat(mid))
        if n_x:
            bot = [kron(np.eye(p), b_x)]
            if n_barB:
                bot.append(np.zeros((p * n_x, n_barB)))
            bot.append(kron(np.eye(p), A_x))
            rows.append(hcat(bot))
        if not rows:
            return np.zeros((0, self.m_S))
        return rows[0] if len(rows) == 1 else vcat(rows)

    def t_matrices(self, v, hcat=np.hstack, vcat=np.vstack, kron=np.kron):
        A_S = self.a_s(v.F_list, v.A_x, v.b_x, v.C_x, v.d_x, hcat, vcat, kron)
        a_blocks = list(v.PB_list) + [v.P_x, v.d_bar, v.P, np.zeros((self.q, 1))]
        b_blocks = [F.T for F in v.F_list] + [v.A_x.T, v.d_x.T, A_S, np.zeros((1, 1))]
        c_blocks = list(v.PBbar_list) + [v.Px_bar, v.PD_bar, v.P_bar, v.d_bar - v.d_x]
        T_A = _diag_blocks(a_blocks, hcat, vcat)
        T_B = _diag_blocks(b_blocks, hcat, vcat)
        T_C = _diag_blocks(c_blocks, hcat, vcat)
        return T_A, T_B, T_C

    def loop_blocks(self, v, hcat=np.hstack, vcat=np.vstack, kron=np.kron):
        return closed_loop_blocks(
            self.tf, self.basis, v.F_list, v.A_x, v.b_x, v.C_x, v.d_x, hcat, vcat, kron
        )

    def g_matrix(self, v, hcat=np.hstack, vcat=np.vstack, kron=np.kron):
        _, _, Cbar, Dbar = self.loop_blocks(v, hcat, vcat, kron)
        A_S = self.a_s(v.F_list, v.A_x, v.b_x, v.C_x, v.d_x, hcat, vcat, kron)
        if self.n_bar == 0:
            rows = [
                hcat([-np.eye(self.w1), Dbar.T]),
                hcat([Dbar, -np.eye(self.z1)]),
            ]
            return vcat(rows), A_S
        lyap = v.P @ self.Af_bar + v.P_bar @ self.C2f_bar
        top_mid = v.P @ self.B1f_bar + v.P_bar @ self.D21f_bar
        rows = [
            hcat([lyap + lyap.T, top_mid, Cbar.T]),
            hcat([top_mid.T, -np.eye(self.w1), Dbar.T]),
            hcat([Cbar, Dbar, -np.eye(self.z1)]),
        ]
        return vcat(rows), A_S

    def wp_form(self, k: int, d_x, d_bar, PD_bar):
        Z1 = self.wpd.zhat1[k]
        Z2 = self.wpd.zhat2[k]
        W = Z1.T @ Z1
        for i in range(self.q):
            W = W + d_x[i, 0] * (Z1.T @ Z2[i]) + d_bar[i, 0] * (Z2[i].T @ Z1)
        for i in range(self.q):
            for j in range(self.q):
                W = W + PD_bar[i, j] * (Z2[i].T @ Z2[j])
        return W


def assemble_iteration(
    problem: MatchingProblem,
    basis: BasisSet | None = None,
    wpd: WellPosednessData | None = None,
    n_x: int = 0,
) -> IterationAssembly:
    basis = problem.basis if basis is None else basis
    if wpd is None:
        raise DimensionMismatch("well-posedness data is required")
    return IterationAssembly(problem, basis, wpd, n_x)


class SdpModel:
    """Two cached parameterized programs sharing one variable set: the
    alternation only changes which factor is pinned, so each parity gets
    its own compiled problem and the parameters carry the prior iterate."""

    def __init__(self, assembly: IterationAssembly, config: IterConfig):
        self.assembly = assembly
        self.config = config
        asm = assembly
        q, n_x = asm.q, asm.n_x
        delta = config.delta_strict

        def var(shape, **kw):
            if 0 in shape:
                return np.zeros(shape)
            return cp.Variable(shape, **kw)

        self.v = IterVariables(
            A_x=var((n_x, n_x)),
            b_x=var((n_x, 1)),
            C_x=var((q, n_x)),
            d_x=cp.Variable((q, 1)),
            d_bar=cp.Variable((q, 1)),
            F_list=tuple(var((1, n)) for n in asm.n_list),
            P=var((asm.n_bar, asm.n_bar), symmetric=True),
            P_bar=var((asm.n_bar, asm.m_S)),
            PD_bar=cp.Variable((q, q)),
            P_x=var((n_x, n_x), symmetric=True),
            Px_bar=var((n_x, n_x)),
            PB_list=tuple(var((n, n), symmetric=True) for n in asm.n_list),
            PBbar_list=tuple(var((n, 1)) for n in asm.n_list),
        )
        v = self.v

        cons = []
        for k in range(asm.wpd.count):
            W = asm.wp_form(k, v.d_x, v.d_bar, v.PD_bar)
            scale = max(1.0, float(np.linalg.norm(asm.wpd.zhat1[k], 2)) ** 2)
            wk = W.shape[0]
            cons.append((W + W.T) / 2 >> delta * scale * np.eye(wk))
        G, _ = asm.g_matrix(v, cp.hstack, cp.vstack, cp.kron)
        cons.append(-G >> delta * np.eye(G.shape[0]))
        if asm.n_bar:
            cons.append(v.P >> delta * np.eye(asm.n_bar))
        if n_x:
            cons.append(v.P_x >> delta * np.eye(n_x))
            cons.append(-(v.Px_bar + v.Px_bar.T) >> delta * np.eye(n_x))
        for i, n in enumerate(asm.n_list):
            if not n:
                continue
            col = asm.basis.columns[i]
            S = v.PB_list[i] @ col.A.T + v.PBbar_list[i] @ col.B.T
            cons.append(v.PB_list[i] >> delta * np.eye(n))
            cons.append(-(S + S.T) >> delta * np.eye(n))

        T_A, T_B, T_C = asm.t_matrices(v, cp.hstack, cp.vstack, cp.kron)
        self.X_par = cp.Parameter((asm.p_T, asm.n_T))
        self.Y_par = cp.Parameter((asm.n_T, asm.m_T))
        self.XY_par = cp.Parameter((asm.p_T, asm.m_T))
        top = cp.hstack(
            [self.XY_par + T_C - T_A @ self.Y_par - self.X_par @ T_B, T_A - self.X_par]
        )
        bottom = cp.hstack([T_B - self.Y_par, np.eye(asm.n_T)])
        objective = cp.Minimize(cp.normNuc(cp.vstack([top, bottom])))

        self.init_problem = cp.Problem(cp.Minimize(0), cons + [v.d_x == v.d_bar])
        self.fix_b = cp.Problem(objective, cons + [T_B == self.Y_par])
        self.fix_a = cp.Problem(objective, cons + [T_A == self.X_par])

    def _solve(self, prob: cp.Problem):
        cfg = self.config
        solvers = [cfg.solver] if cfg.solver else ["CLARABEL", "SCS"]
        opts = cfg.solver_opts or {}
        last = None
        for name in solvers:
            try:
                prob.solve(solver=name, verbose=cfg.verbose, **opts)
            except (cp.SolverError, RuntimeError, ValueError) as exc:
                last = exc
                continue
            if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
                return prob.status
            if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
                return prob.status
            last = RuntimeError(f"status {prob.status}")
        raise SolverFailure(f"no solver produced a usable status: {last}")

    def _extract(self) -> IterVariables:
        def val(x, shape):
            if isinstance(x, np.ndarray):
                return x.copy()
            if x.value is None:
                # feasibility pass: the variable touched no constraint
                return None
            return np.asarray(x.value, dtype=float).reshape(shape)

        asm, v = self.assembly, self.v
        q, n_x, n_bar = asm.q, asm.n_x, asm.n_bar
        P_x = val(v.P_x, (n_x, n_x))
        Px_bar = val(v.Px_bar, (n_x, n_x))
        A_x = val(v.A_x, (n_x, n_x))
        if A_x is None:
            # Px_bar = P_x A_x^T at a consistent point; the extracted A_x is
            # then automatically Hurwitz because -2 sym(Px_bar) > 0.
            A_x = np.linalg.solve(P_x, Px_bar).T
        b_x = val(v.b_x, (n_x, 1))
        if b_x is None:
            b_x = np.zeros((n_x, 1))
        C_x = val(v.C_x, (q, n_x))
        if C_x is None:
            C_x = np.zeros((q, n_x))
        PB_list = tuple(val(PB, (n, n)) for PB, n in zip(v.PB_list, asm.n_list))
        PBbar_list = tuple(
            val(PBb, (n, 1)) for PBb, n in zip(v.PBbar_list, asm.n_list)
        )
        F_list = []
        for F, PB, PBb, n in zip(v.F_list, PB_list, PBbar_list, asm.n_list):
            got = val(F, (1, n))
            if got is None:
                got = np.linalg.solve(PB, PBb).T
            F_list.append(got)
        return IterVariables(
            A_x=A_x,
            b_x=b_x,
            C_x=C_x,
            d_x=val(v.d_x, (q, 1)),
            d_bar=val(v.d_bar, (q, 1)),
            F_list=tuple(F_list),
            P=val(v.P, (n_bar, n_bar)),
            P_bar=val(v.P_bar, (n_bar, asm.m_S)),
            PD_bar=val(v.PD_bar, (q, q)),
            P_x=P_x,
            Px_bar=Px_bar,
            PB_list=PB_list,
            PBbar_list=PBbar_list,
        )

    def solve_initialization(self) -> IterVariables:
        status = self._solve(self.init_problem)
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            raise InitializationInfeasible(
                "the feasibility system has no solution; the restricted "
                "parameter class cannot meet the norm bound"
            )
        return self._extract()

    def solve_step(self, X_fix: np.ndarray, Y_fix: np.ndarray, theta_side: str) -> IterVariables:
        self.X_par.value = X_fix
        self.Y_par.value = Y_fix
        self.XY_par.value = X_fix @ Y_fix
        prob = self.fix_b if theta_side == "B" else self.fix_a
        status = self._solve(prob)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            raise SolverFailure(f"iteration subproblem ended with status {status}")
        return self._extract()


def convex_subproblem(
    model: SdpModel, X_fix: np.ndarray, Y_fix: np.ndarray, theta_side: str
) -> IterVariables:
    """One relaxed subproblem with the chosen factor pinned to its
    previous value."""
    if theta_side not in ("A", "B"):
        raise DimensionMismatch("theta side must be 'A' or 'B'")
    return model.solve_step(X_fix, Y_fix, theta_side)


def _static_result(problem, wpd) -> SynthesisResult:
    """Degenerate case: no basis columns, the parameter is fully pinned."""
    tf = problem.Tf
    open_loop = DescriptorRealization(tf.E, tf.A, tf.B1, tf.C1, tf.D11)
    margins = wpd.margins(np.zeros(0))
    norm = hinf_norm(open_loop)
    ok = norm < 1.0 and (margins.min(initial=1.0) > 0.0)
    trace = [
        {
            "k": 0,
            "f": 0.0,
            "nuclear_residual": 0.0,
            "theta_side": None,
            "solve_time_ms": 0.0,
            "norm": norm,
        }
    ]
    x = (np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((0, 0)), np.zeros((0, 1)))
    return SynthesisResult(
        converged=ok,
        reason="no free parameters" if ok else "fixed parameter misses the bound",
        x_realization=x,
        F_list=(),
        variables=None,
        trace=trace,
        f=0.0,
        nuclear_residual=0.0,
        n_T=0,
        iterations=0,
    )


def run_algorithm1(
    problem: MatchingProblem,
    basis: BasisSet | None = None,
    wpd: WellPosednessData | None = None,
    config: IterConfig | None = None,
) -> SynthesisResult:
    """Alternating nuclear-norm relaxation with monotone objective.

    Feasibility is solved once to seed both factors, then each pass pins
    one factor at its previous value and minimizes the relaxation gap;
    the run stops when the gap stalls or closes."""
    config = config or IterConfig()
    basis = problem.basis if basis is None else basis
    if basis is None:
        raise DimensionMismatch("a basis is required")
    if wpd is None:
        raise DimensionMismatch("well-posedness data is required")
    if basis.q == 0:
        return _static_result(problem, wpd)

    asm = assemble_iteration(problem, basis, wpd, config.n_x)
    model = SdpModel(asm, config)
    n_T = asm.n_T

    t0 = time.perf_counter()
    vars_k = model.solve_initialization()
    T_A, T_B, T_C = asm.t_matrices(vars_k)
    f = nuclear_norm(T_C - T_A @ T_B) + n_T
    trace = [
        {
            "k": 0,
            "f": f,
            "nuclear_residual": f - n_T,
            "theta_side": None,
            "solve_time_ms": 1e3 * (time.perf_counter() - t0),
        }
    ]

    k = 0
    reason = "max_iter"
    while k < config.max_iter:
        side = "B" if k % 2 < 1 else "A"
        k += 1
        t0 = time.perf_counter()
        vars_k = model.solve_step(T_A, T_B, side)
        T_A, T_B, T_C = asm.t_matrices(vars_k)
        f_prev, f = f, nuclear_norm(T_C - T_A @ T_B) + n_T
        trace.append(
            {
                "k": k,
                "f": f,
                "nuclear_residual": f - n_T,
                "theta_side": side,
                "solve_time_ms": 1e3 * (time.perf_counter() - t0),
            }
        )
        if f - n_T < config.eta2:
            reason = "residual"
            break
        if f_prev - f < config.eta1:
            reason = "stalled"
            break

    converged = f - n_T < config.eta2
    return SynthesisResult(
        converged=converged,
        reason=reason,
        x_realization=vars_k.x_parts(),
        F_list=vars_k.F_list,
        variables=vars_k,
        trace=trace,
        f=f,
        nuclear_residual=f - n_T,
        n_T=n_T,
        iterations=k,
    )
