from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np

from domain.models import CheckResult, DncsSpec, SteadySolution, VerifyReport
from usecases import mjls, riccati, simulate, thresholds

logger = logging.getLogger(__name__)

RECURSION_TOL = 1e-10
REPRESENTATION_TOL = 1e-9
SHORTCUT_TOL = 1e-8
COST_TOL = 1e-8


def _relative_deviation(left, right) -> float:
    """最大絶対誤差を 1 + 最大絶対値 で割ったもの。"""
    dev = riccati.max_deviation(left, right)
    scale = max((float(np.max(np.abs(M), initial=0.0)) for mats in right for M in mats), default=0.0)
    return dev / (1.0 + scale)


def _check(name: str, residual: float, tol: float, detail: str = "") -> CheckResult:
    passed = bool(np.isfinite(residual) and residual < tol)
    return CheckResult(name=name, passed=passed, residual=float(residual), detail=detail)


def _random_psd(rng: np.random.Generator, d: int) -> np.ndarray:
    G = rng.standard_normal((d, d))
    return G @ G.T


def check_representation(spec: DncsSpec, horizon: int, tol: float = REPRESENTATION_TOL) -> CheckResult:
    bar = riccati.bar_representation(spec, horizon)
    embedded = riccati.embed_finite_solution(riccati.finite_horizon_solve(spec, horizon))
    return _check("representation", _relative_deviation(bar, embedded), tol, f"T={horizon}")


def check_mjls_equivalence(spec: DncsSpec, horizon: int) -> CheckResult:
    rec = mjls.mjls_finite_recursions(mjls.build_auxiliary_nc(spec), horizon)
    bar = riccati.bar_representation(spec, horizon)
    return _check("mjls_equivalence", _relative_deviation(rec.P_seq, bar), RECURSION_TOL, f"T={horizon}")


def check_two_controller(spec: DncsSpec, steady: SteadySolution, horizon: int, **solver) -> List[CheckResult]:
    """N=1 では 2 制御器の経路と N 制御器の経路が一致する。"""
    A, B10, B11 = spec.A_blocks[0], spec.B_remote[0], spec.B_local[0]
    p1 = spec.p_n(1)
    two = riccati.two_controller_solve(A, B10, B11, spec.Q, spec.R, p1, **solver)
    checks = []
    if two.status is not steady.status:
        checks.append(
            CheckResult(
                name="two_controller_reduction",
                passed=False,
                detail=f"two-controller {two.status.value} vs N-controller {steady.status.value}",
            )
        )
    elif steady.converged:
        left = [(two.P0, two.Pn[0], two.K0, two.Kn[0])]
        right = [(steady.P0, steady.Pn[0], steady.K0, steady.Kn[0])]
        checks.append(_check("two_controller_reduction", _relative_deviation(left, right), RECURSION_TOL))
    else:
        checks.append(CheckResult(name="two_controller_reduction", passed=True, detail=f"both {steady.status.value}"))
    rec_2c = mjls.mjls_finite_recursions(mjls.build_auxiliary_2c(A, B10, B11, spec.Q, spec.R, p1), horizon)
    rec_nc = mjls.mjls_finite_recursions(mjls.build_auxiliary_nc(spec), horizon)
    checks.append(_check("auxiliary_2c_vs_nc", _relative_deviation(rec_2c.P_seq, rec_nc.P_seq), RECURSION_TOL))
    return checks


def check_dcare(spec: DncsSpec, steady: SteadySolution, **solver) -> List[CheckResult]:
    model = mjls.build_auxiliary_nc(spec)
    dcare = mjls.dcare_solve(model, **solver)
    checks = [
        CheckResult(
            name="dcare_agreement",
            passed=dcare.converged == steady.converged,
            detail=f"dcare {dcare.status.value}, steady {steady.status.value}",
        )
    ]
    if not (dcare.converged and steady.converged):
        return checks
    embedded = riccati.embed_steady_solution(steady)
    checks.append(_check("dcare_fixed_point", _relative_deviation([dcare.P], [embedded]), 1e-7))

    verdict = mjls.ss_test(model, dcare.K)
    checks.append(
        CheckResult(
            name="ss_test_stable",
            passed=verdict.schur_stable,
            residual=verdict.rho,
            detail=f"rho={verdict.rho:.6g} dim={verdict.matrix_dim}",
        )
    )
    closed = [model.A_mode[m] + model.B_mode[m] @ dcare.K[m] for m in range(model.modes)]
    shortcut = max(mjls.triangular_shortcut(model, closed))
    checks.append(
        _check("triangular_shortcut", abs(shortcut - verdict.rho) / (1.0 + verdict.rho), SHORTCUT_TOL)
    )
    return checks


def check_detectability(spec: DncsSpec, rank_tol: float, seed: int) -> CheckResult:
    """探索で得た H◇ による SD 判定と解析判定の一致。

    探索が安定化できず解析判定が可検出のときは証拠がないので不合格 (inconclusive) とする。
    """
    report = thresholds.critical_probs(spec, rank_tol)
    analytic = report.detectable_full and all(p < pd for p, pd in zip(spec.drop_probs, report.p_d))
    model = mjls.build_auxiliary_nc(spec)
    verdict = mjls.sd_test(model, mjls.search_detector_gains(model, seed=seed))
    detail = f"search rho={verdict.rho:.6g}, analytic {'detectable' if analytic else 'not detectable'}"
    if analytic and not verdict.schur_stable:
        return CheckResult(name="sd_consistency", passed=False, residual=verdict.rho, detail=f"inconclusive: {detail}")
    return CheckResult(name="sd_consistency", passed=verdict.schur_stable == analytic, residual=verdict.rho, detail=detail)


def check_step_identity(steady: SteadySolution, samples: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    spec = steady.spec
    d = spec.state_part.total
    worst = simulate.verify_step_identity(np.zeros(d), [np.zeros((dn, dn)) for dn in spec.state_dims], steady)
    failures = 0 if worst.passed else 1
    worst_rel = worst.residual / (1.0 + abs(worst.rhs))
    for _ in range(samples):
        x_hat = rng.standard_normal(d)
        sigma = [_random_psd(rng, dn) for dn in spec.state_dims]
        res = simulate.verify_step_identity(x_hat, sigma, steady)
        failures += 0 if res.passed else 1
        worst_rel = max(worst_rel, res.residual / (1.0 + abs(res.rhs)))
    return CheckResult(
        name="step_identity",
        passed=failures == 0,
        residual=worst_rel,
        detail=f"{samples + 1} points, {failures} failures",
    )


def check_costs(spec: DncsSpec, steady: Optional[SteadySolution], horizon: int) -> List[CheckResult]:
    finite = riccati.finite_horizon_solve(spec, horizon)
    exact = simulate.propagate_moments(finite).total_cost
    checks = [_check("finite_exact_cost", abs(exact - finite.cost) / (1.0 + abs(finite.cost)), COST_TOL)]
    if steady is not None and steady.converged:
        telescoped = simulate.steady_strategy_cost(steady, horizon)
        summed = simulate.propagate_moments(steady, horizon + 1).total_cost
        checks.append(_check("telescoping_cost", abs(telescoped - summed) / (1.0 + abs(summed)), COST_TOL))
        checks.append(
            CheckResult(name="mean_square_stable", passed=simulate.mean_square_stable(steady), detail="closed loop")
        )
    return checks


def run_verification(
    spec: DncsSpec,
    *,
    name: str = "",
    horizon: int = 10,
    samples: int = 100,
    seed: int = 0,
    tol: float = riccati.DEFAULT_TOL,
    max_iter: int = riccati.DEFAULT_MAX_ITER,
    divergence_cap: float = riccati.DEFAULT_DIVERGENCE_CAP,
    rank_tol: float = thresholds.RANK_TOL,
    representation_tol: float = REPRESENTATION_TOL,
    steady: Optional[SteadySolution] = None,
) -> VerifyReport:
    """表現補題、MJLS 同値性、SS/SD、一段恒等式、コスト公式をまとめて検査する。

    steady を渡すとその解で恒等式を評価する (壊した解での陰性対照用)。
    """
    solver = dict(tol=tol, max_iter=max_iter, divergence_cap=divergence_cap)
    solved = riccati.steady_solve(spec, rank_tol=rank_tol, **solver)
    steady = steady or solved
    verdict = thresholds.feasibility_verdict(spec, rank_tol)

    checks: List[CheckResult] = [
        check_representation(spec, horizon, representation_tol),
        check_mjls_equivalence(spec, horizon),
        CheckResult(
            name="threshold_agreement",
            passed=verdict.feasible == solved.converged,
            detail=f"feasible={verdict.feasible}, steady {solved.status.value}",
        ),
    ]
    if spec.n_subsystems == 1:
        checks.extend(check_two_controller(spec, solved, horizon, **solver))
    checks.extend(check_dcare(spec, solved, **solver))
    checks.append(check_detectability(spec, rank_tol, seed))
    if steady.converged:
        checks.append(check_step_identity(steady, samples, seed))
    checks.extend(check_costs(spec, steady, horizon))

    for check in checks:
        log = logger.info if check.passed else logger.warning
        log("check %s: %s %s", check.name, "pass" if check.passed else "FAIL", check.detail)
    return VerifyReport(scenario=name, checks=checks)
