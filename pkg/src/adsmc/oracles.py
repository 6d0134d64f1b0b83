"""Independent numerical oracles for the core operations.

Each check recomputes a result by a different route (closed form, hand
loop, scalar reduction) and compares against the library.  ``run_all``
drives the CLI ``selftest`` command.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .adc import AdcChannel, predict_mu, quantize, sample_hold
from .closed_loop import run_mimo, run_siso
from .dsmc import (
    SisoDsmc,
    SisoDsmcState,
    adapt_alpha,
    equivalent_control_2nd,
    gao_reaching_step,
    lyapunov_diag,
    switching_control,
)
from .engine_control import ADAPTATION_LAWS
from .errors import (
    GammaMatrixError,
    InvalidBetaError,
    ReachingGainError,
    SpectralRadiusError,
)
from .mimo import (
    MimoDsmc,
    MimoDsmcState,
    SurfaceDynamics,
    adapt_a,
    equivalent_control_mimo,
    mimo_control,
    surface_step,
)
from .plant import AffinePlant, EngineParams, EngineState, engine_dynamics, euler_step


@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def check_quantizer(rng) -> tuple[bool, str]:
    ch = AdcChannel(10, 0.0, 20.0, 0.1)
    q = 20.0 / 1023
    want = round(14.7 / q) * q
    err = abs(quantize(ch, 14.7) - want)
    vs = rng.uniform(-5.0, 25.0, 1000)
    worst = 0.0
    idem = True
    for v in vs:
        y = quantize(ch, v)
        worst = max(worst, abs(y - min(max(v, 0.0), 20.0)))
        idem &= quantize(ch, y) == y
    ok = err <= 1e-12 and worst <= q / 2 + 1e-12 and idem
    return ok, f"|err|={err:.2e}, max|q(v)-clamp(v)|={worst:.4g} (q/2={q / 2:.4g}), idempotent={idem}"


def check_staircase(rng) -> tuple[bool, str]:
    h = 0.01
    ch = AdcChannel(None, 0.0, 1.0, 4 * h, base_step=h)
    out = np.array([sample_hold(ch, j * h, j * h) for j in range(40)])
    stair = np.array([(j - j % 4) * h for j in range(40)])
    err = float(np.max(np.abs(out - stair)))
    return err <= 1e-12, f"max deviation from staircase {err:.2e}"


def check_mu_sensitivity(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(200):
        a, b = rng.uniform(-3, 3), rng.choice([-1, 1]) * rng.uniform(0.2, 4)
        beta, T, ah = rng.uniform(0.05, 0.95), rng.uniform(0.005, 0.2), rng.uniform(0.3, 2)
        ch = AdcChannel(int(rng.integers(6, 17)), -10.0, 10.0, T)
        x = rng.uniform(-5, 5)
        bnd = predict_mu(lambda v: a * v, lambda v: b, ah, ch, x, beta, T,
                         x_d=rng.uniform(-5, 5), x_d_next=rng.uniform(-5, 5))
        want = abs((1 + beta) / (b * T) + a * ah / b) * bnd.mu_state
        worst = max(worst, _rel(bnd.mu_u, want))
    return worst <= 1e-9, f"max relative deviation {worst:.2e}"


def _random_sd(rng, r):
    return SurfaceDynamics(F=np.diag(rng.normal(size=r)), Lambda_hat=rng.normal(size=r),
                           Upsilon=rng.normal(size=(r, r)) + 3 * np.eye(r))


def _random_beta(rng, r, coupled=True):
    P = np.eye(r) + (0.2 * rng.normal(size=(r, r)) if coupled else 0.0)
    lam = rng.uniform(0.1, 0.9, r)
    return P @ np.diag(lam) @ np.linalg.inv(P)


def check_surface_step(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(100):
        sd = _random_sd(rng, 3)
        s, a, u = rng.normal(size=(3, 3))
        T = rng.uniform(0.01, 0.2)
        got = surface_step(sd, s, a, u, T)
        want = [s[i] + T * sd.Lambda_hat[i]
                + T * sum(sd.F[i, j] * a[j] for j in range(3))
                + T * sum(sd.Upsilon[i, j] * u[j] for j in range(3)) for i in range(3)]
        worst = max(worst, float(np.max(np.abs(got - np.array(want)))))
    return worst <= 1e-12, f"max deviation {worst:.2e}"


def check_substitution(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(100):
        r = 3
        sd = _random_sd(rng, r)
        ctl = MimoDsmcState(beta_mat=_random_beta(rng, r), gamma_mat=np.eye(r), T=0.05,
                            a_hat=rng.uniform(0.5, 1.5, r))
        s, a = rng.normal(size=r), rng.uniform(0.5, 1.5, r)
        u = equivalent_control_mimo(sd, s, ctl.a_hat, ctl, ctl.T)
        xi = surface_step(sd, s, a, u, ctl.T) + ctl.beta_mat @ s
        want = ctl.T * sd.F @ (a - ctl.a_hat)
        worst = max(worst, float(np.max(np.abs(xi - want))))
    return worst <= 1e-10, f"max |xi - T F a~| {worst:.2e}"


def check_scalar_degeneracy(rng) -> tuple[bool, str]:
    bad = 0
    for _ in range(200):
        beta, T = rng.uniform(0.05, 0.95), rng.uniform(0.01, 0.2)
        f, g, x, xdn, xd, sp = rng.normal(size=6)
        g = g if abs(g) > 0.1 else 1.0
        ah, rho, mu, phi = rng.uniform(0.5, 1.5), rng.uniform(0.1, 5), rng.uniform(0, 2), 0.3
        siso = SisoDsmcState(beta=beta, T=T, alpha_hat=ah, phi=phi, rho_alpha=rho)
        s = x - xd
        u_siso = (equivalent_control_2nd(f, g, x, xdn, s, siso, T)
                  + switching_control(mu, s, sp, beta, phi))
        ctl = MimoDsmcState(beta_mat=[[beta]], gamma_mat=[[math.sqrt(rho)]], T=T,
                            a_hat=[ah], phi_vec=[phi])
        sd = SurfaceDynamics.from_channels([f], [g], [xd], [xdn], T)
        u_mimo = mimo_control(sd, [s], [sp], ctl, [mu], T)[0]
        a_mimo = adapt_a([ah], [s], sd.F, ctl, T)[0]
        a_siso = adapt_alpha(ah, s, f, rho, T)
        bad += _rel(u_mimo, u_siso) > 1e-12 or _rel(a_mimo, a_siso) > 1e-12
    return bad == 0, f"{bad} of 200 scalar cases differ"


def check_diagonal_decoupling(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(100):
        r, T = 4, rng.uniform(0.01, 0.2)
        beta, rho = rng.uniform(0.05, 0.95, r), rng.uniform(0.1, 5, r)
        f, g = rng.normal(size=r), rng.uniform(0.5, 3, r)
        x, xd, xdn, ah = rng.normal(size=r), rng.normal(size=r), rng.normal(size=r), rng.uniform(
            0.5, 1.5, r)
        ctl = MimoDsmcState(beta_mat=np.diag(beta), gamma_mat=np.diag(np.sqrt(rho)), T=T,
                            a_hat=ah)
        sd = SurfaceDynamics.from_channels(f, g, xd, xdn, T)
        u = equivalent_control_mimo(sd, x - xd, ah, ctl, T)
        a_new = adapt_a(ah, x - xd, sd.F, ctl, T)
        for i in range(r):
            st = SisoDsmcState(beta=beta[i], T=T, alpha_hat=ah[i])
            worst = max(worst,
                        _rel(u[i], equivalent_control_2nd(f[i], g[i], x[i], xdn[i],
                                                          x[i] - xd[i], st, T)),
                        _rel(a_new[i], adapt_alpha(ah[i], x[i] - xd[i], f[i], rho[i], T)))
    return worst <= 1e-12, f"max relative deviation {worst:.2e}"


def random_scalar_plant(rng, alpha=None):
    a, b = rng.uniform(-2, 2, 2)
    c = rng.uniform(0.5, 3.0)
    alpha = rng.uniform(0.5, 1.5) if alpha is None else alpha
    T = rng.uniform(0.01, 0.1)
    return AffinePlant(lambda x: a * x + b * np.sin(x) + 1.0, lambda x: c + 0.1 * x**2,
                       [alpha], T)


def check_scalar_contraction(rng, n_plants=100, n_steps=300) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(n_plants):
        p = random_scalar_plant(rng)
        beta = rng.uniform(0.05, 0.95)
        loop = SisoDsmc(SisoDsmcState(beta=beta, T=p.T, alpha_hat=float(p.alpha_true[0]),
                                      adapt=False))
        xd = np.sin(2.0 * p.T * np.arange(n_steps + 1))
        tr = run_siso(p, loop, rng.uniform(-3, 3), xd)
        worst = max(worst, float(tr.contraction_residual().max()))
    return worst <= 1e-6, f"max |s(k+2)-beta^2 s(k)|/max(1,|s(k)|) = {worst:.2e}"


def random_linear_mimo(rng, r=3):
    A = rng.normal(scale=0.5, size=(r, r))
    G = np.diag(rng.uniform(0.5, 2.0, r)) + 0.1 * rng.normal(size=(r, r))
    alpha = rng.uniform(0.5, 1.5, r)
    T = rng.uniform(0.01, 0.1)
    # one multiplier per channel on the row drift (F = diag(f))
    return AffinePlant(lambda x: A @ x, lambda x: G, alpha, T)


def check_vector_contraction(rng, n_plants=100, n_steps=200) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(n_plants):
        p = random_linear_mimo(rng)
        B = _random_beta(rng, 3)
        loop = MimoDsmc(MimoDsmcState(beta_mat=B, gamma_mat=np.eye(3), T=p.T,
                                      a_hat=p.alpha_true.copy(), adapt=False))
        t = p.T * np.arange(n_steps + 1)
        xd = np.column_stack([np.sin(t), np.cos(0.5 * t), 0.3 * t])
        tr = run_mimo(p, loop, rng.normal(size=3), xd)
        worst = max(worst, float(tr.contraction_residual().max()))
    return worst <= 1e-6, f"max inf-norm residual {worst:.2e}"


def check_lyapunov_polynomial(rng) -> tuple[bool, str]:
    d = lyapunov_diag(1.0, -0.5, 0.25, 0.0, 0.0, 0.5, 1.0)
    exact = abs(d.dV_pred + 0.28125) < 1e-15 and abs(d.dV_expanded - d.dV_pred) < 1e-12
    betas = np.linspace(1e-6, 1 - 1e-6, 10001)
    poly = -0.5 * betas * (-(betas**3) - betas**2 + betas + 1)
    return exact and bool(np.all(poly <= 0)), (
        f"dV_pred(beta=0.5)={d.dV_pred}, sweep max={poly.max():.3e}")


def check_euler_recurrence(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(50):
        a, b, T = rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(0.001, 0.1)
        u = rng.normal(size=50)
        p = AffinePlant(lambda x: a * x, lambda x: np.array([b]), [1.0], T)
        x = np.array([rng.normal()])
        y = float(x[0])
        for k in range(50):
            x = euler_step(p, x, [u[k]])
            y = (1 + T * a) * y + T * b * u[k]
        worst = max(worst, _rel(float(x[0]), y))
    return worst <= 1e-12, f"max relative deviation {worst:.2e}"


def check_engine_laws(rng) -> tuple[bool, str]:
    params = EngineParams()
    worst = 0.0
    for _ in range(200):
        st = EngineState(rng.uniform(300, 800), rng.uniform(1e-4, 2e-3), rng.uniform(1e-3, 1e-2),
                         rng.uniform(50, 400))
        f, _ = engine_dynamics(st, params)
        for i, law in enumerate(ADAPTATION_LAWS):
            ah, s, rho, T = rng.uniform(0.5, 1.5), rng.normal(), rng.uniform(0.1, 10), 0.08
            worst = max(worst, _rel(law(ah, s, st, params, rho, T),
                                    adapt_alpha(ah, s, f[i], rho, T)))
    return worst <= 1e-15, f"max relative deviation {worst:.2e}"


def check_gao_inequality(rng) -> tuple[bool, str]:
    bad = 0
    for _ in range(2000):
        T, lam, eps = rng.uniform(0.01, 0.2), 0.0, rng.uniform(0, 2)
        lam = rng.uniform(0.01, 0.99) / T
        bound = T * eps / (1 - T * lam)
        s = rng.choice([-1, 1]) * bound * rng.uniform(1.0001, 50)
        bad += abs(gao_reaching_step(s, lam, eps, T)) >= abs(s)
    return bad == 0, f"{bad} violations of |s_next| < |s|"


def check_validation_gates(rng) -> tuple[bool, str]:
    cases = {
        "beta outside (0,1)": (InvalidBetaError, lambda: SisoDsmcState(beta=1.2, T=0.1)),
        "beta matrix spectral radius": (SpectralRadiusError, lambda: MimoDsmcState(
            beta_mat=[[0.5, 0.0], [0.0, 1.0]], gamma_mat=np.eye(2), T=0.1)),
        "T*lambda outside (0,1)": (ReachingGainError,
                                   lambda: SisoDsmcState(beta=0.5, T=0.1, lam=20.0)),
        "non-symmetric Gamma": (GammaMatrixError, lambda: MimoDsmcState(
            beta_mat=0.5 * np.eye(2), gamma_mat=[[1.0, 0.2], [0.0, 1.0]], T=0.1)),
        "non-positive Gamma": (GammaMatrixError, lambda: MimoDsmcState(
            beta_mat=0.5 * np.eye(2), gamma_mat=[[1.0, 0.0], [0.0, -1.0]], T=0.1)),
    }
    missed = []
    for name, (err, make) in cases.items():
        try:
            make()
            missed.append(name)
        except err:
            pass
    return not missed, "all rejected" if not missed else "accepted: " + ", ".join(missed)


def check_mode_equivalence(rng) -> tuple[bool, str]:
    from .harness import parse_config, run_scenario

    base = {"horizon": 6.0, "transient_cut": 1.0, "alpha_true": [1.2, 0.8, 1.1, 0.9]}
    a = run_scenario(parse_config({**base, "mode": "second-order-siso"})).data
    b = run_scenario(parse_config({**base, "mode": "second-order-mimo"})).data
    if a.shape != b.shape:
        return False, f"shapes differ {a.shape} vs {b.shape}"
    diff = np.nanmax(np.abs(a - b) / np.maximum(1.0, np.abs(a)))
    return diff <= 1e-9, f"max relative deviation {diff:.2e} over {a.shape[0]} rows"


ORACLES: dict[str, Callable] = {
    "quantizer": check_quantizer,
    "sample-hold staircase": check_staircase,
    "mu sensitivity": check_mu_sensitivity,
    "surface_step algebra": check_surface_step,
    "equivalent-control substitution": check_substitution,
    "SISO/MIMO scalar degeneracy": check_scalar_degeneracy,
    "diagonal MIMO decoupling": check_diagonal_decoupling,
    "Euler recurrence": check_euler_recurrence,
    "scalar manifold contraction": check_scalar_contraction,
    "vector manifold contraction": check_vector_contraction,
    "Lyapunov polynomial": check_lyapunov_polynomial,
    "reaching-law inequality": check_gao_inequality,
    "engine adaptation bindings": check_engine_laws,
    "validation gates": check_validation_gates,
    "engine mode equivalence": check_mode_equivalence,
}


def run_all(seed: int = 0, names=None) -> list[OracleResult]:
    """Run every oracle (or the named subset) with a seeded generator."""
    out = []
    for name, fn in ORACLES.items():
        if names and name not in names:
            continue
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crashing oracle is a failing oracle
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(OracleResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
