"""Single-SQUID time-domain solver.

Equation of motion in dimensionless time tau = 2*pi*nu*t:

    c * phi'' + phi' + alpha * (f(phi, tau) - delta) = 0

with f the current-phase relation evaluated at the total flux Phi, which for
a finite loop inductance solves Phi = Phi_e - (L_g*I_0/Phi_0) sin(pi*Phi) cos(phi)
self-consistently at every step. The hot loop is compiled with numba and
releases the GIL so bin simulations can share a thread pool.
"""
import logging
import math
import time
from typing import NamedTuple, Tuple

import numpy as np
from numba import njit

from combforge.core.errors import InvalidParameter, NonConvergence
from combforge.core.types import (
    PHYSICAL,
    DriveConfig,
    PhysicalConstants,
    SimGrid,
    SquidParams,
    StepperCoefficients,
    TimeSeries,
)

logger = logging.getLogger(__name__)

FLUX_TOLERANCE = 1e-12
FLUX_MAX_ITERATIONS = 200
FLUX_RELAXATION = 0.7
# screening beta above which the fixed-point update is under-relaxed
RELAXATION_THRESHOLD = 0.5
# the explicit second-order stencil is sub-stepped so that h <= SUBSTEP_RATIO * c
SUBSTEP_RATIO = 0.5


@njit(cache=True, nogil=True)
def _external_flux(amplitude: float, zeta: float, tau: float) -> float:
    return 0.5 * (1.0 + zeta) * (1.0 - amplitude * math.cos(tau))


@njit(cache=True, nogil=True)
def _drive_term(phi: float, phi_flux: float, r: float) -> float:
    return math.cos(phi_flux) * math.sin(phi) + r * math.sin(phi_flux) * math.cos(phi)


@njit(cache=True, nogil=True)
def _solve_flux(
    flux_e: float,
    screening: float,
    cos_phi: float,
    relax: float,
    tol: float,
    max_iter: int,
    start: float,
) -> Tuple[float, int, bool]:
    if screening == 0.0:
        return flux_e, 0, True
    flux = start
    for it in range(max_iter + 1):
        residual = flux_e - screening * math.sin(math.pi * flux) * cos_phi - flux
        if abs(residual) <= tol:
            return flux, it, True
        flux += relax * residual
    return flux, max_iter, False


@njit(cache=True, nogil=True)
def _rcsj_step(phi_prev: float, phi_curr: float, c: float, alpha: float, f: float, delta: float, dtau: float) -> float:
    return 2.0 * phi_curr - phi_prev - (dtau * dtau / c) * ((phi_curr - phi_prev) / dtau + alpha * (f - delta))


@njit(cache=True, nogil=True)
def _overdamped_step(phi_curr: float, alpha: float, f: float, delta: float, dtau: float) -> float:
    return phi_curr - dtau * alpha * (f - delta)


@njit(cache=True, nogil=True)
def _integrate_phase(
    n_steps: int,
    samples_per_period: int,
    dtau: float,
    n_sub: int,
    c: float,
    alpha: float,
    delta: float,
    amplitude: float,
    zeta: float,
    r: float,
    screening: float,
    relax: float,
    tol: float,
    max_iter: int,
):
    phi = np.empty(n_steps + 1)
    phi[0] = 0.0
    phi_prev = 0.0
    phi_curr = 0.0
    h = dtau / n_sub
    flux = _external_flux(amplitude, zeta, 0.0)
    worst = 0
    for i in range(n_steps):
        # tau is rebuilt from the in-period index so every period sees identical drive values
        j = i % samples_per_period
        for s in range(n_sub):
            tau = (j + s / n_sub) * dtau
            flux_e = _external_flux(amplitude, zeta, tau)
            if screening > 0.0:
                flux, iters, ok = _solve_flux(flux_e, screening, math.cos(phi_curr), relax, tol, max_iter, flux)
                if not ok:
                    phi[i + 1 :] = np.nan
                    return phi, i, worst
                if iters > worst:
                    worst = iters
            else:
                flux = flux_e
            f = _drive_term(phi_curr, math.pi * flux, r)
            if c > 0.0:
                nxt = _rcsj_step(phi_prev, phi_curr, c, alpha, f, delta, h)
            else:
                nxt = _overdamped_step(phi_curr, alpha, f, delta, h)
            phi_prev = phi_curr
            phi_curr = nxt
        phi[i + 1] = phi_curr
    return phi, -1, worst


class FluxSolution(NamedTuple):
    flux: float
    iterations: int
    residual: float


def external_flux(drive: DriveConfig, zeta_a: float, tau: float) -> float:
    """Applied flux in units of Phi_0: (1/2)(1+zeta_A)(1 - epsilon*cos(tau))."""
    if not 1 + zeta_a > 0:
        raise InvalidParameter(f"area perturbation must satisfy 1 + zeta_A > 0, got {zeta_a}")
    return float(_external_flux(drive.amplitude, zeta_a, tau))


def josephson_drive_term(phi: float, phi_flux: float, r: float) -> float:
    """Supercurrent in units of I_+ for SQUID phase phi and reduced flux pi*Phi/Phi_0."""
    if not abs(r) < 1:
        raise InvalidParameter(f"asymmetry must satisfy |r| < 1, got {r}")
    return float(_drive_term(phi, phi_flux, r))


def flux_relaxation(params: SquidParams, constants: PhysicalConstants = PHYSICAL) -> float:
    return FLUX_RELAXATION if params.screening_beta(constants) > RELAXATION_THRESHOLD else 1.0


def solve_flux_detailed(
    params: SquidParams,
    phi: float,
    flux_e: float,
    constants: PhysicalConstants = PHYSICAL,
    start: float | None = None,
    tol: float = FLUX_TOLERANCE,
    max_iter: int = FLUX_MAX_ITERATIONS,
) -> FluxSolution:
    screening = params.screening(constants)
    if screening == 0.0:
        return FluxSolution(float(flux_e), 0, 0.0)
    seed = flux_e if start is None else start
    flux, iterations, ok = _solve_flux(
        flux_e, screening, math.cos(phi), flux_relaxation(params, constants), tol, max_iter, seed
    )
    residual = flux - flux_e + screening * math.sin(math.pi * flux) * math.cos(phi)
    if not ok:
        raise NonConvergence(
            f"total flux did not converge after {max_iter} iterations "
            f"(beta={params.screening_beta(constants):.3f}, residual={residual:.3e}); "
            "reduce the loop inductance or critical current"
        )
    return FluxSolution(float(flux), int(iterations), float(residual))


def solve_total_flux(
    params: SquidParams,
    phi: float,
    flux_e: float,
    constants: PhysicalConstants = PHYSICAL,
) -> float:
    """Self-consistent total flux (units of Phi_0) under a finite loop inductance."""
    return solve_flux_detailed(params, phi, flux_e, constants).flux


def rcsj_step(
    state: Tuple[float, float],
    coeffs: StepperCoefficients,
    f: float,
    delta: float,
    dtau: float,
) -> float:
    """Explicit second-order update phi_{i+1} from (phi_{i-1}, phi_i)."""
    if not coeffs.c > 0:
        raise InvalidParameter("rcsj_step needs c > 0; use overdamped_step for C = 0")
    phi_prev, phi_curr = state
    return float(_rcsj_step(phi_prev, phi_curr, coeffs.c, coeffs.alpha, f, delta, dtau))


def overdamped_step(phi_curr: float, coeffs: StepperCoefficients, f: float, delta: float, dtau: float) -> float:
    return float(_overdamped_step(phi_curr, coeffs.alpha, f, delta, dtau))


def substeps_for(coeffs: StepperCoefficients, dtau: float) -> int:
    if coeffs.c == 0:
        return 1
    return max(1, math.ceil(dtau / (SUBSTEP_RATIO * coeffs.c)))


def _trajectory(
    params: SquidParams,
    drive: DriveConfig,
    grid: SimGrid,
    r_eff: float,
    constants: PhysicalConstants,
) -> Tuple[np.ndarray, dict]:
    coeffs = StepperCoefficients.derive(params, drive, r_eff, constants)
    n_sub = substeps_for(coeffs, grid.step)
    beta = params.screening_beta(constants)
    if beta >= 1:
        logger.warning("Screening beta=%.3f >= 1; fixed-point flux solve may not converge", beta)
    start = time.perf_counter()
    phi, failed_at, worst = _integrate_phase(
        grid.n_steps,
        grid.samples_per_period,
        grid.step,
        n_sub,
        coeffs.c,
        coeffs.alpha,
        drive.bias,
        drive.amplitude,
        params.area_perturbation,
        params.asymmetry,
        params.screening(constants),
        flux_relaxation(params, constants),
        FLUX_TOLERANCE,
        FLUX_MAX_ITERATIONS,
    )
    if failed_at >= 0:
        raise NonConvergence(
            f"total flux did not converge at step {failed_at} "
            f"(beta={beta:.3f}, L_g={params.loop_inductance:.3e} H)"
        )
    cost = time.perf_counter() - start
    logger.debug(
        "SQUID integrated steps=%d substeps=%d c=%.3e alpha=%.3f flux_iters_max=%d cost=%.3fs",
        grid.n_steps,
        n_sub,
        coeffs.c,
        coeffs.alpha,
        worst,
        cost,
    )
    meta = {
        "r_eff_ohm": r_eff,
        "c": coeffs.c,
        "alpha": coeffs.alpha,
        "substeps": n_sub,
        "flux_iterations_max": int(worst),
        "samples_per_period": grid.samples_per_period,
        "drive_frequency_Hz": drive.frequency,
        **drive.flags(),
    }
    return phi, meta


def _window(grid: SimGrid, drive: DriveConfig) -> Tuple[int, float, float]:
    start = grid.periods_transient * grid.samples_per_period
    dt = grid.sample_spacing(drive)
    return start, (start + 1) * dt, dt


def simulate_phase(
    params: SquidParams,
    drive: DriveConfig,
    grid: SimGrid,
    r_eff: float,
    constants: PhysicalConstants = PHYSICAL,
) -> TimeSeries:
    """Retained phase samples phi_i, aligned index-for-index with simulate_squid."""
    phi, meta = _trajectory(params, drive, grid, r_eff, constants)
    start, t0, dt = _window(grid, drive)
    return TimeSeries(t0, dt, phi[start + 1 :], "phase", meta)


def simulate_squid(
    params: SquidParams,
    drive: DriveConfig,
    grid: SimGrid,
    r_eff: float,
    constants: PhysicalConstants = PHYSICAL,
) -> TimeSeries:
    """Voltage across one SQUID, V_i = Phi_0*nu*(phi_i - phi_{i-1})/dtau, transient discarded."""
    phi, meta = _trajectory(params, drive, grid, r_eff, constants)
    start, t0, dt = _window(grid, drive)
    scale = constants.flux_quantum * drive.frequency / grid.step
    voltage = scale * np.diff(phi[start:])
    return TimeSeries(t0, dt, voltage, "voltage", meta)
