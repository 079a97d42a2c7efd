"""Dense-in-time error measurement between full-order and reduced solutions.

At every sample time three error fields are measured in both the L2 norm and
the H1 seminorm: the reduced-order error u_r - u_h, the projection error
(I - P^r) u_h, and the gap u_r - P^r u_h.  For systems the reported value is
the combined norm sqrt(sum over components of the squared component norms),
which is also what the stacked mass/stiffness quadratic forms produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..integrator import Trajectory, dense_eval
from ..pod import project_coefficients
from ..rom import RomTrajectory, rom_dense_coeffs

DEFAULT_DENSITY = 2048


def sample_times(t0: float, T: float, periods: float = 1.0, density: int = DEFAULT_DENSITY) -> np.ndarray:
    """Times t0, t0 + T/density, ..., spanning ``periods`` windows of length T."""
    if T <= 0 or density < 1 or periods <= 0:
        raise ValueError("T, periods and density must be positive")
    n = int(round(periods * density))
    return t0 + (T / density) * np.arange(n + 1)


@dataclass(frozen=True)
class ErrorSeries:
    times: np.ndarray
    l2_rom: np.ndarray
    h1_rom: np.ndarray
    l2_proj: np.ndarray
    h1_proj: np.ndarray
    l2_rom_vs_proj: np.ndarray
    h1_rom_vs_proj: np.ndarray

    @property
    def max_l2_rom(self) -> float:
        return float(np.max(self.l2_rom))

    @property
    def max_h1_rom(self) -> float:
        return float(np.max(self.h1_rom))

    @property
    def max_l2_proj(self) -> float:
        return float(np.max(self.l2_proj))

    @property
    def max_h1_proj(self) -> float:
        return float(np.max(self.h1_proj))


def error_series(fom: Trajectory, rtraj: RomTrajectory, times: np.ndarray) -> ErrorSeries:
    """Sample the three error fields along ``times``."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("no sample times given")
    lo = max(fom.t0, rtraj.t0)
    hi = min(fom.t1, rtraj.t1)
    if times[0] < lo - 1e-12 or times[-1] > hi + 1e-12:
        raise ValueError(
            f"sample times [{times[0]}, {times[-1]}] leave the common span [{lo}, {hi}]"
        )

    rom = rtraj.rom
    basis, r, ops = rom.basis, rom.r, rom.ops
    k = rom.problem.n_components
    mass, stiff = ops.stacked(k)
    phi = rom.modes

    out = {name: np.empty(times.size) for name in (
        "l2_rom", "h1_rom", "l2_proj", "h1_proj", "l2_rom_vs_proj", "h1_rom_vs_proj")}

    def norms(vec):
        return (
            np.sqrt(max(float(vec @ (mass @ vec)), 0.0)),
            np.sqrt(max(float(vec @ (stiff @ vec)), 0.0)),
        )

    for i, t in enumerate(times):
        u_h = dense_eval(fom, t)
        alpha = rom_dense_coeffs(rtraj, t)
        u_r = phi @ alpha
        beta = project_coefficients(basis, r, u_h, ops)
        p_u_h = phi @ beta

        out["l2_rom"][i], out["h1_rom"][i] = norms(u_r - u_h)
        out["l2_proj"][i], out["h1_proj"][i] = norms(u_h - p_u_h)
        out["l2_rom_vs_proj"][i], out["h1_rom_vs_proj"][i] = norms(u_r - p_u_h)

    return ErrorSeries(times=times, **out)


def dump_errors_csv(series: ErrorSeries, path) -> None:
    """errors.csv with the documented column layout."""
    with open(path, "w") as f:
        f.write("# combined norm: sqrt(sum of squared component norms)\n")
        f.write("t,l2_rom,h1_rom,l2_proj,h1_proj,l2_rom_vs_proj,h1_rom_vs_proj\n")
        for i, t in enumerate(series.times):
            vals = (t, series.l2_rom[i], series.h1_rom[i], series.l2_proj[i],
                    series.h1_proj[i], series.l2_rom_vs_proj[i],
                    series.h1_rom_vs_proj[i])
            f.write(",".join(repr(float(v)) for v in vals) + "\n")
