import logging
import math
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np
from scipy.sparse import identity
from scipy.sparse.linalg import splu

from src.discretize import Grid, Stencil, assemble_hamiltonian, potential_on_nodes
from src.errors import GridError, PropagationError
from src.potentials import PotentialSpec

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ("t", "N", "dN_dt", "sink_integral", "max_defect")


def probability_current(psi: np.ndarray, h: float) -> np.ndarray:
    """Flux 2 Im(conj(psi_j) psi_{j+1}) / h on the n - 1 cell faces"""
    return 2.0 * np.imag(np.conj(psi[:-1]) * psi[1:]) / h


@dataclass(frozen=True)
class WaveState:
    """Wave function sampled on every grid node (zero on the walls) at time t"""
    grid: Grid
    psi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != self.grid.x.shape:
            raise ValueError(f"psi has shape {psi.shape}, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(psi)):
            raise ValueError("psi must be finite")
        psi = psi.copy()
        psi[0] = psi[-1] = 0.0
        object.__setattr__(self, "psi", psi)
        if not self.norm > 0:
            raise ValueError("psi must have a positive norm on the interior nodes")

    @property
    def norm(self) -> float:
        return float(self.grid.h * np.sum(np.abs(self.psi) ** 2))

    def normalized(self) -> "WaveState":
        return WaveState(self.grid, self.psi / math.sqrt(self.norm), self.t)


def gaussian_packet(grid: Grid, center: float = 0.0, width: float = 1.0,
                    momentum: float = 0.0) -> WaveState:
    """
    Normalised Gaussian packet exp(-(x - center)^2 / 2 width^2 + i momentum x).

    Args:
        grid: nodes to sample on; the wall values are zeroed
        center: packet centre
        width: envelope width, must be > 0
        momentum: carrier wave number

    Returns:
        A WaveState with unit discrete norm at t = 0

    Raises:
        ValueError: width <= 0
    """
    if width <= 0:
        raise ValueError(f"packet width must be > 0, got {width}")
    x = grid.x
    psi = np.exp(-((x - center) ** 2) / (2.0 * width ** 2) + 1j * momentum * x)
    return WaveState(grid, psi).normalized()


def pt_symmetric_packet(grid: Grid, center: float = 0.0, width: float = 1.0,
                        momentum: float = 0.0) -> WaveState:
    """
    Packet with psi(-x) = conj(psi(x)), built from a Gaussian at center and
    its PT image at -center.
    """
    if not grid.is_symmetric:
        raise GridError("a PT-symmetric packet needs a grid symmetric about x = 0")
    x = grid.x
    phi = np.exp(-((x - center) ** 2) / (2.0 * width ** 2) + 1j * momentum * x)
    psi = phi + np.conj(phi[::-1])
    return WaveState(grid, psi).normalized()


@dataclass(frozen=True)
class TimeSeries:
    """Diagnostics at t_k = t_0 + k dt for k = 0..steps"""
    dt: float
    t: np.ndarray
    N: np.ndarray
    dN_dt: np.ndarray
    sink_integral: np.ndarray
    max_defect: np.ndarray
    final: WaveState

    def __len__(self) -> int:
        return self.t.size

    def rows(self) -> Iterator[Tuple[float, ...]]:
        for k in range(self.t.size):
            yield (float(self.t[k]), float(self.N[k]), float(self.dN_dt[k]),
                   float(self.sink_integral[k]), float(self.max_defect[k]))


class CrankNicolsonStepper:
    """
    Solves (I + i dt/2 H) psi+ = (I - i dt/2 H) psi on the interior nodes.

    Both Cayley factors are LU-factorised once, so a backward step costs the
    same as a forward one.
    """

    def __init__(self, spec: PotentialSpec, grid: Grid, dt: float):
        if not (dt > 0 and math.isfinite(dt)):
            raise ValueError(f"dt must be finite and > 0, got {dt}")
        self.grid = grid
        self.dt = dt
        h_mat = assemble_hamiltonian(spec, grid, Stencil.THREE_POINT).to_sparse("csc")
        eye = identity(h_mat.shape[0], dtype=complex, format="csc")
        self._plus = (eye + 0.5j * dt * h_mat).tocsc()
        self._minus = (eye - 0.5j * dt * h_mat).tocsc()
        try:
            self._lu_plus = splu(self._plus)
            self._lu_minus = splu(self._minus)
        except RuntimeError as e:
            raise PropagationError(0, f"Cayley factor is singular for dt={dt}: {e}") from e
        # sink weight Im V = -V_I on the interior
        self.im_v = potential_on_nodes(spec, grid.interior).imag

    def forward(self, interior: np.ndarray, step: int) -> np.ndarray:
        return self._checked(self._lu_plus.solve(self._minus @ interior), step)

    def backward(self, interior: np.ndarray, step: int) -> np.ndarray:
        return self._checked(self._lu_minus.solve(self._plus @ interior), step)

    @staticmethod
    def _checked(psi: np.ndarray, step: int) -> np.ndarray:
        if not np.all(np.isfinite(psi)):
            raise PropagationError(step, "wave function is no longer finite")
        return psi


def _pad(interior: np.ndarray) -> np.ndarray:
    psi = np.zeros(interior.size + 2, dtype=complex)
    psi[1:-1] = interior
    return psi


def crank_nicolson_propagate(spec: PotentialSpec, grid: Grid, psi0: WaveState,
                             dt: float, steps: int) -> TimeSeries:
    """
    Propagate psi0 for the given number of steps and record the continuity
    diagnostics at every time level.

    dN/dt and the pointwise defect use centred differences; the end levels
    borrow one extra step backwards from t_0 and one forwards past the last.

    Raises:
        ValueError: bad dt, steps or a state on another grid
        PropagationError: a step produced a non-finite state or a singular solve
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if psi0.grid != grid:
        raise ValueError("initial state lives on a different grid")

    stepper = CrankNicolsonStepper(spec, grid, dt)
    h = grid.h
    v_i = -stepper.im_v

    def norm(p: np.ndarray) -> float:
        return float(h * np.sum(np.abs(p) ** 2))

    prev = stepper.backward(psi0.psi[1:-1], 0)
    cur = psi0.psi[1:-1].copy()
    nxt = stepper.forward(cur, 1)

    count = steps + 1
    t = psi0.t + dt * np.arange(count)
    n_series = np.empty(count)
    dndt = np.empty(count)
    sink = np.empty(count)
    defect = np.empty(count)

    for k in range(count):
        p_prev, p_cur, p_next = np.abs(prev) ** 2, np.abs(cur) ** 2, np.abs(nxt) ** 2
        n_series[k] = h * p_cur.sum()
        dndt[k] = (norm(nxt) - norm(prev)) / (2.0 * dt)
        sink[k] = -2.0 * h * np.sum(v_i * p_cur)

        flux = probability_current(_pad(cur), h)
        local = (p_next - p_prev) / (2.0 * dt) + np.diff(flux) / h + 2.0 * v_i * p_cur
        defect[k] = float(np.max(np.abs(local)))

        if k < count - 1:
            prev, cur = cur, nxt
            nxt = stepper.forward(cur, k + 2)

    final = WaveState(grid, _pad(cur), float(t[-1]))
    logger.info(f"{spec.name}: propagated {steps} steps of dt={dt}, N {n_series[0]:.6g} -> {n_series[-1]:.6g}")
    return TimeSeries(dt, t, n_series, dndt, sink, defect, final)


def continuity_defect(series: TimeSeries) -> float:
    """Largest |dN/dt - sink integral| relative to N over the run"""
    if len(series) < 3:
        raise ValueError(f"need at least 3 recorded levels, got {len(series)}")
    return float(np.max(np.abs(series.dN_dt - series.sink_integral) / np.maximum(series.N, 1e-30)))
