"""Two-level Lorenz-96 dynamics and a fixed-step RK4 integrator.

The system couples K slow variables X to K*J fast variables Y:

    dX_k/dt = -X_{k-1} (X_{k-2} - X_{k+1}) - X_k + F - h c Ybar_k
    dZ_i/dt = -c b Z_{i+1} (Z_{i+2} - Z_{i-1}) - c Z_i + (h c / J) X_{i // J}

where Z is the fast chain stored flat (entry j + J*k holds the j-th fast
variable of slow sector k), Ybar_k is the mean of the J fast variables in
sector k, and all indexing is cyclic (mod K for X, mod K*J for Z).

Slow-variable indexing is cyclic mod K and the fast chain wraps across
slow sectors (cyclic mod K*J), the standard convention.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    IntegrationDivergedError,
    InvalidStateError,
    NumericOverflowError,
)

__all__ = [
    "L96Params",
    "L96State",
    "Trajectory",
    "l96_ybar",
    "l96_derivative",
    "rk4_step",
    "integrate",
    "integrate_many",
    "random_initial_state",
]


@dataclass(frozen=True)
class L96Params:
    """Parameters of the two-level Lorenz-96 system.

    Attributes
    ----------
    K : int
        Number of slow variables; must be >= 4 so the quadratic advection
        term references three distinct cyclic neighbours.
    J : int
        Number of fast variables per slow variable; must be >= 1.
    F : float
        Constant forcing in the slow equation.
    b : float
        Fast-variable nonlinearity amplitude; must be > 0.
    c : float
        Timescale ratio between fast and slow variables; must be > 0.
    h : float
        Slow-fast coupling strength (the regression target downstream).
    """

    K: int
    J: int
    F: float
    b: float = 10.0
    c: float = 10.0
    h: float = 1.0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 4:
            raise InvalidStateError(f"K must be an integer >= 4, got {self.K}")
        if int(self.J) != self.J or self.J < 1:
            raise InvalidStateError(f"J must be an integer >= 1, got {self.J}")
        if not (self.b > 0 and self.c > 0):
            raise InvalidStateError("b and c must be positive")
        for name in ("F", "b", "c", "h"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidStateError(f"{name} must be finite")


@dataclass(frozen=True)
class L96State:
    """Full state of the system: slow vector X and flat fast chain Y."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "Y", np.asarray(self.Y, dtype=float))
        if self.X.ndim != 1 or self.Y.ndim != 1:
            raise InvalidStateError("X and Y must be one-dimensional")

    def conforms(self, params: L96Params) -> bool:
        return self.X.shape == (params.K,) and self.Y.shape == (params.K * params.J,)

    def require_conforms(self, params: L96Params):
        if not self.conforms(params):
            raise InvalidStateError(
                f"state shapes {self.X.shape}/{self.Y.shape} do not match "
                f"K={params.K}, J={params.J}"
            )
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise InvalidStateError("state contains non-finite entries")

    def packed(self) -> np.ndarray:
        return np.concatenate([self.X, self.Y])


@dataclass(frozen=True)
class Trajectory:
    """A retained sequence of states sampled every integration step.

    ``t0`` is the model time of the first retained state, so state ``i``
    sits at time ``t0 + i * dt``.
    """

    dt: float
    states: tuple = field(repr=False)
    t0: float = 0.0

    def __post_init__(self):
        if len(self.states) == 0:
            raise InvalidStateError("trajectory must contain at least one state")

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))

    def slow_series(self, k: int = 0) -> np.ndarray:
        """Time series of slow variable X_{k+1} (0-based index k)."""
        return np.array([s.X[k] for s in self.states])


def l96_ybar(state: L96State, params: L96Params) -> np.ndarray:
    """Per-sector mean of the fast variables.

    Element k is the arithmetic mean of the J fast variables attached to
    slow variable k.
    """
    state.require_conforms(params)
    return state.Y.reshape(params.K, params.J).mean(axis=1)


def _packed_derivative(V, K, J, F, b, c, h):
    """Time derivative of packed states ``V = [X | Y]``.

    Shape-polymorphic over leading axes: accepts a single packed vector of
    length K + K*J or a batch ``(n, K + K*J)``; ``h`` may be a scalar or a
    column vector broadcasting against the batch. Every operation is
    elementwise per row, so batched rows evolve exactly as they would
    alone.
    """
    X = V[..., :K]
    Y = V[..., K:]
    Xm1 = np.roll(X, 1, axis=-1)
    Xm2 = np.roll(X, 2, axis=-1)
    Xp1 = np.roll(X, -1, axis=-1)
    Yp1 = np.roll(Y, -1, axis=-1)
    Yp2 = np.roll(Y, -2, axis=-1)
    Ym1 = np.roll(Y, 1, axis=-1)
    ybar = Y.reshape(*Y.shape[:-1], K, J).mean(axis=-1)
    dX = -Xm1 * (Xm2 - Xp1) - X + F - h * c * ybar
    Xrep = np.repeat(X, J, axis=-1)
    dY = -c * b * Yp1 * (Yp2 - Ym1) - c * Y + (h * c / J) * Xrep
    return np.concatenate([dX, dY], axis=-1)


def l96_derivative(state: L96State, params: L96Params) -> L96State:
    """Time derivative of the full state under the two-level equations."""
    state.require_conforms(params)
    dV = _packed_derivative(
        state.packed(), params.K, params.J, params.F, params.b, params.c, params.h
    )
    return L96State(X=dV[: params.K], Y=dV[params.K :])


def rk4_step(deriv, state, dt: float):
    """One classical fourth-order Runge-Kutta step.

    Parameters
    ----------
    deriv : callable
        Maps a state to its time derivative. The state type only needs
        addition and scalar multiplication (floats and numpy arrays both
        qualify).
    state : S
        Current state.
    dt : float
        Step size, > 0.

    Returns
    -------
    S
        ``state + (dt/6) (k1 + 2 k2 + 2 k3 + k4)``.

    Raises
    ------
    NumericOverflowError
        If any stage derivative is non-finite; the message names the
        stage (k1..k4).
    """
    if not dt > 0:
        raise InvalidStateError(f"dt must be > 0, got {dt}")
    k1 = deriv(state)
    _require_finite_stage(k1, "k1")
    k2 = deriv(state + 0.5 * dt * k1)
    _require_finite_stage(k2, "k2")
    k3 = deriv(state + 0.5 * dt * k2)
    _require_finite_stage(k3, "k3")
    k4 = deriv(state + dt * k3)
    _require_finite_stage(k4, "k4")
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _require_finite_stage(k, stage):
    if not np.all(np.isfinite(k)):
        raise NumericOverflowError(f"non-finite derivative in RK4 stage {stage}")


def _rk4_packed(V, dt, K, J, F, b, c, h):
    # unchecked inner step; finiteness is policed once per step by callers
    k1 = _packed_derivative(V, K, J, F, b, c, h)
    k2 = _packed_derivative(V + 0.5 * dt * k1, K, J, F, b, c, h)
    k3 = _packed_derivative(V + 0.5 * dt * k2, K, J, F, b, c, h)
    k4 = _packed_derivative(V + dt * k3, K, J, F, b, c, h)
    return V + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    initial: L96State,
    params: L96Params,
    dt: float,
    n_keep: int,
    n_discard: int = 0,
) -> Trajectory:
    """Integrate the system and retain the post-transient states.

    Advances ``n_discard`` steps without recording, then records the state
    reached after step ``n_discard + i`` for ``i = 0 .. n_keep - 1``
    (``n_discard + n_keep - 1`` steps in total). With ``n_discard = 0``
    the initial state itself is the first retained state. The trajectory
    is a pure function of the arguments.

    Raises
    ------
    IntegrationDivergedError
        If the state becomes non-finite; carries the failing step index.
    """
    initial.require_conforms(params)
    if not dt > 0:
        raise InvalidStateError(f"dt must be > 0, got {dt}")
    if n_keep < 1:
        raise InvalidStateError(f"n_keep must be >= 1, got {n_keep}")
    if n_discard < 0:
        raise InvalidStateError(f"n_discard must be >= 0, got {n_discard}")
    K, J = params.K, params.J
    V = initial.packed()
    states = []
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_discard + n_keep):
            if step >= n_discard:
                states.append(L96State(X=V[:K].copy(), Y=V[K:].copy()))
                if len(states) == n_keep:
                    break
            V = _rk4_packed(V, dt, K, J, params.F, params.b, params.c, params.h)
            if not np.all(np.isfinite(V)):
                raise IntegrationDivergedError(
                    f"integration diverged at step {step + 1}", step=step + 1
                )
    return Trajectory(dt=dt, states=tuple(states), t0=n_discard * dt)


def integrate_many(
    initial: np.ndarray,
    params: L96Params,
    h_values: np.ndarray,
    dt: float,
    n_steps: int,
    record_series=None,
    record_steps=None,
    n_jobs: int = 1,
):
    """Vectorized integration of many independent trajectories.

    Each row of ``initial`` is a packed state [X | Y]; ``h_values`` gives a
    per-row coupling strength overriding ``params.h``. All arithmetic is
    elementwise per row, so results are bitwise identical to integrating
    each row alone, regardless of batching or ``n_jobs``.

    Parameters
    ----------
    initial : ndarray, shape (n, K + K*J)
        Packed initial states.
    params : L96Params
        Shared parameters (``params.h`` is ignored per row).
    h_values : ndarray, shape (n,)
        Per-row coupling strength.
    dt : float
        Step size.
    n_steps : int
        Number of RK4 steps to advance.
    record_series : int or None
        If given, record this packed-state component after every step;
        returns an array of shape (n, n_steps + 1) that includes the
        initial value at column 0.
    record_steps : sequence of int or None
        If given, record full packed states after these step counts
        (0 records the initial state); returns (n, len(record_steps), D).
    n_jobs : int
        Number of worker threads over contiguous row chunks.

    Returns
    -------
    finals, series, snapshots
        ``finals`` is the (n, D) state after ``n_steps``; ``series`` and
        ``snapshots`` are the requested recordings or None.

    Raises
    ------
    IntegrationDivergedError
        Names the first offending row (as ``sim_index``) and step.
    """
    initial = np.asarray(initial, dtype=float)
    h_values = np.asarray(h_values, dtype=float)
    n, D = initial.shape
    K, J = params.K, params.J
    if D != K + K * J:
        raise InvalidStateError(f"packed width {D} does not match K={K}, J={J}")
    if h_values.shape != (n,):
        raise InvalidStateError("h_values must have one entry per row")
    record_steps = sorted(record_steps) if record_steps is not None else None

    finals = np.empty_like(initial)
    series = np.empty((n, n_steps + 1)) if record_series is not None else None
    snaps = (
        np.empty((n, len(record_steps), D)) if record_steps is not None else None
    )

    def run_chunk(lo, hi):
        V = initial[lo:hi].copy()
        h = h_values[lo:hi, None]
        if series is not None:
            series[lo:hi, 0] = V[:, record_series]
        if snaps is not None:
            for j, rs in enumerate(record_steps):
                if rs == 0:
                    snaps[lo:hi, j] = V
        with np.errstate(over="ignore", invalid="ignore"):
            for step in range(1, n_steps + 1):
                V = _rk4_packed(V, dt, K, J, params.F, params.b, params.c, h)
                bad = ~np.all(np.isfinite(V), axis=1)
                if bad.any():
                    row = lo + int(np.argmax(bad))
                    raise IntegrationDivergedError(
                        f"simulation {row} diverged at step {step} "
                        f"(h={h_values[row]:.6g})",
                        step=step,
                        sim_index=row,
                    )
                if series is not None:
                    series[lo:hi, step] = V[:, record_series]
                if snaps is not None:
                    for j, rs in enumerate(record_steps):
                        if rs == step:
                            snaps[lo:hi, j] = V
        finals[lo:hi] = V

    if n_jobs <= 1 or n <= 1:
        run_chunk(0, n)
    else:
        n_jobs = min(n_jobs, n)
        bounds = np.linspace(0, n, n_jobs + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            futures = [
                pool.submit(run_chunk, lo, hi)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for fut in futures:
                fut.result()
    return finals, series, snaps


def random_initial_state(params: L96Params, rng: np.random.Generator) -> L96State:
    """Forcing-centered random perturbation near the uncoupled rest state.

    ``X = F + 0.5 eps`` and ``Y = 0.05 delta`` with eps, delta i.i.d.
    standard normal; deterministic per generator state. Starting at the
    rest state X = F reaches the attractor quickly, and how fast the
    trajectory escapes it carries the imprint of the coupling strength.
    Caution: at large F the uniform start drives the fast chain hard, so
    integration at dt = 0.005 diverges once h*F/J is too large (at
    F = 20, K = J = 4 the boundary sits near h = 0.75).
    """
    X = params.F + 0.5 * rng.standard_normal(params.K)
    Y = 0.05 * rng.standard_normal(params.K * params.J)
    return L96State(X=X, Y=Y)
