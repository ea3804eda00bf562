"""Monotonic field optimization with optional spectral constraints.

One iteration goes: backward-propagate the adjoint under the current
reference field, sweep forward solving the cubic update at every step
(guaranteed not to lower the cost), then mix the swept field with its
filtered version and pick the mixing weight mu by a line search on the
true cost change.  mu = 0 keeps only the filtered field; mu = 1 keeps
the raw update, whose gain is non-negative by construction, so a weight
with non-negative gain always exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as _dc_field

import numpy as np

from . import engine
from .engine import EnsemblePlan, SweepResult
from .errors import BasisTooSmallError, ConfigError, InvalidFieldError, \
    MonotonicityError, OctalignError
from .filters import FilterSpec, apply_filter, identity_filter, \
    out_of_band_energy
from .propagate import FieldGrid, TimeGrid
from .rotor import MoleculeParams, RotorOperators, interaction_operator

# largest tolerated population in the two highest j levels; more means
# the basis truncation is biting and the run is untrustworthy
TOP_POPULATION_LIMIT = 1e-6



@dataclass(frozen=True)
class CostParams:
    """Weights of the quartic fluence penalty and the update strength.

    The penalty shape s(t) = sin^2(pi t / t_f) is fixed; lambda(t) =
    lambda0 / s(t) diverges at the window edges, which pins the field to
    zero there.
    """

    lambda0: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        if not (self.lambda0 > 0.0) or not math.isfinite(self.lambda0):
            raise ConfigError("cost.lambda0 must be positive and finite")
        if not (self.eta > 0.0) or not math.isfinite(self.eta):
            raise ConfigError("cost.eta must be positive and finite")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    cost: float
    projection: float
    fluence: float
    mu: float
    out_of_band: float


@dataclass
class OptimizeOptions:
    max_iters: int = 200
    mu_strategy: str = "dichotomy"   # none | dichotomy | polyfit
    stop_tol: float = 1e-10
    stop_count: int = 10
    mu_slack: float = 1e-10          # tolerated negative gain at mu = 1
    fp_tol: float = 1e-12
    fp_max: int = 24
    poly_degree: int = 4
    poly_samples: int = 10
    poly_frac: float = 0.01

    def __post_init__(self):
        if self.mu_strategy not in ("none", "dichotomy", "polyfit"):
            raise ConfigError(
                "optimize.mu_strategy must be none, dichotomy or polyfit")
        if self.max_iters < 0:
            raise ConfigError("optimize.max_iters must be >= 0")


@dataclass
class _MuEval:
    mu: float
    field: FieldGrid
    projection: float
    cost: float
    top: float


@dataclass
class OptimizationState:
    """Mutable loop state: the triplet view of one iteration.

    field is the current reference (already filtered/mixed); raw holds
    the latest unfiltered sweep output while a mu-search is running.
    """

    plan: EnsemblePlan
    filter_spec: FilterSpec
    cost_params: CostParams
    opts: OptimizeOptions
    lam: np.ndarray
    field: FieldGrid = None
    j_current: float = 0.0
    adjoint: np.ndarray = None
    raw: SweepResult = None
    history: list = _dc_field(default_factory=list)
    mu_cache: dict = _dc_field(default_factory=dict)


@dataclass
class OptimizationResult:
    history: tuple
    field: FieldGrid
    trial: FieldGrid
    converged: bool
    iterations: int
    projection: float
    cost: float
    dropped_mass: float
    max_top_population: float
    max_cubic_residual: float
    max_fixedpoint_gap: float
    max_fixedpoint_iters: int


def lambda_profile(grid: TimeGrid, lambda0: float) -> np.ndarray:
    """lambda(t_n) = lambda0 / sin^2(pi n / N); +inf at both endpoints."""
    n = grid.n_steps
    lam = np.full(n + 1, np.inf)
    k = np.arange(1, n)
    s = np.sin(np.pi * k / n)
    lam[1:n] = lambda0 / (s * s)
    return lam


def penalty(field: FieldGrid, params: CostParams) -> float:
    """Quartic fluence penalty, endpoint samples excluded.

    Trapezoidal quadrature over the window.  The two boundary samples
    carry lambda = +inf and are excluded: field updates inherit the
    reference value there, and spectral projections of an interior
    pulse may ring at the window edges without making J ill-defined.
    """
    n = field.grid.n_steps
    vals = field.values[1:n]
    k = np.arange(1, n)
    s = np.sin(np.pi * k / n)
    lam = params.lambda0 / (s * s)
    v2 = vals * vals
    return float(field.grid.dt * np.dot(lam, v2 * v2))


def cost(field: FieldGrid, final_projection: float,
         params: CostParams) -> float:
    """J = projection - integral of lambda(t) E^4; the cost to maximize."""
    if not np.all(np.isfinite(field.values)):
        raise InvalidFieldError("field contains non-finite samples")
    return final_projection - penalty(field, params)


def alpha_coupling(psi: np.ndarray, chi: np.ndarray, ops: RotorOperators,
                   params: MoleculeParams) -> float:
    """Instantaneous update coupling 2 Im[<psi|chi><chi|W|psi>].

    Reference implementation on full-ladder vectors; the sweep kernel
    evaluates the same contraction blockwise.
    """
    if psi.shape != chi.shape:
        raise ValueError("states must share a basis")
    w = interaction_operator(ops, params)
    s1 = np.vdot(psi, chi)
    t1 = np.vdot(chi, w @ psi)
    return float(2.0 * (s1 * t1).imag)


def update_field_step(e_prev: float, alpha: float, lambda_t: float,
                      eta: float) -> float:
    """Solve the update cubic for one time sample.

    Returns the real root closest to e_prev of
    eta*lam*E^3 + eta*lam*Et*E^2 + (1 + eta*lam*Et^2 + eta*alpha)*E
        + (eta*lam*Et^3 + eta*alpha*Et - Et) = 0.
    """
    if not (lambda_t > 0.0):
        raise ValueError("lambda_t must be positive")
    if not (eta > 0.0):
        raise ValueError("eta must be positive")
    from .kernels import cubic_nearest_root
    return float(cubic_nearest_root(lambda_t, eta, e_prev, alpha))


def combine_fields(e_new: FieldGrid, mu: float,
                   filter_spec: FilterSpec) -> FieldGrid:
    """mu * E + (1 - mu) * F(E), exact at the endpoints of mu.

    mu = 1 returns a copy of E and mu = 0 returns F(E) itself, so the
    two limits carry no roundoff from the blend arithmetic.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")
    if mu == 1.0:
        return FieldGrid(e_new.grid, e_new.values.copy())
    filtered = apply_filter(e_new, filter_spec)
    if mu == 0.0:
        return filtered
    blend = mu * e_new.values + (1.0 - mu) * filtered.values
    return FieldGrid(e_new.grid, blend)


def iterate_standard(state: OptimizationState) -> SweepResult:
    """One raw monotonic update from the current reference field.

    Backward-propagates the adjoint under state.field, then sweeps
    forward solving the cubic at every interior step.  The result's
    projection belongs to its field exactly (the sweep state *is* the
    propagation of the returned field).
    """
    state.adjoint = engine.backward_trajectory(state.plan, state.field)
    return engine.sweep_update(state.plan, state.field, state.adjoint,
                               state.lam, state.cost_params.eta,
                               state.opts.fp_tol, state.opts.fp_max)


def _evaluate_mu(mu: float, e_new: FieldGrid,
                 state: OptimizationState) -> _MuEval:
    if mu in state.mu_cache:
        return state.mu_cache[mu]
    if mu == 1.0 and state.raw is not None:
        # the sweep already propagated this exact field
        ev = _MuEval(mu=1.0, field=state.raw.field,
                     projection=state.raw.projection,
                     cost=cost(state.raw.field, state.raw.projection,
                               state.cost_params),
                     top=state.raw.top_level_population)
    else:
        cand = combine_fields(e_new, mu, state.filter_spec)
        p, top = engine.propagate_projection(state.plan, cand)
        ev = _MuEval(mu=mu, field=cand, projection=p,
                     cost=cost(cand, p, state.cost_params), top=top)
    state.mu_cache[mu] = ev
    return ev


def delta_j(mu: float, e_new: FieldGrid, state: OptimizationState) -> float:
    """Cost change of the mixed field against the current reference."""
    return _evaluate_mu(mu, e_new, state).cost - state.j_current


def _search_dichotomy(delta, tol_mu: float, slack: float) -> float:
    """Smallest filtered-enough mu with positive gain, by sign bisection.

    Probe order: mu = 0 first; then mu = 1; then bracket midpoints; the
    positive-side endpoint of the final bracket is returned.
    """
    d0 = delta(0.0)
    if d0 > 0.0:
        return 0.0
    d1 = delta(1.0)
    if d1 < -slack:
        raise MonotonicityError(
            f"gain at mu=1 is {d1:.3e}; the raw update must not lose cost")
    if d1 <= 0.0:
        return 1.0   # flat to within the slack: converged step
    lo, hi = 0.0, 1.0
    while hi - lo > tol_mu:
        mid = 0.5 * (lo + hi)
        if delta(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def mu_search_dichotomy(e_new: FieldGrid, state: OptimizationState,
                        tol_mu: float = 0.01):
    """Bisection strategy: accept mu = 0 outright when it gains."""
    mu = _search_dichotomy(
        lambda m: delta_j(m, e_new, state), tol_mu, state.opts.mu_slack)
    return mu, _evaluate_mu(mu, e_new, state).field


def _poly_first_crossing(coeffs, threshold: float) -> float:
    """Smallest mu in [0,1] where the fitted curve reaches threshold."""
    grid = np.linspace(0.0, 1.0, 1001)
    vals = np.polyval(coeffs, grid)
    above = np.nonzero(vals >= threshold)[0]
    if len(above) == 0:
        return 1.0
    i = int(above[0])
    if i == 0:
        return 0.0
    lo, hi = grid[i - 1], grid[i]
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if np.polyval(coeffs, mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return float(hi)


def _search_polyfit(delta, n_samples: int, degree: int, frac: float,
                    slack: float) -> float:
    """Fit the gain curve, target frac of its max, verify on the truth."""
    mus = np.linspace(0.0, 1.0, n_samples)
    ds = np.array([delta(float(m)) for m in mus])
    if np.max(ds) <= 0.0:
        if ds[-1] >= -slack:
            return 1.0   # plateau: nothing to gain at any mixing
        raise MonotonicityError(
            f"gain at mu=1 is {ds[-1]:.3e}; the raw update must not "
            "lose cost")
    coeffs = np.polyfit(mus, ds, degree)
    fit_max = float(np.max(np.polyval(coeffs, np.linspace(0.0, 1.0, 1001))))
    if fit_max <= 0.0:
        return float(mus[int(np.argmax(ds))])
    mu = _poly_first_crossing(coeffs, frac * fit_max)
    while mu <= 1.0:
        if delta(mu) > 0.0:
            return mu
        mu = min(mu + 0.01, 1.0) if mu < 1.0 else 1.0 + 1e-9
    if delta(1.0) >= -slack:
        return 1.0
    raise MonotonicityError("no mixing weight with positive gain found")


def mu_search_polyfit(e_new: FieldGrid, state: OptimizationState,
                      n_samples: int = None, frac: float = None):
    """Polynomial-fit strategy used for the pixelated-filter runs."""
    opts = state.opts
    ns = opts.poly_samples if n_samples is None else n_samples
    fr = opts.poly_frac if frac is None else frac
    mu = _search_polyfit(lambda m: delta_j(m, e_new, state),
                         ns, opts.poly_degree, fr, opts.mu_slack)
    return mu, _evaluate_mu(mu, e_new, state).field


def stationarity_residual(field: FieldGrid, forward, adjoint,
                          cost_params: CostParams, ops: RotorOperators,
                          params: MoleculeParams) -> float:
    """Normalized residual of the stationarity equation for pure states.

    max over interior samples of |4 lam E^3 + Im[<psi(tf)|phi_f>
    <chi|(dalpha cos^2 + alpha_perp)|psi>] E|, divided by the largest
    magnitude either term reaches.  Zero field gives zero residual.
    """
    vals = field.values
    n = field.grid.n_steps
    lam = lambda_profile(field.grid, cost_params.lambda0)
    w4 = 4.0 * interaction_operator(ops, params)
    c = np.vdot(forward.states[-1], adjoint.states[-1])
    worst = 0.0
    scale = 0.0
    for i in range(1, n):
        e = float(vals[i])
        term1 = 4.0 * lam[i] * e * e * e
        inner = np.vdot(adjoint.states[i], w4 @ forward.states[i])
        term2 = float((c * inner).imag) * e
        scale = max(scale, abs(term1), abs(term2))
        worst = max(worst, abs(term1 + term2))
    if scale == 0.0:
        return 0.0
    return worst / scale


def _final_summary(state, trial, converged, k_done):
    hist = tuple(state.history)
    last = hist[-1]
    raw = state.raw
    return OptimizationResult(
        history=hist, field=state.field, trial=trial, converged=converged,
        iterations=k_done, projection=last.projection, cost=last.cost,
        dropped_mass=state.plan.dropped_mass,
        max_top_population=state._top,
        max_cubic_residual=state._resid,
        max_fixedpoint_gap=state._gap,
        max_fixedpoint_iters=state._fp)


def run_loop(plan: EnsemblePlan, trial: FieldGrid, filter_spec: FilterSpec,
             cost_params: CostParams,
             opts: OptimizeOptions) -> OptimizationResult:
    """Drive the monotonic loop from a trial field; returns the history.

    filter_spec may be None only with mu_strategy = "none" (the pure
    standard algorithm); any other strategy needs a filter, possibly
    the identity.
    """
    if filter_spec is None:
        filter_spec = identity_filter()
    lam = lambda_profile(trial.grid, cost_params.lambda0)
    state = OptimizationState(plan=plan, filter_spec=filter_spec,
                              cost_params=cost_params, opts=opts, lam=lam)
    state._top = 0.0
    state._resid = 0.0
    state._gap = 0.0
    state._fp = 0
    p0, top0 = engine.propagate_projection(plan, trial)
    j0 = cost(trial, p0, cost_params)
    state.field = trial
    state.j_current = j0
    state._top = top0
    if top0 > TOP_POPULATION_LIMIT:
        raise BasisTooSmallError(
            f"trial field already puts population {top0:.3e} in the two "
            f"highest j levels; increase basis.j_max")
    oob0 = out_of_band_energy(trial, filter_spec)
    state.history.append(IterationRecord(
        k=0, cost=j0, projection=p0, fluence=penalty(trial, cost_params),
        mu=1.0, out_of_band=oob0))
    flat = 0
    converged = False
    k_done = 0
    for k in range(1, opts.max_iters + 1):
        try:
            sweep = iterate_standard(state)
            state.raw = sweep
            state.mu_cache = {}
            if opts.mu_strategy == "none":
                mu = 1.0
                ev = _evaluate_mu(1.0, sweep.field, state)
            elif opts.mu_strategy == "dichotomy":
                mu, _ = mu_search_dichotomy(sweep.field, state)
                ev = state.mu_cache[mu]
            else:
                mu, _ = mu_search_polyfit(sweep.field, state)
                ev = state.mu_cache[mu]
        except OctalignError as err:
            # let the caller salvage the completed iterations
            err.history = tuple(state.history)
            raise
        dj = ev.cost - state.j_current
        state.field = ev.field
        state.j_current = ev.cost
        state._top = max(state._top, sweep.top_level_population, ev.top)
        if state._top > TOP_POPULATION_LIMIT:
            err = BasisTooSmallError(
                f"population {state._top:.3e} in the two highest j levels "
                f"exceeds {TOP_POPULATION_LIMIT:.0e}; increase basis.j_max")
            err.history = tuple(state.history)
            raise err
        state._resid = max(state._resid, sweep.max_cubic_residual)
        state._gap = max(state._gap, sweep.max_fixedpoint_gap)
        state._fp = max(state._fp, sweep.max_fixedpoint_iters)
        state.history.append(IterationRecord(
            k=k, cost=ev.cost, projection=ev.projection,
            fluence=penalty(ev.field, cost_params), mu=mu,
            out_of_band=out_of_band_energy(ev.field, filter_spec)))
        state.raw = None
        state.mu_cache = {}
        k_done = k
        flat = flat + 1 if dj < opts.stop_tol else 0
        if flat >= opts.stop_count:
            converged = True
            break
    return _final_summary(state, trial, converged, k_done)


def optimize_experiment(config) -> OptimizationResult:
    """Full optimization from an experiment configuration."""
    from .runner import build_problem
    plan, trial, filter_spec, cost_params, opts = build_problem(config)
    return run_loop(plan, trial, filter_spec, cost_params, opts)
