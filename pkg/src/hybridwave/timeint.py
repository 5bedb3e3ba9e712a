"""Third-order Adams-Bashforth time integration, single-rate and
multi-rate.

The multi-rate scheme bins elements into power-of-two timestep levels
(level 1 coarsest).  One macro step advances level `lev` through 2^(lev-1)
substeps.  At substep times between a coarser element's own steps, its
traces are produced from its own Adams-Bashforth dense-output polynomial at
the fractional step (same slope history, fractional step coefficients),
which is exact for solutions polynomial in time up to the order of the
scheme.  Warm-up uses forward Euler then AB2.
"""

import math

import numpy as np

__all__ = ["ab3_step", "ab_coefficients", "single_rate_run", "mrab_run",
           "MRABDriver"]


def ab_coefficients(n_hist, theta=1.0):
    """Adams-Bashforth update weights for a step (or partial step) of
    length theta*h given n_hist stored slopes at t, t-h, ...

    The returned c satisfy u(t + theta h) = u(t) + h sum c_i f_i; theta=1
    gives the classical AB1/AB2/AB3 coefficients (1), (3/2, -1/2),
    (23/12, -16/12, 5/12).
    """
    th = theta
    if n_hist == 1:
        return np.array([th])
    if n_hist == 2:
        return np.array([th + th**2 / 2.0, -(th**2) / 2.0])
    if n_hist == 3:
        return np.array([th + 3.0 * th**2 / 4.0 + th**3 / 6.0,
                         -(th**2) - th**3 / 3.0,
                         th**2 / 4.0 + th**3 / 6.0])
    raise ValueError("history depth must be 1..3")


def ab3_step(state, history, dt, theta=1.0):
    """One Adams-Bashforth step: u += dt * sum c_i f_i.

    history is a list of RHS evaluations, most recent first; its length
    (1..3) selects the warm-up order.
    """
    c = ab_coefficients(len(history), theta)
    out = {}
    for t, arr in state.items():
        acc = arr.copy()
        for ci, f in zip(c, history):
            acc += dt * ci * f[t]
        out[t] = acc
    return out


def single_rate_run(disc, state, dt, T_final, callback=None):
    """Advance to T_final with global AB3 steps of size dt; the last step
    lands exactly through the fractional-step coefficients."""
    time = 0.0
    history = []
    while time < T_final - 1e-14:
        h = min(dt, T_final - time)
        rhs = disc.compute_rhs(state, time)
        history.insert(0, rhs)
        if len(history) > 3:
            history.pop()
        state = ab3_step(state, history, dt, theta=h / dt)
        time += h
        if callback is not None:
            callback(time, state)
    return state


class MRABDriver:
    """Multi-rate AB3 on a TimestepPlan.

    To land on T_final the plan's dt_min is reduced uniformly so the run
    is an integer number of macro steps (level ratios preserved).  Neighbor
    levels must differ by at most one (validated against the plan).
    """

    def __init__(self, disc, plan):
        self.disc = disc
        self.plan = plan
        plan.validate_neighbor_levels(disc.mesh)
        self.levels = {t: plan.levels_of(disc.mesh, t) for t in disc.types}
        self.n_levels = plan.n_levels
        self.rhs_evals = {t: np.zeros(disc.n_elems[t], dtype=int)
                          for t in disc.types}
        self.macro_steps = 0

    def run(self, state, T_final, callback=None):
        disc = self.disc
        L = self.n_levels
        macro = 2 ** (L - 1) * self.plan.dt_min
        n_macro = max(1, math.ceil(T_final / macro - 1e-12))
        dt_min = T_final / (n_macro * 2 ** (L - 1))
        masks = {t: [self.levels[t] == lev for lev in range(1, L + 1)]
                 for t in disc.types}
        hist = {t: np.zeros((3,) + state[t].shape) for t in disc.types}
        n_hist = np.zeros(L + 1, dtype=int)
        for m in range(n_macro):
            t0 = m * dt_min * 2 ** (L - 1)
            self._macro_step(state, hist, n_hist, masks, t0, dt_min)
            self.macro_steps += 1
            if callback is not None:
                callback(t0 + dt_min * 2 ** (L - 1), state)
        return state

    def _macro_step(self, state, hist, n_hist, masks, t0, dt_min):
        disc = self.disc
        L = self.n_levels
        for tick in range(2 ** (L - 1)):
            stepping = [lev for lev in range(1, L + 1)
                        if tick % (2 ** (L - lev)) == 0]
            tau = t0 + tick * dt_min
            eff = self._effective_state(state, hist, n_hist, masks,
                                        tick, dt_min)
            rhs = disc.compute_rhs(eff, tau)
            for t in disc.types:
                sel = np.zeros(disc.n_elems[t], dtype=bool)
                for lev in stepping:
                    sel |= masks[t][lev - 1]
                if not sel.any():
                    continue
                self.rhs_evals[t][sel] += 1
                hist[t][2, sel] = hist[t][1, sel]
                hist[t][1, sel] = hist[t][0, sel]
                hist[t][0, sel] = rhs[t][sel]
            for lev in stepping:
                n_hist[lev] = min(n_hist[lev] + 1, 3)
                dt_lev = dt_min * 2 ** (L - lev)
                c = ab_coefficients(n_hist[lev])
                for t in disc.types:
                    sel = masks[t][lev - 1]
                    if not sel.any():
                        continue
                    upd = c[0] * hist[t][0, sel]
                    for i in range(1, n_hist[lev]):
                        upd += c[i] * hist[t][i, sel]
                    state[t][sel] += dt_lev * upd

    def _effective_state(self, state, hist, n_hist, masks, tick, dt_min):
        """State of every element at the current tick time.

        Elements stepping at this tick are already synchronized.  A coarser
        element last advanced its stored state to the end of its own step;
        evaluating its dense-output polynomial at fraction theta of that
        step amounts to adding (c(theta) - c(1)) times its slope history.
        """
        L = self.n_levels
        out = {}
        for t in self.disc.types:
            eff = state[t].copy()
            for lev in range(1, L + 1):
                period = 2 ** (L - lev)
                frac = tick % period
                if frac == 0 or n_hist[lev] == 0:
                    continue
                sel = masks[t][lev - 1]
                if not sel.any():
                    continue
                nh = n_hist[lev]
                c = (ab_coefficients(nh, frac / period)
                     - ab_coefficients(nh, 1.0))
                dt_lev = dt_min * period
                upd = c[0] * hist[t][0, sel]
                for i in range(1, nh):
                    upd += c[i] * hist[t][i, sel]
                eff[sel] += dt_lev * upd
            out[t] = eff
        return out


def mrab_run(disc, plan, state, T_final, callback=None):
    """Multi-rate run; returns the advanced state and the driver (for
    step accounting)."""
    driver = MRABDriver(disc, plan)
    driver.run(state, T_final, callback=callback)
    return state, driver
