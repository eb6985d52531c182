"""Nonnegativity-constrained minimisation of rational-quadratic objectives.

Both the mean delay as a function of the credits and the lower-bound objective
as a function of the mean waiting allocation have the shape

    F(x) = c + (x^T A x + b^T x + a) / (r0 + sum(x)),    x >= 0,

which is smooth wherever the denominator is positive but not known to be
convex. :func:`minimize` runs projected gradient descent with Armijo
backtracking from several starting points, polishes each result with
projected Newton steps on the free variables, and detects minimisers that
escape to infinity along a ray.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ARMIJO = 1e-4


@dataclass(frozen=True)
class RationalQuadratic:
    c: float
    A: np.ndarray
    b: np.ndarray
    a: float
    r0: float

    @property
    def n(self) -> int:
        return len(self.b)

    def _parts(self, x):
        S = self.r0 + x.sum()
        Ax = self.A @ x
        P = x @ Ax + self.b @ x + self.a
        return S, Ax, P

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        S, _, P = self._parts(x)
        if S <= 0.0:
            return self.c
        return float(self.c + P / S)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        S, Ax, P = self._parts(x)
        dP = 2.0 * Ax + self.b
        return dP / S - P / (S * S)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        S, Ax, P = self._parts(x)
        dP = 2.0 * Ax + self.b
        one = np.ones(self.n)
        return (
            2.0 * self.A / S
            - (np.outer(dP, one) + np.outer(one, dP)) / S**2
            + 2.0 * P * np.outer(one, one) / S**3
        )

    def ray_limit(self, d) -> float:
        """``lim_{s -> inf} F(s d)`` for a nonzero direction ``d >= 0``."""
        d = np.asarray(d, dtype=float)
        quad = float(d @ self.A @ d)
        lin = float(d.sum())
        scale = float(np.abs(self.A).sum()) * float(d @ d) + 1e-300
        if abs(quad) <= 1e-12 * scale:
            return float(self.c + self.b @ d / lin)
        return float("inf") if quad > 0 else float("-inf")


@dataclass(frozen=True)
class MinimizeOptions:
    tol: float = 1e-9
    max_iters: int = 20000
    n_random: int = 8
    seed: int = 0


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    value: float
    converged: bool
    unbounded: bool
    kkt_residual: float
    iterations: int
    infimum: float
    starts: int = field(default=0)


def projected_gradient_norm(form: RationalQuadratic, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - np.maximum(x - form.gradient(x), 0.0)))


def _pg_run(form: RationalQuadratic, x0: np.ndarray, opts: MinimizeOptions, x_cap: float):
    x = np.maximum(np.asarray(x0, dtype=float), 0.0)
    f = form.value(x)
    g = form.gradient(x)
    step = 1.0
    it = 0
    for it in range(1, opts.max_iters + 1):
        if np.linalg.norm(x - np.maximum(x - g, 0.0)) <= opts.tol:
            break
        while True:
            x_new = np.maximum(x - step * g, 0.0)
            if form.r0 + x_new.sum() <= 0.0:
                step *= 0.5
                continue
            f_new = form.value(x_new)
            if f_new <= f + ARMIJO * float(g @ (x_new - x)) or step < 1e-20:
                break
            step *= 0.5
        s = x_new - x
        g_new = form.gradient(x_new)
        y = g_new - g
        sy = float(s @ y)
        # Barzilai-Borwein guess for the next trial step
        step = float(s @ s) / sy if sy > 0 else step * 2.0
        step = min(max(step, 1e-12), 1e12)
        x, f, g = x_new, f_new, g_new
        if np.max(x) > x_cap:
            break
    return x, it


def _newton_polish(form: RationalQuadratic, x: np.ndarray, tol: float, rounds: int = 30) -> np.ndarray:
    f = form.value(x)
    for _ in range(rounds):
        g = form.gradient(x)
        pg = np.linalg.norm(x - np.maximum(x - g, 0.0))
        if pg <= tol * 1e-3:
            break
        free = (x > 0) | (g < 0)
        if not free.any():
            break
        H = form.hessian(x)[np.ix_(free, free)]
        try:
            np.linalg.cholesky(H)
            d_free = -np.linalg.solve(H, g[free])
        except np.linalg.LinAlgError:
            break
        d = np.zeros_like(x)
        d[free] = d_free
        t = 1.0
        improved = False
        for _ in range(30):
            x_new = np.maximum(x + t * d, 0.0)
            if form.r0 + x_new.sum() > 0:
                f_new = form.value(x_new)
                pg_new = np.linalg.norm(x_new - np.maximum(x_new - form.gradient(x_new), 0.0))
                if f_new < f or (f_new <= f + 1e-15 * max(1.0, abs(f)) and pg_new < pg):
                    improved = True
                    break
            t *= 0.5
        if not improved:
            break
        x, f = x_new, f_new
    return x


def starting_points(form: RationalQuadratic, opts: MinimizeOptions) -> list[np.ndarray]:
    n = form.n
    scale = form.r0 if form.r0 > 0 else 1.0
    pts = [np.zeros(n)] if form.r0 > 0 else [np.full(n, 1e-3 * scale)]
    pts += [scale * e for e in np.eye(n)]
    pts.append(np.full(n, scale))
    rng = np.random.default_rng(opts.seed)
    pts += list(rng.uniform(0.0, 5.0 * scale, size=(opts.n_random, n)))
    return pts


def _detect_ray(form: RationalQuadratic, x: np.ndarray, tol: float) -> bool:
    if not np.any(x > 0):
        return False
    prev = form.value(x)
    for k in (10.0, 100.0, 1000.0):
        cur = form.value(k * x)
        if not prev - cur >= tol:
            return False
        prev = cur
    return True


def minimize(form: RationalQuadratic, opts: MinimizeOptions | None = None) -> MinimizeResult:
    """Minimise ``form`` over the nonnegative orthant from several starts.

    The best local result wins; objective values within ``1e-12`` relative are
    treated as ties and broken by the lexicographically smallest point, so
    the outcome is deterministic for fixed ``opts``.
    """
    opts = opts or MinimizeOptions()
    scale = form.r0 if form.r0 > 0 else 1.0
    x_cap = 1e8 * (scale + 1.0)
    results = []
    total_iters = 0
    starts = starting_points(form, opts)
    for x0 in starts:
        x, it = _pg_run(form, x0, opts, x_cap)
        total_iters += it
        x = _newton_polish(form, x, opts.tol)
        results.append((form.value(x), x))

    best_val, best_x = results[0]
    for val, x in results[1:]:
        tie = abs(val - best_val) <= 1e-12 * max(1.0, abs(best_val))
        if (not tie and val < best_val) or (tie and tuple(x) < tuple(best_x)):
            best_val, best_x = val, x

    kkt = projected_gradient_norm(form, best_x)
    unbounded = _detect_ray(form, best_x, opts.tol) or bool(np.max(best_x) > x_cap)
    infimum = best_val
    if unbounded:
        lim = form.ray_limit(best_x)
        infimum = min(best_val, lim) if np.isfinite(lim) else form.value(1000.0 * best_x)
    return MinimizeResult(
        x=best_x,
        value=best_val,
        converged=bool(kkt <= opts.tol) or unbounded,
        unbounded=unbounded,
        kkt_residual=kkt,
        iterations=total_iters,
        infimum=infimum,
        starts=len(starts),
    )
