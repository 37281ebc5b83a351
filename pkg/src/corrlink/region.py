"""Closed-form throughput region of the two-user correlated interference network."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationParams


def beta(p: float, rho_tx: float) -> float:
    return 1.0 + (1.0 - rho_tx) * (1.0 - p)


def p_rx_00(p: float, rho_rx: float) -> float:
    """Probability that both links entering a receiver are off."""
    val = 1.0 + p * p + p * (1.0 - p) * rho_rx - 2.0 * p
    assert -1e-12 <= val <= 1.0 + 1e-12, f"p_rx_00 out of range: {val}"
    return val


@dataclass(frozen=True)
class Region:
    individual_cap: float
    beta: float
    rhs: float
    vertices: tuple[tuple[float, float], ...]

    def halfplanes(self) -> list[tuple[float, float, float]]:
        """Constraints as (a, b, c) meaning a*R1 + b*R2 <= c."""
        return [
            (-1.0, 0.0, 0.0),
            (0.0, -1.0, 0.0),
            (1.0, 0.0, self.individual_cap),
            (0.0, 1.0, self.individual_cap),
            (1.0, self.beta, self.rhs),
            (self.beta, 1.0, self.rhs),
        ]

    def pareto_vertices(self) -> list[tuple[float, float]]:
        """Vertices on the outer boundary, from (0, p) to (p, 0)."""
        out = [v for v in self.vertices if v != (0.0, 0.0)]
        return sorted(out, key=lambda v: (v[0], -v[1]))


def _vertices(cap: float, b: float, rhs: float) -> tuple[tuple[float, float], ...]:
    planes = [
        (-1.0, 0.0, 0.0),
        (0.0, -1.0, 0.0),
        (1.0, 0.0, cap),
        (0.0, 1.0, cap),
        (1.0, b, rhs),
        (b, 1.0, rhs),
    ]
    pts = []
    for (a1, b1, c1), (a2, b2, c2) in itertools.combinations(planes, 2):
        det = a1 * b2 - a2 * b1
        if abs(det) < 1e-15:
            continue
        x = (c1 * b2 - c2 * b1) / det
        y = (a1 * c2 - a2 * c1) / det
        if all(a * x + bb * y <= c + 1e-12 for a, bb, c in planes):
            x = 0.0 if abs(x) < 1e-15 else x
            y = 0.0 if abs(y) < 1e-15 else y
            if not any(abs(x - u) < 1e-12 and abs(y - v) < 1e-12 for u, v in pts):
                pts.append((x, y))
    if len(pts) <= 1:
        return tuple(pts) or ((0.0, 0.0),)
    cx = sum(x for x, _ in pts) / len(pts)
    cy = sum(y for _, y in pts) / len(pts)
    pts.sort(key=lambda v: math.atan2(v[1] - cy, v[0] - cx))
    start = pts.index((0.0, 0.0)) if (0.0, 0.0) in pts else 0
    return tuple(pts[start:] + pts[:start])


def region(params: CorrelationParams) -> Region:
    b = beta(params.p, params.rho_tx)
    rhs = b * (1.0 - p_rx_00(params.p, params.rho_rx))
    cap = params.p
    return Region(individual_cap=cap, beta=b, rhs=rhs, vertices=_vertices(cap, b, rhs))


def max_symmetric_sum_rate(params: CorrelationParams) -> float:
    b = beta(params.p, params.rho_tx)
    rhs = b * (1.0 - p_rx_00(params.p, params.rho_rx))
    return min(2.0 * params.p, 2.0 * rhs / (1.0 + b))


def contains(reg: Region, r1: float, r2: float, tol: float = 1e-12) -> bool:
    return all(a * r1 + b * r2 <= c + tol for a, b, c in reg.halfplanes())


def export_boundary(reg: Region, resolution: int) -> list[tuple[float, float]]:
    """Outer boundary polyline from (0, p) to (p, 0).

    Points are spaced evenly by arc length; every corner of the region is kept
    so the polyline is exact.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    corners = reg.pareto_vertices()
    if len(corners) < 2:
        return [corners[0]] * 2 if corners else [(0.0, 0.0)] * 2
    pts = np.array(corners)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, cum[-1], resolution)
    xs = np.interp(s, cum, pts[:, 0])
    ys = np.interp(s, cum, pts[:, 1])
    sampled = [
        (float(x), float(y))
        for x, y in zip(xs, ys)
        if min(abs(x - u) + abs(y - v) for u, v in corners) > 1e-12
    ]
    return sorted(corners + sampled, key=lambda v: (v[0], -v[1]))
