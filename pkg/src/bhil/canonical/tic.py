"""
Traveltime injectivity checks: the left projection must be an immersion and
globally injective.

Injectivity is searched two ways. Quantised left images are hashed into
buckets built per worker partition and merged in partition order; any bucket
holding two distinct scattering points is a collision candidate. A multi-start
Gauss-Newton search then solves piL(s, r, y~, omega) = piL(s, r, y, omega) for
y~ from random starts, which finds mirror witnesses that random sampling never
hits exactly.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..core.geometry import DenseArray
from ..raytrace.traveltime import TableSet
from ..utils.parallel import ordered_map
from .relations import SampleSpec, analytic_jacobians, n_source_params, point_from_params

logger = logging.getLogger(__name__)


class ConstantKinematics:
    """Closed-form left images for constant speed, vectorised over rows of Q."""

    def __init__(self, spec: SampleSpec) -> None:
        self.kind = spec.kind
        self.c = spec.c
        self.s0 = spec.s0
        self.k = n_source_params(spec.kind)

    def _geometry(self, Q: np.ndarray) -> tuple[np.ndarray, ...]:
        k = self.k
        n = Q.shape[0]
        zero = np.zeros(n)
        if self.kind == "dense":
            S = np.column_stack([Q[:, 0], Q[:, 1], zero])
            dS = np.broadcast_to(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]), (n, 3, 2))
        elif self.kind == "crosswell":
            S = np.column_stack([np.full(n, self.s0), zero, Q[:, 0]])
            dS = np.broadcast_to(np.array([[0.0], [0.0], [1.0]]), (n, 3, 1))
        else:
            S = np.column_stack([Q[:, 0], zero, zero])
            dS = np.broadcast_to(np.array([[1.0], [0.0], [0.0]]), (n, 3, 1))
        R = np.column_stack([zero, zero, Q[:, k]])
        y = Q[:, k + 1 : k + 4]
        A = np.linalg.norm(y - S, axis=1)
        B = np.linalg.norm(y - R, axis=1)
        u = (y - S) / A[:, None]
        v = (y - R) / B[:, None]
        return u, v, A, B, dS

    def left(self, Q: np.ndarray) -> np.ndarray:
        """(s, r, t, sigma, rho, tau) rows."""
        k = self.k
        u, v, A, B, dS = self._geometry(Q)
        omega = Q[:, -1]
        t = (A + B) / self.c
        sigma = omega[:, None] * np.einsum("ni,nik->nk", u, dS) / self.c
        rho = omega * v[:, 2] / self.c
        return np.column_stack([Q[:, : k + 1], t, sigma, rho, omega])

    def jacobian_y(self, Q: np.ndarray) -> np.ndarray:
        """d(t, sigma, rho) / dy, shape (n, k + 2, 3)."""
        u, v, A, B, dS = self._geometry(Q)
        omega = Q[:, -1]
        eye = np.eye(3)
        Pu = eye - np.einsum("ni,nj->nij", u, u)
        Pv = eye - np.einsum("ni,nj->nij", v, v)
        rows = [(u + v) / self.c]
        for a in range(self.k):
            rows.append(omega[:, None] * np.einsum("nij,nj->ni", Pu, dS[:, :, a]) / (A[:, None] * self.c))
        rows.append(omega[:, None] * Pv[:, :, 2] / (B[:, None] * self.c))
        return np.stack(rows, axis=1)

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        return analytic_jacobians(point_from_params(self.kind, q, self.c, self.s0))[0]


class TableKinematics:
    """
    Dense-array left images from traveltime tables.

    t(s, r, y) is the sum of the source and receiver tables, interpolated
    linearly across stations and cells; sigma and rho come from differences
    across neighbouring station tables.
    """

    def __init__(self, tables: TableSet, geometry: DenseArray, step: float | None = None) -> None:
        self.kind = "dense"
        self.k = 2
        spec = tables.spec
        axes = tuple(spec.axis(i) for i in range(3))
        src = geometry.source_positions()
        s1 = np.unique(src[:, 0])
        s2 = np.unique(src[:, 1])
        ts = np.stack([t.times for t in tables.sources]).reshape((s2.size, s1.size) + spec.dims)
        tr = np.stack([t.times for t in tables.receivers])
        r = geometry.receivers.samples()
        self._ts = RegularGridInterpolator((s2, s1) + axes, ts, bounds_error=False, fill_value=np.nan)
        self._tr = RegularGridInterpolator((r,) + axes, tr, bounds_error=False, fill_value=np.nan)
        self.step = step or 0.5 * min(s1[1] - s1[0] if s1.size > 1 else 1.0, r[1] - r[0] if r.size > 1 else 1.0)

    def traveltime(self, Q: np.ndarray) -> np.ndarray:
        y = Q[:, 3:6]
        a = self._ts(np.column_stack([Q[:, 1], Q[:, 0], y]))
        b = self._tr(np.column_stack([Q[:, 2:3], y]))
        return a + b

    def left(self, Q: np.ndarray) -> np.ndarray:
        h = self.step
        grads = []
        for j in range(3):
            Qp, Qm = Q.copy(), Q.copy()
            Qp[:, j] += h
            Qm[:, j] -= h
            grads.append((self.traveltime(Qp) - self.traveltime(Qm)) / (2 * h))
        omega = Q[:, -1]
        t = self.traveltime(Q)
        return np.column_stack([Q[:, :3], t, -omega * grads[0], -omega * grads[1], -omega * grads[2], omega])

    def jacobian_y(self, Q: np.ndarray) -> np.ndarray:
        h = self.step
        cols = []
        for j in range(3, 6):
            Qp, Qm = Q.copy(), Q.copy()
            Qp[:, j] += h
            Qm[:, j] -= h
            cols.append((self.left(Qp)[:, 3:7] - self.left(Qm)[:, 3:7]) / (2 * h))
        return np.stack(cols, axis=-1)

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        h = self.step
        cols = []
        for j in range(q.size):
            qp, qm = q.copy(), q.copy()
            qp[j] += h
            qm[j] -= h
            cols.append((self.left(qp[None])[0] - self.left(qm[None])[0]) / (2 * h))
        return np.column_stack(cols)


@dataclass
class TICReport:
    kind: str
    n_samples: int
    immersion_min_sigma: float
    immersion_pass: bool
    collisions: list[dict[str, Any]] = field(default_factory=list)
    witnesses: list[dict[str, Any]] = field(default_factory=list)
    refined: int = 0

    @property
    def injective_pass(self) -> bool:
        return not self.collisions and not self.witnesses

    @property
    def passed(self) -> bool:
        return self.immersion_pass and self.injective_pass

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "n_samples": self.n_samples,
            "immersion": {"min_relative_sigma": self.immersion_min_sigma, "pass": self.immersion_pass},
            "injectivity": {
                "pass": self.injective_pass,
                "collisions": self.collisions,
                "witnesses": self.witnesses[:20],
                "n_witnesses": len(self.witnesses),
                "refined_points": self.refined,
            },
            "pass": self.passed,
        }


def _bucket_keys(L: np.ndarray, cell: np.ndarray) -> list[tuple[int, ...]]:
    return [tuple(row) for row in np.floor(L / cell).astype(np.int64)]


def _partition_buckets(args: tuple[np.ndarray, np.ndarray, int]) -> dict[tuple[int, ...], list[int]]:
    L, cell, offset = args
    buckets: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for i, key in enumerate(_bucket_keys(L, cell)):
        buckets[key].append(offset + i)
    return buckets


def hash_collisions(
    Q: np.ndarray, L: np.ndarray, k: int, quant: float, min_separation: float, workers: int | None = None
) -> list[dict[str, Any]]:
    """Distinct scattering points whose quantised left images share a bucket."""
    scale = np.maximum(np.ptp(L, axis=0), 1e-12)
    cell = quant * scale
    chunks = np.array_split(np.arange(len(L)), max(1, workers or 1))
    parts = ordered_map(_partition_buckets, [(L[c], cell, int(c[0]) if c.size else 0) for c in chunks], workers)
    merged: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for part in parts:
        for key, idx in part.items():
            merged[key].extend(idx)
    collisions = []
    for key in sorted(merged):
        idx = merged[key]
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                i, j = idx[a], idx[b]
                dy = np.linalg.norm(Q[i, k + 1 : k + 4] - Q[j, k + 1 : k + 4])
                if dy > min_separation and np.all(np.abs(L[i] - L[j]) <= cell):
                    collisions.append({"y": Q[i, k + 1 : k + 4].tolist(), "y_other": Q[j, k + 1 : k + 4].tolist()})
    return collisions


def refine_witnesses(
    kin: ConstantKinematics | TableKinematics,
    spec: SampleSpec,
    Q: np.ndarray,
    rng: np.random.Generator,
    n_starts: int = 8,
    max_iter: int = 40,
    min_separation: float = 1e-3,
    tol: float = 1e-9,
) -> list[dict[str, Any]]:
    """
    Damped Gauss-Newton search for y~ != y with the same left image.

    All starts of one target point are iterated together.
    """
    k = kin.k
    witnesses = []
    lo, hi = np.asarray(spec.y_lo), np.asarray(spec.y_hi)
    for q in Q:
        target = kin.left(q[None])[0, k + 1 :]
        Z = np.repeat(q[None], n_starts, axis=0)
        Z[:, k + 1 : k + 4] = rng.uniform(lo, hi, (n_starts, 3))
        lam = np.ones(n_starts)
        res = np.linalg.norm(kin.left(Z)[:, k + 1 :] - target, axis=1)
        for _ in range(max_iter):
            F = kin.left(Z)[:, k + 1 : k + 1 + k + 2] - target[: k + 2]
            J = kin.jacobian_y(Z)
            step = np.stack([np.linalg.lstsq(J[i], F[i], rcond=None)[0] for i in range(n_starts)])
            trial = Z.copy()
            trial[:, k + 1 : k + 4] -= lam[:, None] * step
            trial[:, k + 3] = np.maximum(trial[:, k + 3], 1e-3)
            new = np.linalg.norm(kin.left(trial)[:, k + 1 :] - target, axis=1)
            better = np.isfinite(new) & (new < res)
            Z[better] = trial[better]
            res[better] = new[better]
            lam = np.where(better, np.minimum(1.0, 2 * lam), 0.5 * lam)
            if np.all((res < tol * max(1.0, np.linalg.norm(target))) | (lam < 1e-8)):
                break
        y = q[k + 1 : k + 4]
        for i in range(n_starts):
            y_other = Z[i, k + 1 : k + 4]
            if res[i] < tol * max(1.0, np.linalg.norm(target)) and np.linalg.norm(y_other - y) > min_separation:
                witnesses.append({"y": y.tolist(), "y_other": y_other.tolist(), "residual": float(res[i])})
                break
    return witnesses


def check_tic(
    spec: SampleSpec,
    n: int,
    rng: np.random.Generator,
    kinematics: ConstantKinematics | TableKinematics | None = None,
    quant: float = 1e-5,
    immersion_tol: float = 1e-6,
    n_refine: int = 100,
    workers: int | None = None,
) -> TICReport:
    """
    Sample the relation and test immersion and injectivity of the left projection.

    Args:
        spec: Parameter ranges and geometry kind
        n: Number of admissible samples
        rng: Random generator (seeded by the caller)
        kinematics: Constant-speed closed forms (default) or table kinematics
        quant: Relative bucket size for the hash search
        immersion_tol: Minimum relative singular value of the left Jacobian
        n_refine: Samples used as targets for the Gauss-Newton witness search
        workers: Partition count for the bucket search

    Returns:
        TICReport with witnesses of any failure
    """
    kin = kinematics or ConstantKinematics(spec)
    k = kin.k
    Q = spec.sample(rng, n)
    L = kin.left(Q)
    finite = np.all(np.isfinite(L), axis=1)
    if not np.all(finite):
        logger.warning(f"{int((~finite).sum())} samples fall outside the traveltime tables and are skipped")
        Q, L = Q[finite], L[finite]

    Js = np.stack([kin.jacobian(q) for q in Q])
    sv = np.linalg.svd(Js, compute_uv=False)
    rel = sv[:, -1] / sv[:, 0]
    min_sigma = float(rel.min()) if rel.size else 0.0

    scale = float(np.max(np.abs(Q[:, k + 1 : k + 4]))) if len(Q) else 1.0
    collisions = hash_collisions(Q, L, k, quant, 1e-3 * scale, workers)
    targets = Q[: min(n_refine, len(Q))]
    witnesses = refine_witnesses(kin, spec, targets, rng, min_separation=1e-3 * scale)
    report = TICReport(
        kind=spec.kind,
        n_samples=int(len(Q)),
        immersion_min_sigma=min_sigma,
        immersion_pass=min_sigma > immersion_tol,
        collisions=collisions,
        witnesses=witnesses,
        refined=int(len(targets)),
    )
    logger.info(
        f"TIC {spec.kind}: immersion {'pass' if report.immersion_pass else 'fail'} "
        f"(min sigma {min_sigma:.3g}), {len(collisions)} collisions, {len(witnesses)} witnesses"
    )
    return report
