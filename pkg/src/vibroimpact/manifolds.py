"""Invariant manifolds and the disk-return picture near grazing.

Near a grazing family the period-map Jacobian has one huge eigenvalue
(~ 1/Y) and one tiny one (~ Y), with everything else order one: the spectral
split selects those dominant directions and the near-neutral central block.
The one-dimensional unstable manifold is grown by iterating a fundamental
domain on the eigvector with adaptive parameter refinement; it bends where
it crosses the grazing separatrix (detected by an impact-count change in the
underlying trajectories). A transversal crossing of the (affine tangent
approximation of the) central-stable manifold away from the fixed point is
the non-hyperbolic homoclinic point, and the disk-return check pushes a
coarse admissible-disk grid through the period map to verify that disks
anchored at the fixed point and at the homoclinic point return admissible
sub-disks in both target boxes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShootingError, SpectralSplitError
from .integrate import DEFAULT_CONFIG, IntegratorConfig
from .model import VibroImpactSystem, as_state_vector
from .variational import poincare_jacobian, poincare_trajectory

__all__ = [
    "SpectralSplit",
    "ManifoldPolyline",
    "HomoclinicCrossing",
    "DiskReturnReport",
    "PoincareMapper",
    "spectral_split",
    "trace_manifold_map",
    "trace_manifold",
    "detect_homoclinic_bend",
    "verify_disk_return",
]


# ---------------------------------------------------------------------------
# spectral splitting

def _real_basis(vectors: list[np.ndarray]) -> np.ndarray:
    """Real orthonormal basis spanning possibly-complex eigvector columns."""
    cols = []
    for v in vectors:
        if np.iscomplexobj(v) and np.abs(v.imag).max() > 1e-12 * np.abs(v).max():
            cols.append(v.real)
            cols.append(v.imag)
        else:
            cols.append(np.real(v))
    M = np.column_stack(cols)
    Q, _ = np.linalg.qr(M)
    return Q[:, : np.linalg.matrix_rank(M, tol=1e-10)]


def _unit_real(v: np.ndarray) -> np.ndarray:
    v = np.real(v)
    v = v / np.linalg.norm(v)
    i = int(np.argmax(np.abs(v)))
    return v if v[i] > 0 else -v


@dataclass(frozen=True)
class SpectralSplit:
    """Eigen-split of a period-map Jacobian into unstable / stable / central
    subspaces with the dominance gap bounds.

    ``gap_dominant`` = min(|lam_max|, 1/|lam_min|)/2 and ``gap_central`` =
    2 max over the middle spectrum of max(|lam|, 1/|lam|); the split is
    valid only when gap_dominant > gap_central.
    """

    eigenvalues: np.ndarray     # sorted by |.| descending
    unstable: np.ndarray        # basis columns
    stable: np.ndarray
    central: np.ndarray
    gap_dominant: float
    gap_central: float

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.unstable.shape[1], self.stable.shape[1], self.central.shape[1])


def spectral_split(D: np.ndarray, require_gap: bool = True) -> SpectralSplit:
    """Split the spectrum of D by magnitude into dominant expanding /
    contracting directions and the near-neutral central block."""
    D = np.asarray(D, dtype=float)
    if abs(np.linalg.det(D)) < 1e-300:
        raise SpectralSplitError("Jacobian is singular")
    w, V = np.linalg.eig(D)
    order = np.argsort(-np.abs(w))
    w, V = w[order], V[:, order]
    mags = np.abs(w)
    if D.shape[0] > 2:
        middle = mags[1:-1]
        gap_c = 2.0 * float(np.max(np.maximum(middle, 1.0 / middle)))
    else:
        gap_c = 1.0
    gap_d = float(min(mags[0], 1.0 / mags[-1]) / 2.0)
    if require_gap and gap_d <= gap_c:
        raise SpectralSplitError(
            f"no spectral gap: dominant bound {gap_d:.3g} <= central bound {gap_c:.3g}")

    unstable = [V[:, i] for i in range(len(w)) if mags[i] >= gap_d]
    stable = [V[:, i] for i in range(len(w)) if mags[i] <= 1.0 / gap_d]
    central = [V[:, i] for i in range(len(w))
               if 1.0 / gap_d < mags[i] < gap_d]
    return SpectralSplit(
        eigenvalues=w,
        unstable=_real_basis(unstable) if unstable else np.empty((D.shape[0], 0)),
        stable=_real_basis(stable) if stable else np.empty((D.shape[0], 0)),
        central=_real_basis(central) if central else np.empty((D.shape[0], 0)),
        gap_dominant=gap_d,
        gap_central=gap_c,
    )


# ---------------------------------------------------------------------------
# the period map as a plain callable

class PoincareMapper:
    """Callable period map z -> S(z) for one system at fixed (mu, theta),
    anchored at a reference impact phase. Also exposes the reflection count
    of the one-period trajectory, which changes exactly when the state
    crosses the grazing separatrix."""

    def __init__(self, system: VibroImpactSystem, mu: float, theta: float,
                 t_ref: float = 0.0, config: IntegratorConfig = DEFAULT_CONFIG):
        self.system = system
        self.mu = mu
        self.theta = theta
        self.t_ref = t_ref
        self.config = config
        self.evals = 0

    def __call__(self, z: np.ndarray) -> np.ndarray:
        self.evals += 1
        traj = poincare_trajectory(self.system, self.mu, self.theta, z,
                                   self.config, t_ref=self.t_ref,
                                   check_section=False)
        return np.array(traj.end_state().z)

    def with_count(self, z: np.ndarray) -> tuple[np.ndarray, int]:
        self.evals += 1
        traj = poincare_trajectory(self.system, self.mu, self.theta, z,
                                   self.config, t_ref=self.t_ref,
                                   check_section=False)
        return np.array(traj.end_state().z), traj.reflection_count()

    def count_impacts(self, z: np.ndarray) -> int:
        return self.with_count(z)[1]

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        return poincare_jacobian(self.system, self.mu, self.theta, z,
                                 self.config, t_ref=self.t_ref).D

    def inverse(self, target: np.ndarray, guess: np.ndarray,
                tol: float = 1e-10, max_iter: int = 25) -> np.ndarray:
        """Newton solve S(z) = target (the hybrid flow is not reversed
        through impacts directly)."""
        z = np.array(guess, dtype=float)
        for _ in range(max_iter):
            R = self(z) - target
            if np.linalg.norm(R) < tol:
                return z
            J = self.jacobian(z)
            z = z - np.linalg.solve(J, R)
        raise ShootingError("inverse period-map Newton did not converge")


# ---------------------------------------------------------------------------
# 1-D manifold tracing for maps

@dataclass(frozen=True)
class ManifoldPolyline:
    """Ordered polyline approximation of a one-dimensional invariant
    manifold of a map, with turning-angle kinks and (when computed) the
    impact count of each point's one-period trajectory."""

    points: np.ndarray          # (N, d)
    arclengths: np.ndarray      # (N,) cumulative
    kink_indices: tuple         # turning angle above threshold
    turning_angles: np.ndarray  # (N,) angle at each interior vertex (rad)
    impact_counts: np.ndarray | None = None
    separatrix_crossings: tuple = ()

    @property
    def length(self) -> float:
        return float(self.arclengths[-1]) if self.arclengths.size else 0.0


class _SeedCache:
    """Points of the k-th image of the fundamental-domain parametrization,
    computed on demand and reused across refinements."""

    def __init__(self, map_fn, seed_fn):
        self.map_fn = map_fn
        self.seed_fn = seed_fn
        self.cache: dict[tuple[int, float], np.ndarray] = {}

    def point(self, level: int, s: float) -> np.ndarray:
        key = (level, s)
        if key not in self.cache:
            if level == 0:
                self.cache[key] = self.seed_fn(s)
            else:
                self.cache[key] = self.map_fn(self.point(level - 1, s))
        return self.cache[key]


def trace_manifold_map(map_fn, fixed_point, eigval: float, eigvec,
                       arclength_budget: float, delta_seed: float = 1e-7,
                       h_max: float | None = None, n_seed: int = 16,
                       kink_angle: float = np.pi / 6, s_min: float = 1e-10,
                       max_points: int = 20000, max_levels: int = 40) -> ManifoldPolyline:
    """Grow a 1-D manifold of a map from a fixed point along an eigvector.

    The fundamental domain [delta, |Lambda| delta] on the eigvector is
    parametrized geometrically and its iterates are refined adaptively so
    consecutive image points stay within ``h_max``; for a negative
    eigenvalue the second-iterate map is used (one branch per seed sign).
    Refinement stops at parameter resolution ``s_min``, which is what a
    genuine corner (a separatrix crossing) looks like; those vertices are
    reported in ``kink_indices``.
    """
    z_fix = np.asarray(fixed_point, dtype=float)
    u = np.asarray(eigvec, dtype=float)
    u = u / np.linalg.norm(u)
    lam = float(eigval)
    if abs(lam) <= 1.0:
        raise ValueError("tracing needs an expanding eigenvalue (|lambda| > 1)")
    if lam > 0:
        step_map, Lam = map_fn, lam
    else:
        step_map, Lam = (lambda z: map_fn(map_fn(z))), lam * lam
    if h_max is None:
        h_max = arclength_budget / 400.0

    seeds = _SeedCache(step_map, lambda s: z_fix + delta_seed * Lam ** s * u)
    pts: list[np.ndarray] = []
    total = 0.0

    def emit(p):
        nonlocal total
        if pts:
            total += float(np.linalg.norm(p - pts[-1]))
        pts.append(p)

    level = 0
    while total < arclength_budget and level < max_levels and len(pts) < max_points:
        params = list(np.linspace(0.0, 1.0, n_seed, endpoint=False))
        i = 0
        while i < len(params) and len(pts) < max_points:
            s = params[i]
            p = seeds.point(level, s)
            s_next = params[i + 1] if i + 1 < len(params) else 1.0
            p_next = seeds.point(level, s_next) if s_next < 1.0 else seeds.point(level + 1, 0.0)
            if np.linalg.norm(p_next - p) > h_max and (s_next - s) > s_min:
                params.insert(i + 1, 0.5 * (s + s_next))
                continue
            emit(p)
            i += 1
            if total >= arclength_budget:
                break
        level += 1

    P = np.array(pts)
    angles = np.zeros(len(P))
    for i in range(1, len(P) - 1):
        a = P[i] - P[i - 1]
        b = P[i + 1] - P[i]
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na > 0 and nb > 0:
            c = np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)
            angles[i] = np.arccos(c)
    kinks = tuple(int(i) for i in np.flatnonzero(angles > kink_angle))
    seglen = np.linalg.norm(np.diff(P, axis=0), axis=1) if len(P) > 1 else np.empty(0)
    arcl = np.concatenate(([0.0], np.cumsum(seglen)))
    return ManifoldPolyline(points=P, arclengths=arcl, kink_indices=kinks,
                            turning_angles=angles)


def trace_manifold(system: VibroImpactSystem, mu: float, theta: float, fixed_point,
                   direction: str = "unstable", arclength_budget: float = 1.0,
                   t_ref: float = 0.0, delta_seed: float = 1e-7,
                   h_max: float | None = None, split: SpectralSplit | None = None,
                   config: IntegratorConfig = DEFAULT_CONFIG,
                   mark_separatrix: bool = True, **kwargs) -> ManifoldPolyline:
    """Trace the 1-D unstable or stable manifold of the period map at a
    fixed point.

    The stable direction is traced as the unstable manifold of the inverse
    map, each inverse evaluation being a Newton solve on the forward map.
    With ``mark_separatrix`` every polyline vertex gets the reflection count
    of its one-period trajectory; indices where the count changes are the
    separatrix crossings (the bend locations).
    """
    z_fix = as_state_vector(fixed_point, system.n)
    mapper = PoincareMapper(system, mu, theta, t_ref, config)
    if split is None:
        split = spectral_split(mapper.jacobian(z_fix))
    if direction == "unstable":
        if split.unstable.shape[1] != 1:
            raise SpectralSplitError("unstable space is not one-dimensional")
        lam = float(np.real(split.eigenvalues[0]))
        vec = split.unstable[:, 0]
        fn = mapper
    elif direction == "stable":
        if split.stable.shape[1] != 1:
            raise SpectralSplitError("stable space is not one-dimensional")
        lam_s = float(np.real(split.eigenvalues[-1]))
        lam = 1.0 / lam_s
        vec = split.stable[:, 0]
        prev = [z_fix.copy()]

        def fn(z):
            w = mapper.inverse(z, guess=prev[0])
            prev[0] = w
            return w
    else:
        raise ValueError("direction must be 'unstable' or 'stable'")

    poly = trace_manifold_map(fn, z_fix, lam, vec, arclength_budget,
                              delta_seed=delta_seed, h_max=h_max, **kwargs)
    if not mark_separatrix:
        return poly
    counts = np.array([mapper.count_impacts(p) for p in poly.points])
    crossings = tuple(int(i) for i in np.flatnonzero(np.diff(counts) != 0))
    return ManifoldPolyline(points=poly.points, arclengths=poly.arclengths,
                            kink_indices=poly.kink_indices,
                            turning_angles=poly.turning_angles,
                            impact_counts=counts, separatrix_crossings=crossings)


# ---------------------------------------------------------------------------
# the bend at the separatrix crossing

@dataclass(frozen=True)
class KinkMeasurement:
    """One-sided geometry of the manifold corner at the image of a
    separatrix crossing: the period map is non-differentiable on the
    separatrix, so the image of a crossing point is a genuine corner of the
    manifold."""

    crossing: np.ndarray      # the located crossing point q on the separatrix
    image: np.ndarray         # S(q), where the corner sits
    d_pre: np.ndarray         # one-sided direction arriving at the corner
    d_post: np.ndarray        # one-sided direction leaving the corner
    angle: float              # turning angle at the corner (rad)


def locate_separatrix_crossing(mapper: PoincareMapper, p_a, p_b,
                               bisections: int = 48) -> tuple[np.ndarray, float]:
    """Bisect the impact-count change along the segment [p_a, p_b]; returns
    (crossing point, parameter in [0, 1])."""
    p_a = np.asarray(p_a, dtype=float)
    p_b = np.asarray(p_b, dtype=float)
    c_a = mapper.count_impacts(p_a)
    c_b = mapper.count_impacts(p_b)
    if c_a == c_b:
        raise ValueError("segment endpoints have equal impact counts")
    lo, hi = 0.0, 1.0
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        c_m = mapper.count_impacts((1 - mid) * p_a + mid * p_b)
        if c_m == c_a:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    return (1 - w) * p_a + w * p_b, w


def measure_kink(mapper: PoincareMapper, polyline: ManifoldPolyline,
                 crossing_index: int, probe_frac: float = 0.2) -> KinkMeasurement:
    """Measure the manifold corner produced by the separatrix crossing at
    ``polyline.separatrix_crossings[...] == crossing_index``.

    The crossing q is located by bisection inside the flagged segment; the
    one-sided directions at S(q) come from mapping probe points a fraction
    of the segment on each side of q.
    """
    i = crossing_index
    p_a, p_b = polyline.points[i], polyline.points[i + 1]
    q, w = locate_separatrix_crossing(mapper, p_a, p_b)
    seg = p_b - p_a
    dw = probe_frac * min(w, 1.0 - w)
    q_minus = q - dw * seg
    q_plus = q + dw * seg
    img, img_m, img_p = mapper(q), mapper(q_minus), mapper(q_plus)
    d_pre = img - img_m
    d_post = img_p - img
    na, nb = np.linalg.norm(d_pre), np.linalg.norm(d_post)
    angle = float(np.arccos(np.clip(d_pre @ d_post / (na * nb), -1.0, 1.0))) \
        if na > 0 and nb > 0 else 0.0
    return KinkMeasurement(crossing=q, image=img, d_pre=d_pre, d_post=d_post,
                           angle=angle)


# ---------------------------------------------------------------------------
# homoclinic bend detection

@dataclass(frozen=True)
class HomoclinicCrossing:
    point: np.ndarray
    index: int              # polyline segment index containing the crossing
    arclength: float
    angle: float            # angle between the polyline and the cs-plane (rad)
    transversal: bool


def detect_homoclinic_bend(polyline: ManifoldPolyline, fixed_point,
                           cs_basis: np.ndarray, angle_min: float = np.deg2rad(2.0),
                           exclude_radius: float = 0.0) -> list[HomoclinicCrossing]:
    """Crossings of a manifold polyline through the affine central-stable
    tangent plane at the fixed point.

    The plane is ``fixed_point + span(cs_basis)``; a crossing is transversal
    when the polyline meets it at an angle above ``angle_min``. Crossings
    within ``exclude_radius`` of the fixed point are the trivial ones at the
    fixed point itself and are dropped.
    """
    z_fix = np.asarray(fixed_point, dtype=float)
    B = np.asarray(cs_basis, dtype=float)
    # normal = left null space of the cs-basis
    U, s, Vt = np.linalg.svd(B, full_matrices=True)
    normal = U[:, -1]
    g = (polyline.points - z_fix) @ normal
    out = []
    for i in range(len(g) - 1):
        if g[i] == 0.0 or g[i] * g[i + 1] >= 0.0:
            continue
        w = g[i] / (g[i] - g[i + 1])
        p = (1 - w) * polyline.points[i] + w * polyline.points[i + 1]
        if np.linalg.norm(p - z_fix) <= exclude_radius:
            continue
        d = polyline.points[i + 1] - polyline.points[i]
        nd = np.linalg.norm(d)
        angle = float(np.arcsin(min(1.0, abs(d @ normal) / nd))) if nd > 0 else 0.0
        arcl = float((1 - w) * polyline.arclengths[i] + w * polyline.arclengths[i + 1])
        out.append(HomoclinicCrossing(point=p, index=i, arclength=arcl,
                                      angle=angle, transversal=angle >= angle_min))
    return out


# ---------------------------------------------------------------------------
# disk-return check

@dataclass(frozen=True)
class AffineFrame:
    """Affine eigenbasis chart: columns ordered (stable, unstable, central...),
    each normalized; coordinates zeta = inv @ (z - origin)."""

    origin: np.ndarray
    basis: np.ndarray
    inv: np.ndarray

    @classmethod
    def from_split(cls, origin, split: SpectralSplit) -> "AffineFrame":
        cols = [_unit_real(split.stable[:, 0]), _unit_real(split.unstable[:, 0])]
        for j in range(split.central.shape[1]):
            cols.append(_unit_real(split.central[:, j]))
        M = np.column_stack(cols)
        return cls(origin=np.asarray(origin, dtype=float), basis=M,
                   inv=np.linalg.inv(M))

    def to_frame(self, z: np.ndarray) -> np.ndarray:
        return self.inv @ (np.asarray(z, dtype=float) - self.origin)

    def to_state(self, zeta: np.ndarray) -> np.ndarray:
        return self.origin + self.basis @ np.asarray(zeta, dtype=float)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in frame coordinates: first coordinate stable,
    second unstable, remaining central (infinity norm)."""

    center: np.ndarray
    half_s: float
    half_u: float
    half_c: float

    def contains(self, zeta: np.ndarray, slack: float = 0.0) -> bool:
        d = zeta - self.center
        return (abs(d[0]) <= self.half_s + slack
                and abs(d[1]) <= self.half_u + slack
                and (d.size <= 2 or np.abs(d[2:]).max() <= self.half_c + slack))


@dataclass(frozen=True)
class DiskReturnReport:
    """Outcome of the disk-return check.

    ``hits[i][j]`` records whether the admissible disk seeded at U_i
    returned a sub-disk crossing V_j admissibly within k iterates;
    ``slope_bound`` is the largest graph slope observed on any accepted
    strand (admissibility demands <= 1), and ``contraction_ratio`` the
    largest observed stable-coordinate contraction factor of one map
    application (the required bound is 1/2).
    """

    boxes: dict
    k: int
    hits: np.ndarray
    slope_bound: float
    contraction_ratio: float
    hits_history: tuple = ()
    strand_counts: dict = field(default_factory=dict)

    @property
    def all_hit(self) -> bool:
        return bool(np.all(self.hits))

    def to_dict(self) -> dict:
        return {
            "boxes": {name: {"center": b.center.tolist(), "half_s": b.half_s,
                             "half_u": b.half_u, "half_c": b.half_c}
                      for name, b in self.boxes.items()},
            "k": self.k,
            "hits": self.hits.tolist(),
            "slope_bound": self.slope_bound,
            "contraction_ratio": self.contraction_ratio,
        }


class _Fiber:
    """One central-coordinate fiber of a seeded disk: a polyline over the
    unstable parameter, pushed through map iterates with adaptive
    insertion of new seed parameters."""

    def __init__(self, seed_fn, params):
        self.seed_fn = seed_fn
        self.params = list(params)          # sorted u-parameters
        self.level = 0
        self.points = [seed_fn(p) for p in self.params]

    def push(self, map_fn):
        self.points = [map_fn(p) for p in self.points]
        self.level += 1

    def refine(self, map_fn, interest_fn, h_cap, max_params=320):
        """Insert seed parameters where the image polyline is both coarse
        and interesting; new points are pushed through all current levels."""
        changed = True
        while changed and len(self.params) < max_params:
            changed = False
            for i in range(len(self.params) - 1):
                a, b = self.points[i], self.points[i + 1]
                if np.linalg.norm(b - a) <= h_cap:
                    continue
                if not (interest_fn(a) or interest_fn(b)):
                    continue
                s_new = 0.5 * (self.params[i] + self.params[i + 1])
                if s_new in (self.params[i], self.params[i + 1]):
                    continue
                p = self.seed_fn(s_new)
                for _ in range(self.level):
                    p = map_fn(p)
                self.params.insert(i + 1, s_new)
                self.points.insert(i + 1, p)
                changed = True
                break


def _strand_hits(frame: AffineFrame, fiber_pts: list, box: Box):
    """Scan one fiber's image polyline for admissible crossings of a box:
    a contiguous run staying inside the stable/central bounds whose
    endpoints bracket the full unstable extent. Returns (found, max_slope)."""
    zs = [frame.to_frame(p) for p in fiber_pts]
    lo, hi = box.center[1] - box.half_u, box.center[1] + box.half_u
    best = None
    run = []
    for zeta in zs + [None]:
        in_sc = zeta is not None \
            and abs(zeta[0] - box.center[0]) <= box.half_s \
            and (zeta.size <= 2 or np.abs(zeta[2:] - box.center[2:]).max() <= box.half_c)
        if in_sc:
            run.append(zeta)
            continue
        if len(run) >= 2:
            us = np.array([z[1] for z in run])
            if us.min() <= lo + 0.02 * box.half_u and us.max() >= hi - 0.02 * box.half_u:
                du = np.diff(us)
                ds = np.diff(np.array([z[0] for z in run]))
                ok = np.abs(du) > 1e-14
                slopes = np.abs(ds[ok] / du[ok])
                slope = float(slopes.max()) if slopes.size else 0.0
                if best is None or slope < best:
                    best = slope
        run = []
    return (best is not None), (best if best is not None else np.inf)


def verify_disk_return(system: VibroImpactSystem, mu: float, theta: float,
                       fixed_point, split: SpectralSplit, homoclinic_point,
                       t_ref: float = 0.0, eps_s: float | None = None,
                       eps_u: float | None = None, eps_c: float | None = None,
                       delta_c: float | None = None, grid: tuple = (9, 9, 9),
                       k_max: int = 20, config: IntegratorConfig | None = None,
                       frame: AffineFrame | None = None, boxes: dict | None = None,
                       stop_at_first: bool = True) -> DiskReturnReport:
    """Push coarse admissible-disk grids through the period map and test the
    disk-return property.

    Flat disks are seeded in a box U0 at the fixed point and a box U1 at
    the homoclinic point, sampled on ``grid`` = (unstable, central...)
    points per axis; each central fiber of a disk is a polyline over the
    unstable parameter that is refined adaptively while it is pushed, since
    the unstable stretching makes a fixed grid unreadable after a few
    iterates. After each iterate every fiber is scanned for an admissible
    strand crossing the target boxes V0 (at the fixed point) and V1 (at the
    homoclinic point); hits[i][j] is set once all central fibers in V_j's
    window carry such a strand with graph slope <= 1. The one-application
    stable-coordinate Lipschitz factor is measured on sampled pairs.
    """
    if config is None:
        config = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)
    z_fix = as_state_vector(fixed_point, system.n)
    mapper = PoincareMapper(system, mu, theta, t_ref, config)
    if frame is None:
        frame = AffineFrame.from_split(z_fix, split)
    q = frame.to_frame(np.asarray(homoclinic_point, dtype=float))
    q = q.copy()
    q[1] = 0.0  # the homoclinic point lies on the central-stable manifold
    q_s = q[0]
    if abs(q_s) < 1e-12:
        raise ValueError("homoclinic point coincides with the fixed point in the frame")

    if eps_s is None:
        eps_s = abs(q_s) / 4.0
    if eps_u is None:
        eps_u = abs(q_s) / 2.0
    if eps_c is None:
        eps_c = abs(q_s) / 2.0
    if delta_c is None:
        delta_c = eps_c / 2.0

    d = z_fix.size
    c_dim = d - 2

    def _corner_min_x1(center, hs, hu, hc):
        m = np.inf
        for signs in np.ndindex(*(2,) * d):
            zeta = center + np.array([hs, hu] + [hc] * c_dim) * (2 * np.array(signs) - 1)
            m = min(m, frame.to_state(zeta)[0])
        return m

    if boxes is None:
        c0 = np.zeros(d)
        # shrink until the fixed-point box sits in the admissible half-space
        # (the section runs close to the delimiter)
        for _ in range(60):
            if _corner_min_x1(c0, eps_s, eps_u, eps_c) >= 0.0:
                break
            eps_s *= 0.8
            eps_u *= 0.8
            eps_c *= 0.8
            delta_c *= 0.8
        else:
            raise ValueError("could not fit the fixed-point box inside the half-space")
        # near grazing the homoclinic point is wall-adjacent along the stable
        # axis; slide the second box center toward the fixed point until its
        # corners are admissible, keeping it disjoint from the first box
        c1 = q.copy()
        lo, hi = 0.0, 1.0
        if _corner_min_x1(c1, eps_s, eps_u, eps_c) < 0.0:
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if _corner_min_x1(q * mid, eps_s, eps_u, eps_c) >= 0.0:
                    lo = mid
                else:
                    hi = mid
            c1 = q * lo
        if abs(c1[0]) < 2.5 * eps_s:
            eps_s = abs(c1[0]) / 2.5
            if eps_s <= 0:
                raise ValueError("homoclinic box collapses onto the fixed-point box")
        boxes = {
            "U0": Box(c0, eps_s, eps_u, eps_c),
            "U1": Box(c1, eps_s, eps_u, eps_c),
            "V0": Box(c0, eps_s, eps_u, delta_c / 2.0),
            "V1": Box(c1, eps_s, eps_u, delta_c / 2.0),
        }
    U = [boxes["U0"], boxes["U1"]]
    V = [boxes["V0"], boxes["V1"]]
    eps_s, eps_u, eps_c = U[0].half_s, U[0].half_u, U[0].half_c

    n_u = grid[0]
    n_c = grid[1] if len(grid) > 1 else 1

    def seed_fn_for(box: Box, c_off: np.ndarray):
        def seed(u_param):
            zeta = box.center.copy()
            zeta[0] = box.center[0]          # flat disk: zeta_s = center
            zeta[1] = box.center[1] + u_param
            if c_dim:
                zeta[2:] = box.center[2:] + c_off
            return frame.to_state(zeta)
        return seed

    # central offsets of the disk fibers (grid over the central box)
    if c_dim == 0:
        c_offsets = [np.empty(0)]
    else:
        axes = [np.linspace(-1.0, 1.0, n_c) for _ in range(c_dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        c_offsets = [np.array([m[idx] for m in mesh])
                     for idx in np.ndindex(*(n_c,) * c_dim)]

    u_params = np.linspace(-1.0, 1.0, n_u)
    fibers = {}
    for i, box in enumerate(U):
        for c_off in c_offsets:
            key = (i, tuple(np.round(c_off, 12)))
            fibers[key] = _Fiber(seed_fn_for(box, c_off * box.half_c),
                                 u_params * box.half_u)

    region_lo = np.minimum(U[0].center, U[1].center) - 4 * np.array(
        [eps_s, eps_u] + [eps_c] * c_dim)
    region_hi = np.maximum(U[0].center, U[1].center) + 4 * np.array(
        [eps_s, eps_u] + [eps_c] * c_dim)

    def interesting(p):
        zeta = frame.to_frame(p)
        return bool(np.all(zeta >= region_lo) and np.all(zeta <= region_hi))

    h_cap = 0.5 * eps_u
    hits = np.zeros((2, 2), dtype=bool)
    hits_history = []
    slope_bound = 0.0
    strand_counts = {}
    k_done = 0

    for k in range(1, k_max + 1):
        for fib in fibers.values():
            fib.push(mapper)
            fib.refine(mapper, interesting, h_cap)
        k_done = k
        for i in range(2):
            for j in range(2):
                if hits[i, j]:
                    continue
                needed = [c for c in c_offsets
                          if c_dim == 0
                          or np.abs(U[i].center[2:] + c * U[i].half_c
                                    - V[j].center[2:]).max() <= V[j].half_c]
                if not needed:
                    continue
                ok_all, worst = True, 0.0
                for c_off in needed:
                    key = (i, tuple(np.round(c_off, 12)))
                    found, slope = _strand_hits(frame, fibers[key].points, V[j])
                    if not (found and slope <= 1.0):
                        ok_all = False
                        break
                    worst = max(worst, slope)
                if ok_all:
                    hits[i, j] = True
                    slope_bound = max(slope_bound, worst)
                    strand_counts[(i, j)] = len(needed)
        hits_history.append(hits.copy())
        if stop_at_first and hits.all():
            break

    # one-application Lipschitz factor of the stable coordinate
    ratios = []
    for box in U:
        for su in (-0.6, 0.0, 0.6):
            for sc in ([np.zeros(c_dim)] if c_dim == 0 else
                       [np.full(c_dim, -0.5), np.zeros(c_dim), np.full(c_dim, 0.5)]):
                za = box.center.copy()
                za[1] += su * box.half_u
                if c_dim:
                    za[2:] += sc * box.half_c
                zb = za.copy()
                za[0] = box.center[0] + 0.8 * box.half_s
                zb[0] = box.center[0] - 0.8 * box.half_s
                pa = frame.to_frame(mapper(frame.to_state(za)))
                pb = frame.to_frame(mapper(frame.to_state(zb)))
                ratios.append(abs(pa[0] - pb[0]) / abs(za[0] - zb[0]))
    contraction = float(max(ratios)) if ratios else np.nan

    return DiskReturnReport(boxes=boxes, k=k_done, hits=hits,
                            slope_bound=float(slope_bound),
                            contraction_ratio=contraction,
                            hits_history=tuple(hits_history),
                            strand_counts=strand_counts)
