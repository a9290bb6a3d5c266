"""Random periodic packings of spheres and ellipsoids.

Two generators produce non-intersecting packings at a prescribed volume
fraction inside a periodic cubic cell:

* ``rsa_generate`` -- sequential placement with rejection (efficient at low
  fractions, guarded at 35%);
* ``md_generate`` -- simultaneous placement followed by synchronous
  overlap-resolving relaxation (for dense packings up to 60%).

Overlap of two ellipsoids (or a sphere and an ellipsoid) is decided by the
Perram-Wertheim contact function: the blended quadratic form of the pair,
maximized over the mixing parameter, is below one exactly when the closed
solids intersect.  The maximizer also yields the contact point and common
normal along which the relaxation pushes overlapping pairs apart.  Sphere
pairs short-circuit to a center-distance test.  Periodic images are
enumerated from the bodies' bounding-sphere reach, which for elongated
inclusions can extend beyond the 26 nearest neighbor cells; an inclusion is
also checked against its own images.

All randomness flows through one seeded generator, so identical
(spec, seed) inputs reproduce identical packings byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from rvehom.tensors import EulerAngles, bunge_matrix

SPHERE = "sphere"
ELLIPSOID = "ellipsoid"

RSA_MAX_FRACTION = 0.35
MD_MAX_FRACTION = 0.60

#: Relative inflation of the bodies during relaxation; the final packing
#: keeps gaps of about this size, so audits pass with strict inequalities.
_MD_MARGIN = 1e-6

_JITTER_SCALE = 1e-3
_CONTACT_TOL = 1e-10


class JammingError(RuntimeError):
    """Sequential placement exhausted its rejection budget."""

    def __init__(self, placed: int, requested: int, achieved_fraction: float):
        self.placed = placed
        self.requested = requested
        self.achieved_fraction = achieved_fraction
        super().__init__(
            f"placement jammed after {placed}/{requested} inclusions "
            f"(achieved volume fraction {achieved_fraction:.4f})"
        )


class NonConvergence(RuntimeError):
    """Overlap relaxation did not reach a valid packing."""

    def __init__(self, sweeps: int, residual_overlaps: int):
        self.sweeps = sweeps
        self.residual_overlaps = residual_overlaps
        super().__init__(
            f"relaxation stopped after {sweeps} sweeps with "
            f"{residual_overlaps} residual overlapping pairs"
        )


@dataclass(frozen=True)
class Inclusion:
    """One particle: a sphere or a spheroid with a1 >= a2 = a3."""

    shape: str
    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    orientation: EulerAngles = EulerAngles(0.0, 0.0, 0.0)

    def __post_init__(self):
        a1, a2, a3 = self.semi_axes
        if min(a1, a2, a3) <= 0.0:
            raise ValueError(f"semi-axes must be positive, got {self.semi_axes}")
        if self.shape == SPHERE:
            if not (a1 == a2 == a3):
                raise ValueError(
                    f"sphere requires equal semi-axes, got {self.semi_axes}"
                )
        elif self.shape == ELLIPSOID:
            if not math.isclose(a2, a3, rel_tol=1e-12):
                raise ValueError(f"spheroid requires a2 = a3, got {self.semi_axes}")
            if a1 < a2:
                raise ValueError(f"expected a1 >= a2, got {self.semi_axes}")
        else:
            raise ValueError(f"unknown shape {self.shape!r}")

    @property
    def is_sphere(self) -> bool:
        return self.shape == SPHERE

    @property
    def bounding_radius(self) -> float:
        return max(self.semi_axes)

    @property
    def volume(self) -> float:
        a1, a2, a3 = self.semi_axes
        return (4.0 / 3.0) * math.pi * a1 * a2 * a3

    def quadratic_form(self) -> np.ndarray:
        """Global-frame matrix Q with x inside iff (x-c)^T Q (x-c) <= 1."""
        m = bunge_matrix(self.orientation)
        d = np.diag([1.0 / a**2 for a in self.semi_axes])
        return m @ d @ m.T


@dataclass(frozen=True)
class RveSpec:
    """Target composition of one unit cell.

    All inclusions of a shape share the semi-axes that make `count` of them
    fill `fraction` of the cell, matching how the generated packings are
    described by counts and fractions.
    """

    sphere_count: int = 0
    sphere_fraction: float = 0.0
    ellipsoid_count: int = 0
    ellipsoid_fraction: float = 0.0
    aspect_ratio: float = 1.0
    orientations: str | tuple[EulerAngles, ...] = "random"
    generator: str = "rsa"
    cell_edge: float = 1.0
    #: Relative surface-separation margin enforced between inclusions.
    #: Placement and relaxation treat every body as inflated by this factor,
    #: so the real bodies keep gaps of that relative size; useful to stop
    #: rasterized near-contacts from welding at coarse grid resolutions.
    clearance: float = 0.0

    def __post_init__(self):
        if self.sphere_fraction < 0 or self.ellipsoid_fraction < 0:
            raise ValueError("volume fractions must be non-negative")
        if not 0.0 <= self.clearance < 0.5:
            raise ValueError(f"clearance must be in [0, 0.5), got {self.clearance}")
        if self.total_fraction >= 1.0:
            raise ValueError(
                f"total volume fraction {self.total_fraction} must be below 1"
            )
        if self.aspect_ratio < 1.0:
            raise ValueError(f"aspect ratio must be >= 1, got {self.aspect_ratio}")
        if (self.sphere_count > 0) != (self.sphere_fraction > 0):
            raise ValueError("sphere count and fraction must be both zero or both set")
        if (self.ellipsoid_count > 0) != (self.ellipsoid_fraction > 0):
            raise ValueError(
                "ellipsoid count and fraction must be both zero or both set"
            )
        if self.generator not in ("rsa", "md"):
            raise ValueError(f"unknown generator {self.generator!r}")

    @property
    def total_fraction(self) -> float:
        return self.sphere_fraction + self.ellipsoid_fraction

    def sphere_radius(self) -> float:
        return self.cell_edge * (
            3.0 * self.sphere_fraction / (4.0 * math.pi * self.sphere_count)
        ) ** (1.0 / 3.0)

    def ellipsoid_semi_axes(self) -> tuple[float, float, float]:
        b = self.cell_edge * (
            3.0 * self.ellipsoid_fraction
            / (4.0 * math.pi * self.ellipsoid_count * self.aspect_ratio)
        ) ** (1.0 / 3.0)
        return (self.aspect_ratio * b, b, b)


@dataclass(frozen=True)
class RveRealization:
    """A concrete periodic packing plus its generation metadata."""

    cell_edge: float
    inclusions: tuple[Inclusion, ...]
    seed: int
    target_fractions: dict = field(default_factory=dict, compare=False)
    stats: dict = field(default_factory=dict, compare=False, repr=False)


def random_orientation(rng: np.random.Generator) -> EulerAngles:
    """Rotation drawn from the uniform (Haar) measure on rotations.

    Both z-angles are uniform and the cosine of the tilt is uniform, which
    makes any fixed body axis uniformly distributed on the sphere after
    rotation.
    """
    phi1 = rng.uniform(0.0, 2.0 * math.pi)
    Phi = math.acos(rng.uniform(-1.0, 1.0))
    phi2 = rng.uniform(0.0, 2.0 * math.pi)
    return EulerAngles(phi1, Phi, phi2)


# ---------------------------------------------------------------------------
# Pairwise overlap machinery
# ---------------------------------------------------------------------------

class _Body:
    """Working representation of one inclusion with precomputed geometry."""

    __slots__ = ("shape", "semi_axes", "orientation", "radius", "q", "is_sphere")

    def __init__(self, shape, semi_axes, orientation, inflate: float = 0.0):
        self.shape = shape
        self.semi_axes = tuple(a * (1.0 + inflate) for a in semi_axes)
        self.orientation = orientation
        self.radius = max(self.semi_axes)
        self.is_sphere = shape == SPHERE
        if self.is_sphere:
            self.q = None
        else:
            m = bunge_matrix(orientation)
            d = np.diag([1.0 / a**2 for a in self.semi_axes])
            self.q = m @ d @ m.T

    def quadratic(self) -> np.ndarray:
        if self.q is not None:
            return self.q
        return np.diag([1.0 / self.radius**2] * 3)


def _pw_batch(qa: np.ndarray, qb: np.ndarray, d: np.ndarray):
    """Perram-Wertheim contact function for a batch of ellipsoid pairs.

    ``qa``, ``qb`` are stacked (m, 3, 3) quadratic forms and ``d`` the
    (m, 3) center offsets.  The blended form F(t) is concave with
    F(0) = F(1) = 0, so its maximum is found by bisection on the sign of
    dF/dt = G_a(x*) - G_b(x*).  Returns (F, x) with x the contact points
    relative to the first body's center; F < 1 means overlap.
    """
    m = d.shape[0]
    lo = np.zeros(m)
    hi = np.ones(m)
    ga = gb = None
    x = np.zeros_like(d)
    for _ in range(48):
        t = 0.5 * (lo + hi)
        blend = t[:, None, None] * qa + (1.0 - t)[:, None, None] * qb
        rhs = (1.0 - t)[:, None] * np.einsum("mij,mj->mi", qb, d)
        x = np.linalg.solve(blend, rhs[..., None])[..., 0]
        xb = x - d
        ga = np.einsum("mi,mij,mj->m", x, qa, x)
        gb = np.einsum("mi,mij,mj->m", xb, qb, xb)
        up = ga - gb > 0.0
        lo = np.where(up, t, lo)
        hi = np.where(up, hi, t)
    t = 0.5 * (lo + hi)
    f = t * ga + (1.0 - t) * gb
    return f, x


@lru_cache(maxsize=16)
def _offset_grid(k: int) -> np.ndarray:
    r = np.arange(-k, k + 1, dtype=float)
    grid = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    grid.flags.writeable = False
    return grid


def _candidate_offsets(
    body_a: _Body, body_b: _Body, ca, cb, cell_edge: float, same: bool
) -> np.ndarray:
    """Center offsets (a to b image) close enough for possible contact.

    Images are enumerated out to the bodies' bounding-sphere reach, which
    for long fibers extends beyond the 26 nearest neighbor cells.
    """
    base = np.asarray(cb) - np.asarray(ca)
    base -= cell_edge * np.round(base / cell_edge)
    reach = body_a.radius + body_b.radius + _CONTACT_TOL
    k = max(int(math.ceil((reach + 0.5 * cell_edge) / cell_edge)), 1)
    offsets = _offset_grid(k) * cell_edge
    d_all = base + offsets
    keep = np.einsum("ij,ij->i", d_all, d_all) <= reach * reach
    if same:
        keep &= np.any(offsets != 0.0, axis=1)
    return d_all[keep]


def _pw_depth_normal(body_a: _Body, body_b: _Body, d, f, x):
    """Penetration depth and push normal from one contact-function result."""
    dn = math.sqrt(float(d @ d))
    grad = body_a.quadratic() @ x
    gn = np.linalg.norm(grad)
    if gn > 1e-12:
        normal = grad / gn
    elif dn > 1e-12:
        normal = d / dn
    else:
        normal = np.array([1.0, 0.0, 0.0])
    # The pair touches when both bodies are scaled by sqrt(F), so the
    # center-line contact distance is |d| / sqrt(F).
    depth = dn * (1.0 / math.sqrt(max(f, 1e-12)) - 1.0) if dn > 1e-12 \
        else min(body_a.semi_axes[2], body_b.semi_axes[2])
    return depth, normal


def _pair_overlaps(
    body_a: _Body, body_b: _Body, ca, cb, cell_edge: float, same: bool
) -> list[tuple[float, np.ndarray]]:
    """(penetration depth, unit normal a->b) for every overlapping image."""
    d_cand = _candidate_offsets(body_a, body_b, ca, cb, cell_edge, same)
    if d_cand.size == 0:
        return []
    out = []
    if body_a.is_sphere and body_b.is_sphere:
        rsum = body_a.radius + body_b.radius
        dist = np.linalg.norm(d_cand, axis=1)
        for d, dn in zip(d_cand, dist):
            if dn <= rsum + _CONTACT_TOL:
                normal = d / dn if dn > 1e-12 else np.array([1.0, 0.0, 0.0])
                out.append((rsum - dn, normal))
        return out
    qa = np.broadcast_to(body_a.quadratic(), (len(d_cand), 3, 3))
    qb = np.broadcast_to(body_b.quadratic(), (len(d_cand), 3, 3))
    f_all, x_all = _pw_batch(qa, qb, d_cand)
    for d, f, x in zip(d_cand, f_all, x_all):
        if f <= 1.0 + _CONTACT_TOL:
            out.append(_pw_depth_normal(body_a, body_b, d, f, x))
    return out


def _as_body(inc: Inclusion, inflate: float = 0.0) -> _Body:
    return _Body(inc.shape, inc.semi_axes, inc.orientation, inflate)


def intersects(a: Inclusion, b: Inclusion, cell_edge: float) -> bool:
    """True iff the closed solids overlap for at least one periodic image.

    Passing the same object twice tests an inclusion against its own
    periodic images.
    """
    return bool(
        _pair_overlaps(
            _as_body(a), _as_body(b), a.center, b.center, cell_edge, same=a is b
        )
    )


def _self_intersects(body: _Body, center, cell_edge: float) -> bool:
    return bool(_pair_overlaps(body, body, center, center, cell_edge, same=True))


def audit_no_intersections(realization: RveRealization) -> bool:
    """Exhaustive periodic pair check, including self images."""
    incs = realization.inclusions
    bodies = [_as_body(inc) for inc in incs]
    for i, (inc_a, body_a) in enumerate(zip(incs, bodies)):
        if _self_intersects(body_a, inc_a.center, realization.cell_edge):
            return False
        for inc_b, body_b in zip(incs[i + 1:], bodies[i + 1:]):
            if _pair_overlaps(body_a, body_b, inc_a.center, inc_b.center,
                              realization.cell_edge, same=False):
                return False
    return True


def volume_fraction(realization: RveRealization) -> dict[str, float]:
    """Analytic volume fraction per shape (each inclusion counted once)."""
    cell_volume = realization.cell_edge**3
    fractions: dict[str, float] = {}
    for inc in realization.inclusions:
        fractions[inc.shape] = (
            fractions.get(inc.shape, 0.0) + inc.volume / cell_volume
        )
    return fractions


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def _planned_inclusions(spec: RveSpec):
    """Shapes, semi-axes and fixed orientations to place, largest first.

    A None orientation means "draw a random one per attempt".
    """
    planned = []
    if spec.ellipsoid_count:
        axes = spec.ellipsoid_semi_axes()
        for k in range(spec.ellipsoid_count):
            if spec.orientations == "random":
                orientation = None
            else:
                orientation = spec.orientations[k % len(spec.orientations)]
            planned.append((ELLIPSOID, axes, orientation))
    if spec.sphere_count:
        r = spec.sphere_radius()
        planned.extend(
            (SPHERE, (r, r, r), EulerAngles(0, 0, 0))
            for _ in range(spec.sphere_count)
        )
    return planned


def _targets(spec: RveSpec) -> dict[str, float]:
    targets = {}
    if spec.sphere_count:
        targets[SPHERE] = spec.sphere_fraction
    if spec.ellipsoid_count:
        targets[ELLIPSOID] = spec.ellipsoid_fraction
    return targets


def rsa_generate(
    spec: RveSpec, seed: int, max_attempts: int = 100_000
) -> RveRealization:
    """Sequential random placement with rejection of intersecting candidates.

    Raises
    ------
    ValueError
        If the spec's total fraction exceeds the 35% guard.
    JammingError
        After ``max_attempts`` consecutive rejections for one inclusion.
    """
    if spec.total_fraction > RSA_MAX_FRACTION:
        raise ValueError(
            f"total fraction {spec.total_fraction:.3f} exceeds the sequential "
            f"generator guard {RSA_MAX_FRACTION}; use the relaxation generator"
        )
    rng = np.random.default_rng(seed)
    cell = spec.cell_edge
    placed: list[Inclusion] = []
    placed_bodies: list[_Body] = []
    total_attempts = 0
    planned = _planned_inclusions(spec)
    for shape, axes, orientation in planned:
        for _ in range(max_attempts):
            center = tuple(rng.uniform(0.0, cell, 3))
            angles = orientation if orientation is not None \
                else random_orientation(rng)
            body = _Body(shape, axes, angles, inflate=spec.clearance)
            total_attempts += 1
            if _self_intersects(body, center, cell):
                continue
            if any(
                _pair_overlaps(body, other, center, inc.center, cell, same=False)
                for other, inc in zip(placed_bodies, placed)
            ):
                continue
            placed.append(Inclusion(shape, center, axes, angles))
            placed_bodies.append(body)
            break
        else:
            achieved = sum(p.volume for p in placed) / cell**3
            raise JammingError(len(placed), len(planned), achieved)
    return RveRealization(
        cell_edge=cell,
        inclusions=tuple(placed),
        seed=seed,
        target_fractions=_targets(spec),
        stats={"attempts": total_attempts},
    )


def _system_contacts(bodies, centers, cell):
    """Total penetration and the per-pair contact list of a configuration.

    Candidate images are gathered per pair by the bounding-sphere filter;
    all surviving ellipsoid contact-function evaluations run as one batch.
    """
    total = 0.0
    contacts = []
    pw_rows = []
    n = len(bodies)
    for i in range(n):
        for j in range(i, n):
            a, b = bodies[i], bodies[j]
            d_cand = _candidate_offsets(
                a, b, centers[i], centers[j], cell, same=i == j
            )
            if d_cand.size == 0:
                continue
            if a.is_sphere and b.is_sphere:
                rsum = a.radius + b.radius
                dist = np.linalg.norm(d_cand, axis=1)
                for d, dn in zip(d_cand, dist):
                    if dn <= rsum + _CONTACT_TOL:
                        normal = d / dn if dn > 1e-12 \
                            else np.array([1.0, 0.0, 0.0])
                        total += rsum - dn
                        contacts.append((i, j, rsum - dn, normal))
            else:
                pw_rows.extend((i, j, d) for d in d_cand)
    if pw_rows:
        qa = np.stack([bodies[i].quadratic() for i, _, _ in pw_rows])
        qb = np.stack([bodies[j].quadratic() for _, j, _ in pw_rows])
        d_stack = np.stack([d for _, _, d in pw_rows])
        f_all, x_all = _pw_batch(qa, qb, d_stack)
        for (i, j, d), f, x in zip(pw_rows, f_all, x_all):
            if f <= 1.0 + _CONTACT_TOL:
                depth, normal = _pw_depth_normal(bodies[i], bodies[j], d, f, x)
                total += depth
                contacts.append((i, j, depth, normal))
    return total, contacts


def _relocation_penetrations(bodies, centers, k, candidates, cell):
    """Penetration particle k would contribute at each candidate position.

    Sphere partners are handled analytically; all ellipsoid-involved
    (candidate, partner, image) rows run through one contact-function batch.
    """
    totals = np.zeros(len(candidates))
    body_k = bodies[k]
    pw_idx: list[int] = []
    pw_d: list[np.ndarray] = []
    pw_qb: list[np.ndarray] = []
    for j, b in enumerate(bodies):
        if j == k:
            continue
        reach = body_k.radius + b.radius + _CONTACT_TOL
        kk = max(int(math.ceil((reach + 0.5 * cell) / cell)), 1)
        offsets = _offset_grid(kk) * cell
        base = centers[j] - candidates
        base -= cell * np.round(base / cell)
        d_all = base[:, None, :] + offsets[None, :, :]
        dist2 = np.einsum("moi,moi->mo", d_all, d_all)
        cand_idx, off_idx = np.nonzero(dist2 <= reach * reach)
        if cand_idx.size == 0:
            continue
        if body_k.is_sphere and b.is_sphere:
            rsum = body_k.radius + b.radius
            dn = np.sqrt(dist2[cand_idx, off_idx])
            np.add.at(totals, cand_idx, np.maximum(rsum - dn, 0.0))
        else:
            qb = b.quadratic()
            for ci, oi in zip(cand_idx, off_idx):
                pw_idx.append(int(ci))
                pw_d.append(d_all[ci, oi])
                pw_qb.append(qb)
    if pw_idx:
        qa = np.broadcast_to(body_k.quadratic(), (len(pw_idx), 3, 3))
        f_all, _ = _pw_batch(qa, np.stack(pw_qb), np.stack(pw_d))
        dn_all = np.linalg.norm(np.stack(pw_d), axis=1)
        depths = np.where(
            f_all <= 1.0 + _CONTACT_TOL,
            dn_all * (1.0 / np.sqrt(np.maximum(f_all, 1e-12)) - 1.0),
            0.0,
        )
        np.add.at(totals, np.asarray(pw_idx), np.maximum(depths, 0.0))
    return totals


_STEP_LADDER = (1.000001, 0.5, 0.25, 0.125, 0.0625)


def _relax(bodies, centers, cell, rng, max_sweeps):
    """One relaxation run; returns (centers, sweeps, history, converged).

    Every sweep applies the synchronous pair pushes (depth-weighted, with an
    equal-weight variant as fallback), halving the step until the total
    penetration does not increase; stalls are broken by jittering the
    overlapping bodies and, failing that, by relocating the worst offenders
    to searched positions.  The recorded penetration history is therefore
    non-increasing.

    ``bodies`` carry a small extra inflation on top of the requested
    clearance; termination deflates that epsilon away and requires exactly
    zero contacts, which leaves the clearance-level bodies strictly
    separated.
    """
    real_bodies = [
        _Body(b.shape, tuple(a / (1.0 + _MD_MARGIN) for a in b.semi_axes),
              b.orientation)
        for b in bodies
    ]
    pen, contacts = _system_contacts(bodies, centers, cell)
    history = [pen]
    stalls = 0
    sweeps = 0
    while sweeps < max_sweeps:
        if pen < 0.01 * min(b.semi_axes[2] for b in bodies):
            real_pen, _ = _system_contacts(real_bodies, centers, cell)
            if real_pen == 0.0:
                return centers, sweeps, history, True
        if not contacts:
            return centers, sweeps, history, True
        sweeps += 1
        shift_depth = np.zeros_like(centers)
        shift_unit = np.zeros_like(centers)
        avg_depth = pen / len(contacts)
        for i, j, depth, normal in contacts:
            if i == j:
                continue
            shift_depth[i] -= 0.5 * depth * normal
            shift_depth[j] += 0.5 * depth * normal
            shift_unit[i] -= 0.5 * avg_depth * normal
            shift_unit[j] += 0.5 * avg_depth * normal
        accepted = False
        for shifts in (shift_depth, shift_unit):
            for step in _STEP_LADDER:
                trial = (centers + step * shifts) % cell
                t_pen, t_contacts = _system_contacts(bodies, trial, cell)
                if t_pen <= pen * (1.0 + 1e-12):
                    centers, pen, contacts = trial, t_pen, t_contacts
                    accepted = True
                    break
            if accepted:
                break
        if not accepted:
            amplitude = _JITTER_SCALE * 3.0 ** min(stalls, 6)
            involved = sorted({k for i, j, _, _ in contacts for k in (i, j)})
            for _ in range(64):
                trial = centers.copy()
                for k in involved:
                    trial[k] = (trial[k] + rng.uniform(-1, 1, 3) * amplitude
                                * cell) % cell
                t_pen, t_contacts = _system_contacts(bodies, trial, cell)
                if t_pen <= pen * (1.0 + 1e-12):
                    centers, pen, contacts = trial, t_pen, t_contacts
                    accepted = True
                    break
        if not accepted:
            contribution = np.zeros(len(centers))
            for i, j, depth, _ in contacts:
                contribution[i] += depth
                contribution[j] += depth
            for k in np.argsort(contribution)[::-1][:10]:
                current = _relocation_penetrations(
                    bodies, centers, k, centers[k][None, :], cell
                )[0]
                candidates = rng.uniform(0.0, cell, (1000, 3))
                pens = _relocation_penetrations(bodies, centers, k, candidates,
                                                cell)
                best = int(np.argmin(pens))
                if pens[best] < current * (1.0 - 1e-9):
                    centers = centers.copy()
                    centers[k] = candidates[best]
                    pen, contacts = _system_contacts(bodies, centers, cell)
                    accepted = True
                    break
        stalls = 0 if accepted else stalls + 1
        if not accepted and stalls > 8:
            break
        history.append(pen)
    return centers, sweeps, history, False


def md_generate(
    spec: RveSpec, seed: int, max_sweeps: int = 10_000, max_restarts: int = 8
) -> RveRealization:
    """Simultaneous placement followed by overlap relaxation.

    All inclusions are dropped at random positions at once, then pushed
    apart pair by pair until no overlaps remain.  The relaxation works on
    bodies inflated by a small margin, so the returned packing has strictly
    separated inclusions.  If a run stalls, the whole configuration is
    re-dropped (deterministically from the same random stream) within the
    sweep budget.

    Raises
    ------
    ValueError
        If the spec's total fraction exceeds the 60% guard.
    NonConvergence
        If the sweep budget is exhausted with overlaps remaining.
    """
    if spec.total_fraction > MD_MAX_FRACTION:
        raise ValueError(
            f"total fraction {spec.total_fraction:.3f} exceeds the relaxation "
            f"generator guard {MD_MAX_FRACTION}"
        )
    rng = np.random.default_rng(seed)
    cell = spec.cell_edge
    planned = _planned_inclusions(spec)
    work_inflate = (1.0 + spec.clearance) * (1.0 + _MD_MARGIN) - 1.0

    sweeps_used = 0
    last_residual = 0
    for attempt in range(max_restarts):
        bodies: list[_Body] = []
        centers = np.empty((len(planned), 3))
        ok = True
        for idx, (shape, axes, orientation) in enumerate(planned):
            centers[idx] = rng.uniform(0.0, cell, 3)
            draws = 10_000 if orientation is None else 1
            for _ in range(draws):
                angles = orientation if orientation is not None \
                    else random_orientation(rng)
                body = _Body(shape, axes, angles, inflate=work_inflate)
                # Self-image overlap depends only on orientation, so it must
                # be resolved here: translation sweeps can never fix it.
                if not _self_intersects(body, centers[idx], cell):
                    break
            else:
                ok = False
                break
            bodies.append(body)
        if not ok:
            raise NonConvergence(sweeps_used, 1)

        budget = max_sweeps - sweeps_used
        centers, sweeps, history, converged = _relax(
            bodies, centers, cell, rng, budget
        )
        sweeps_used += sweeps
        if converged:
            inclusions = tuple(
                Inclusion(
                    shape,
                    tuple(center),
                    axes,
                    body.orientation,
                )
                for (shape, axes, _), body, center in zip(planned, bodies, centers)
            )
            return RveRealization(
                cell_edge=cell,
                inclusions=inclusions,
                seed=seed,
                target_fractions=_targets(spec),
                stats={
                    "sweeps": sweeps,
                    "restarts": attempt,
                    "penetration_history": history,
                },
            )
        last_residual = sum(
            1 for i, j, _, _ in _system_contacts(bodies, centers, cell)[1]
        )
        if sweeps_used >= max_sweeps:
            break
    raise NonConvergence(sweeps_used, last_residual)


def generate(
    spec: RveSpec,
    seed: int,
    max_attempts: int = 100_000,
    max_sweeps: int = 10_000,
) -> RveRealization:
    """Dispatch to the generator named in the spec."""
    if spec.generator == "md":
        return md_generate(spec, seed, max_sweeps=max_sweeps)
    return rsa_generate(spec, seed, max_attempts=max_attempts)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def to_json(realization: RveRealization) -> str:
    """Serialize to the interchange document consumed by the other stages."""
    doc = {
        "cell_edge": realization.cell_edge,
        "seed": realization.seed,
        "inclusions": [
            {
                "shape": inc.shape,
                "center": list(inc.center),
                "semi_axes": list(inc.semi_axes),
                "euler": [inc.orientation.phi1, inc.orientation.Phi,
                          inc.orientation.phi2],
            }
            for inc in realization.inclusions
        ],
    }
    return json.dumps(doc, indent=2)


def from_json(text: str) -> RveRealization:
    doc = json.loads(text)
    inclusions = tuple(
        Inclusion(
            shape=item["shape"],
            center=tuple(item["center"]),
            semi_axes=tuple(item["semi_axes"]),
            orientation=EulerAngles(*item["euler"]),
        )
        for item in doc["inclusions"]
    )
    return RveRealization(
        cell_edge=doc["cell_edge"],
        inclusions=inclusions,
        seed=doc["seed"],
    )


def save(realization: RveRealization, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(realization))
        fh.write("\n")


def load(path) -> RveRealization:
    with open(path, encoding="utf-8") as fh:
        return from_json(fh.read())
