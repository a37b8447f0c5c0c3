"""Position-based fluid solver: particle storage, neighbor search, density
constraint projection, fluid-solid coupling, wavemaker.

Each substep predicts positions, then iteratively projects them to satisfy
the per-particle density constraint

    C_i = rho_i / rho0 - 1 <= 0,
    rho_i = sum_fluid m_j W_ij + s * sum_solid m_j W_ij

(poly6 kernel for density, spiky gradient for corrections). The projection
is inverse-mass weighted, so paired corrections conserve momentum exactly.
Boundary samples owned by rigid bodies are never moved; their accumulated
would-be corrections become impulses dp = m_b dx / dt reported per body.

Particle masses are calibrated so an ideal cubic lattice at the configured
spacing evaluates exactly to the rest density; a lattice at rest therefore
receives zero corrections.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _pbf
from ._pbf import PHASE_FLUID, PHASE_SOLID, PHASE_WAVEMAKER

OWNER_NONE = -1
OWNER_WAVEMAKER = -2


class FluidError(RuntimeError):
    pass


class StaleGridError(FluidError):
    """Neighbor grid no longer matches the positions it indexed."""


# ---------------------------------------------------------------------------
# kernels (python-facing; the solver uses the jitted twins in _pbf)

def kernel_w(r, h: float) -> float:
    """poly6 density kernel, 1/m^3; zero for |r| >= h."""
    if h <= 0:
        raise ValueError("smoothing length h must be > 0")
    r = np.asarray(r, dtype=np.float64)
    r2 = float(r @ r) if r.ndim == 1 else float(r) ** 2
    if r2 >= h * h:
        return 0.0
    d = h * h - r2
    return 315.0 / (64.0 * np.pi * h ** 9) * d ** 3


def kernel_grad_w(r, h: float) -> np.ndarray:
    """Spiky kernel gradient, 1/m^4; antisymmetric in r; zero at r = 0."""
    if h <= 0:
        raise ValueError("smoothing length h must be > 0")
    r = np.asarray(r, dtype=np.float64)
    rn = float(np.linalg.norm(r))
    if rn >= h or rn < 1e-12:
        return np.zeros(3)
    d = h - rn
    return -45.0 / (np.pi * h ** 6) * d * d * (r / rn)


def lattice_kernel_sum(spacing: float, h: float) -> float:
    """sum_j W(x_j; h) over an ideal cubic lattice (self term included)."""
    reach = int(np.ceil(h / spacing))
    total = 0.0
    for ix in range(-reach, reach + 1):
        for iy in range(-reach, reach + 1):
            for iz in range(-reach, reach + 1):
                r2 = (ix * ix + iy * iy + iz * iz) * spacing * spacing
                if r2 < h * h:
                    d = h * h - r2
                    total += 315.0 / (64.0 * np.pi * h ** 9) * d ** 3
    return total


def calibrated_particle_mass(rest_density: float, spacing: float, h: float) -> float:
    return rest_density / lattice_kernel_sum(spacing, h)


# ---------------------------------------------------------------------------

@dataclass
class FluidParams:
    rest_density: float = 1000.0
    spacing: float = 0.035
    h_factor: float = 2.0
    iterations: int = 4
    relaxation: float = 1e-5      # relative constraint softening
    boundary_mass_weight: float = 1.0   # s of the mass-weighted density sum
    cohesion: float = 0.0
    xsph: float = 0.2             # velocity-smoothing coefficient

    def __post_init__(self):
        if self.rest_density <= 0 or self.spacing <= 0:
            raise ValueError("rest_density and spacing must be > 0")
        if self.h_factor <= 1.0:
            raise ValueError("h must exceed particle spacing")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.boundary_mass_weight <= 0:
            raise ValueError("boundary mass weight s must be > 0")

    @property
    def h(self) -> float:
        return self.h_factor * self.spacing

    @staticmethod
    def from_config(fluid_cfg) -> "FluidParams":
        return FluidParams(fluid_cfg.rest_density, fluid_cfg.spacing,
                           fluid_cfg.h_factor, fluid_cfg.iterations,
                           fluid_cfg.relaxation, fluid_cfg.boundary_mass_weight,
                           fluid_cfg.cohesion, fluid_cfg.xsph)


class ParticleSet:
    """Structure-of-arrays particle storage for fluid and boundary samples."""

    def __init__(self):
        self.pos = np.zeros((0, 3))
        self.vel = np.zeros((0, 3))
        self.mass = np.zeros(0)
        self.phase = np.zeros(0, dtype=np.uint8)
        self.owner = np.zeros(0, dtype=np.int32)
        self.wweight = np.zeros(0)   # 1 for fluid, s for solid samples

    def __len__(self):
        return self.pos.shape[0]

    @property
    def fluid_mask(self) -> np.ndarray:
        return self.phase == PHASE_FLUID

    @property
    def solid_mask(self) -> np.ndarray:
        return self.phase != PHASE_FLUID

    def add(self, pos, vel, mass, phase, owner, wweight) -> np.ndarray:
        pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
        n = pos.shape[0]
        idx = np.arange(len(self), len(self) + n)
        self.pos = np.vstack([self.pos, pos])
        self.vel = np.vstack([self.vel, np.broadcast_to(np.asarray(vel, dtype=np.float64), (n, 3))])
        self.mass = np.concatenate([self.mass, np.full(n, float(mass))])
        self.phase = np.concatenate([self.phase, np.full(n, phase, dtype=np.uint8)])
        self.owner = np.concatenate([self.owner, np.full(n, owner, dtype=np.int32)])
        self.wweight = np.concatenate([self.wweight, np.full(n, float(wweight))])
        return idx

    def add_fluid_block(self, lo, hi, spacing: float, mass: float,
                        jitter: float = 0.0, rng=None) -> np.ndarray:
        """Fill an axis-aligned box with a cubic lattice of fluid particles."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        counts = np.maximum(1, np.floor((hi - lo) / spacing + 1e-9).astype(int))
        # center the lattice in the box so wall gaps (and splashes against a
        # symmetric body) are symmetric
        starts = lo + ((hi - lo) - (counts - 1) * spacing) / 2.0
        axes = [starts[k] + spacing * np.arange(counts[k]) for k in range(3)]
        xx, yy, zz = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
        if jitter > 0.0 and rng is not None:
            pts = pts + rng.uniform(-jitter, jitter, pts.shape)
        return self.add(pts, np.zeros(3), mass, PHASE_FLUID, OWNER_NONE, 1.0)

    def validate(self):
        n = len(self)
        for name in ("vel", "mass", "phase", "owner", "wweight"):
            if getattr(self, name).shape[0] != n:
                raise FluidError(f"particle array '{name}' length mismatch")
        if not np.all(np.isfinite(self.pos)):
            raise FluidError("non-finite particle positions")
        fm = self.fluid_mask
        if fm.any():
            m = self.mass[fm]
            if not np.allclose(m, m[0]):
                raise FluidError("fluid particle masses must be uniform")


def sample_box_surface(extent, spacing: float) -> np.ndarray:
    """Boundary-sample the surface of a box (local frame, centered) at the
    given spacing. Corners/edges deduplicated."""
    ex = np.asarray(extent, dtype=np.float64) / 2.0
    counts = np.maximum(2, np.round(np.asarray(extent) / spacing).astype(int) + 1)
    axes = [np.linspace(-ex[k], ex[k], counts[k]) for k in range(3)]
    pts = []
    for fixed_axis in range(3):
        for side in (-ex[fixed_axis], ex[fixed_axis]):
            other = [a for k, a in enumerate(axes) if k != fixed_axis]
            uu, vv = np.meshgrid(*other, indexing="ij")
            face = np.zeros((uu.size, 3))
            face[:, fixed_axis] = side
            rest = [k for k in range(3) if k != fixed_axis]
            face[:, rest[0]] = uu.ravel()
            face[:, rest[1]] = vv.ravel()
            pts.append(face)
    pts = np.vstack(pts)
    # dedupe shared edges/corners
    key = np.round(pts / (spacing * 1e-6)).astype(np.int64)
    _, keep = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(keep)]


class NeighborGrid:
    """Uniform spatial hash over a position snapshot; cell size = h."""

    def __init__(self, positions: np.ndarray, h: float, lo, hi):
        if h <= 0:
            raise ValueError("cell size h must be > 0")
        self.h = float(h)
        self.origin = np.asarray(lo, dtype=np.float64) - 2.0 * h
        top = np.asarray(hi, dtype=np.float64) + 2.0 * h
        dims = np.maximum(1, np.ceil((top - self.origin) / h).astype(int))
        self.nx, self.ny, self.nz = int(dims[0]), int(dims[1]), int(dims[2])
        self.snapshot = np.array(positions, dtype=np.float64, copy=True)
        ids = _pbf.cell_indices(self.snapshot, self.origin, 1.0 / h,
                                self.nx, self.ny, self.nz)
        self.order = np.argsort(ids, kind="stable").astype(np.int64)
        ncells = self.nx * self.ny * self.nz
        counts = np.bincount(ids, minlength=ncells)
        self.cell_end = np.cumsum(counts).astype(np.int64)
        self.cell_start = self.cell_end - counts

    def matches(self, positions: np.ndarray) -> bool:
        return (positions.shape == self.snapshot.shape
                and np.array_equal(positions, self.snapshot))

    def query(self, i: int) -> np.ndarray:
        """Indices of particles strictly within h of particle i (self excluded)."""
        p = self.snapshot[i]
        c = np.floor((p - self.origin) / self.h).astype(int)
        c = np.clip(c, 0, [self.nx - 1, self.ny - 1, self.nz - 1])
        found = []
        for dz in (-1, 0, 1):
            zc = c[2] + dz
            if zc < 0 or zc >= self.nz:
                continue
            for dy in (-1, 0, 1):
                yc = c[1] + dy
                if yc < 0 or yc >= self.ny:
                    continue
                for dx in (-1, 0, 1):
                    xc = c[0] + dx
                    if xc < 0 or xc >= self.nx:
                        continue
                    cid = (zc * self.ny + yc) * self.nx + xc
                    found.extend(self.order[self.cell_start[cid]:self.cell_end[cid]])
        found = np.array(sorted(found), dtype=np.int64)
        d = np.linalg.norm(self.snapshot[found] - p, axis=1)
        found = found[(d < self.h)]
        return found[found != i]


def compute_density(i: int, particles: ParticleSet, grid: NeighborGrid,
                    params: FluidParams) -> float:
    """Density at particle i over the grid snapshot (self term included)."""
    if not grid.matches(particles.pos):
        raise StaleGridError("neighbor grid does not match current positions")
    h = params.h
    rho = particles.wweight[i] * particles.mass[i] * kernel_w(np.zeros(3), h)
    for j in grid.query(i):
        w = kernel_w(particles.pos[i] - particles.pos[j], h)
        rho += particles.wweight[j] * particles.mass[j] * w
    return float(rho)


def density_constraint(rho: float, rho0: float) -> float:
    """C = rho/rho0 - 1; the solver corrects only when C > 0."""
    if rho0 <= 0:
        raise ValueError("rest density must be > 0")
    return rho / rho0 - 1.0


@dataclass
class CouplingImpulses:
    """Per-boundary-particle momentum transfers from one solve substep."""
    indices: np.ndarray      # boundary particle indices
    owners: np.ndarray       # owning body id per entry
    impulses: np.ndarray     # (n,3) kg m/s
    points: np.ndarray       # (n,3) application points (world)

    def for_owner(self, owner: int):
        m = self.owners == owner
        return self.impulses[m], self.points[m]

    def total_momentum(self) -> np.ndarray:
        return self.impulses.sum(axis=0) if len(self.impulses) else np.zeros(3)


class FluidSolver:
    """Owns the PBD projection loop for one tank of particles."""

    def __init__(self, particles: ParticleSet, params: FluidParams,
                 tank_lo, tank_hi, open_top: bool = True):
        particles.validate()
        self.particles = particles
        self.params = params
        self.lo = np.asarray(tank_lo, dtype=np.float64)
        self.hi = np.asarray(tank_hi, dtype=np.float64)
        self.open_top = open_top
        self.fluid_mass = calibrated_particle_mass(params.rest_density,
                                                   params.spacing, params.h)
        self.eps_abs = params.relaxation * self._reference_denominator()
        self._grid = None
        self._last_lists = None
        self.last_densities = None

    def _reference_denominator(self) -> float:
        """Constraint denominator of a fully-surrounded lattice particle;
        scales the relative relaxation into absolute units."""
        h, dx = self.params.h, self.params.spacing
        m = calibrated_particle_mass(self.params.rest_density, dx, h)
        reach = int(np.ceil(h / dx))
        grad_sum = np.zeros(3)
        denom = 0.0
        for ix in range(-reach, reach + 1):
            for iy in range(-reach, reach + 1):
                for iz in range(-reach, reach + 1):
                    if ix == iy == iz == 0:
                        continue
                    r = np.array([ix, iy, iz], dtype=np.float64) * dx
                    g = kernel_grad_w(r, h) * m
                    grad_sum += g
                    denom += float(g @ g) / m
        rho0 = self.params.rest_density
        return (float(grad_sum @ grad_sum) / m + denom) / (rho0 * rho0)

    def build_grid(self, positions: np.ndarray) -> NeighborGrid:
        self._grid = NeighborGrid(positions, self.params.h, self.lo, self.hi)
        return self._grid

    def _neighbor_lists(self, positions: np.ndarray):
        """CSR candidate lists with a 5% padded radius, rebuilt per substep."""
        grid = self.build_grid(positions)
        n = positions.shape[0]
        r2max = (1.05 * self.params.h) ** 2
        counts = np.zeros(n, dtype=np.int64)
        inv_cell = 1.0 / self.params.h
        _pbf.count_neighbors(positions, grid.order, grid.cell_start,
                             grid.cell_end, grid.origin, inv_cell,
                             grid.nx, grid.ny, grid.nz, r2max, counts)
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        nbr = np.empty(offsets[-1], dtype=np.int64)
        _pbf.fill_neighbors(positions, grid.order, grid.cell_start,
                            grid.cell_end, grid.origin, inv_cell,
                            grid.nx, grid.ny, grid.nz, r2max, offsets, nbr)
        return offsets, nbr

    def solve_step(self, external_accel, dt: float) -> CouplingImpulses:
        """One PBD substep: predict, project `iterations` times, finish
        velocities. Returns boundary coupling impulses for this substep."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        p = self.particles
        n = len(p)
        params = self.params
        h = params.h
        if not (np.all(np.isfinite(p.pos)) and np.all(np.isfinite(p.vel))):
            bad = int(np.nonzero(~np.isfinite(p.pos).all(axis=1)
                                 | ~np.isfinite(p.vel).all(axis=1))[0][0])
            raise FluidError(f"non-finite particle state entering solve "
                             f"(first at index {bad} of {n}); snapshot on "
                             "solver.particles")
        accel = np.asarray(external_accel, dtype=np.float64)

        fm = p.fluid_mask
        p.vel[fm] += accel * dt
        pred = p.pos.copy()
        pred[fm] += p.vel[fm] * dt

        offsets, nbr = self._neighbor_lists(pred)
        lam = np.zeros(n)
        dens = np.zeros(n)
        dx_fluid = np.zeros((n, 3))
        dx_bound = np.zeros((n, 3))

        for _ in range(params.iterations):
            _pbf.lambda_pass(pred, p.mass, p.wweight, p.phase, offsets, nbr,
                             h, params.rest_density, self.eps_abs, lam, dens)
            dx_fluid[:] = 0.0
            _pbf.delta_pass(pred, p.mass, p.wweight, p.phase, lam, offsets,
                            nbr, h, params.rest_density, 0.1 * h, dx_fluid,
                            dx_bound)
            _pbf.apply_corrections(pred, p.phase, dx_fluid, self.lo, self.hi,
                                   self.open_top)

        if not np.all(np.isfinite(pred)):
            raise FluidError("fluid solver produced non-finite positions "
                             f"(n={n}, dt={dt}); diagnostic snapshot available "
                             "on solver.particles")
        if params.cohesion > 0.0:
            coh = np.zeros((n, 3))
            _pbf.cohesion_accel(pred, p.mass, p.phase, offsets, nbr, h,
                                params.rest_density, params.cohesion, coh)
            p.vel += coh * dt

        _pbf.finish_velocities(p.pos, pred, p.vel, p.phase, 1.0 / dt)
        if params.xsph > 0.0:
            smoothed = np.empty_like(p.vel)
            _pbf.xsph_pass(p.pos, p.vel, p.mass, p.phase, offsets, nbr, h,
                           params.rest_density, params.xsph, smoothed)
            p.vel = smoothed
        self._last_lists = (offsets, nbr)
        self.last_densities = dens

        bidx = np.nonzero(p.solid_mask)[0]
        moved = dx_bound[bidx]
        nz = np.any(moved != 0.0, axis=1)
        bidx = bidx[nz]
        impulses = (p.mass[bidx, None] * dx_bound[bidx]) / dt
        return CouplingImpulses(bidx, p.owner[bidx], impulses, p.pos[bidx].copy())

    def wet_counts(self, fresh: bool = False) -> np.ndarray:
        """Fluid-neighbor counts for every non-fluid particle. By default
        reuses the last substep's candidate lists (positions have moved by far
        less than the list padding); pass fresh=True after teleporting
        bodies outside the solve loop."""
        p = self.particles
        if fresh or getattr(self, "_last_lists", None) is None:
            offsets, nbr = self._neighbor_lists(p.pos)
        else:
            offsets, nbr = self._last_lists
        counts = np.zeros(len(p), dtype=np.int64)
        _pbf.fluid_neighbor_counts(p.pos, p.phase, offsets, nbr,
                                   self.params.h, counts)
        return counts

    def interior_mask(self, band_factor: float = 2.0) -> np.ndarray:
        """Fluid particles >= band below the free surface and away from walls.

        Wall-adjacent and free-surface neighborhoods are kernel-deficient by
        construction (no wall boundary sampling, open top), so incompressibility
        is a meaningful statement only over this interior set.
        """
        p = self.particles
        band = band_factor * self.params.h
        fm = p.fluid_mask
        if not fm.any():
            return fm
        surface_z = p.pos[fm, 2].max()
        m = fm.copy()
        m &= p.pos[:, 2] < surface_z - band
        for k in range(2):
            m &= p.pos[:, k] > self.lo[k] + band
            m &= p.pos[:, k] < self.hi[k] - band
        m &= p.pos[:, 2] > self.lo[2] + band
        return m

    def density_error_stats(self):
        """(mean |C|, max |C|) over interior fluid at the current positions."""
        p = self.particles
        offsets, nbr = self._neighbor_lists(p.pos)
        lam = np.zeros(len(p))
        dens = np.zeros(len(p))
        _pbf.lambda_pass(p.pos, p.mass, p.wweight, p.phase, offsets, nbr,
                         self.params.h, self.params.rest_density, self.eps_abs,
                         lam, dens)
        mask = self.interior_mask()
        if not mask.any():
            return 0.0, 0.0
        c = np.abs(dens[mask] / self.params.rest_density - 1.0)
        return float(c.mean()), float(c.max())


class Wavemaker:
    """Kinematic piston plane: displacement A sin(2 pi f t) along +x.

    Keeps its own phase clock so wave warm-up before a scenario run carries
    over seamlessly into the run.
    """

    def __init__(self, particles: ParticleSet, indices: np.ndarray,
                 amplitude: float, frequency: float):
        self.particles = particles
        self.indices = np.asarray(indices, dtype=np.int64)
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.rest_x = particles.pos[self.indices, 0].copy()
        self.t = 0.0

    def displacement(self, t: float) -> float:
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t)

    def velocity(self, t: float) -> float:
        w = 2.0 * np.pi * self.frequency
        return self.amplitude * w * np.cos(w * t)

    def step(self, t: float):
        self.t = float(t)
        self.particles.pos[self.indices, 0] = self.rest_x + self.displacement(t)
        self.particles.vel[self.indices, 0] = self.velocity(t)

    def advance(self, dt: float):
        self.step(self.t + dt)


def wavemaker_step(wavemaker: Wavemaker, t: float):
    wavemaker.step(t)


def build_wavemaker_particles(particles: ParticleSet, tank_lo, tank_hi,
                              spacing: float, mass: float, x_plane: float,
                              wweight: float = 1.0) -> np.ndarray:
    """Two layers of boundary samples spanning the tank cross-section."""
    lo = np.asarray(tank_lo, dtype=np.float64)
    hi = np.asarray(tank_hi, dtype=np.float64)
    ys = np.arange(lo[1] + spacing / 2, hi[1], spacing)
    zs = np.arange(lo[2] + spacing / 2, hi[2], spacing)
    pts = []
    for layer in (0.0, -spacing):
        yy, zz = np.meshgrid(ys, zs, indexing="ij")
        block = np.column_stack([np.full(yy.size, x_plane + layer),
                                 yy.ravel(), zz.ravel()])
        pts.append(block)
    pts = np.vstack(pts)
    return particles.add(pts, np.zeros(3), mass, PHASE_WAVEMAKER,
                         OWNER_WAVEMAKER, wweight)
