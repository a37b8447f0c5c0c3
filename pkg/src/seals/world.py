"""World assembly: rigid bodies, fluid tank, boundary sampling, contacts,
and the per-step pipeline that couples them.

Per physics step: run the controller once, then `substeps` fluid substeps.
Each substep integrates the bodies (gravity, rotors, drag, floor contact),
moves their boundary samples kinematically, solves the fluid projection,
and applies the resulting coupling impulses back to the bodies.

The vehicle+arm pair is treated as one composite rigid body whose CoG
shifts with the arm configuration; torques are taken about the current CoG
(thrust moments there are exactly what the allocation matrix encodes).
"""

from dataclasses import dataclass, field

import numpy as np

from .arm import ArmModel, ArmState, fingertip_offsets, forward_kinematics, system_cog
from .config import ConfigNode, make_rng
from .control import Controller, ControllerCommand, ControllerOutput
from .fauna import AnimalModel, Crab
from .fluid import (FluidParams, FluidSolver, ParticleSet, PHASE_SOLID, Wavemaker,
                    build_wavemaker_particles, calibrated_particle_mass,
                    sample_box_surface)
from .math3d import quat_rotate, quat_rotate_inv, quat_to_matrix, vec3
from .media import (DragModel, MediumState, air_drag, apply_coupling,
                    submerged_fraction, thrust_medium_factor)
from .rigidbody import RigidBodyState, SimClock, integrate_rigid_body
from .sensors import Imu
from .vehicle import RotorLayout, wrench_from_speeds

# floor/wall contact model (regularized Coulomb on a spring-damper normal).
# Per-point gains scale with body mass over sample count so every body sees
# the same stable contact rates (omega ~ 100 rad/s, damping rate ~ 50 /s)
# regardless of how light it is or how densely it is sampled.
CONTACT_OMEGA2 = 1.0e4        # (rad/s)^2, all-points-in-contact bound
CONTACT_RATE = 50.0           # 1/s, damping rate bound
CONTACT_FRICTION = 0.6
FRICTION_V_EPS = 0.01         # m/s regularization


def contact_gains(mass: float, n_points: int):
    k = CONTACT_OMEGA2 * mass / max(n_points, 1)
    c = CONTACT_RATE * mass / max(n_points, 1)
    return k, c


@dataclass
class SimBody:
    """A rigid body plus its boundary samples and medium bookkeeping."""
    state: RigidBodyState
    local_points: np.ndarray                  # boundary samples, body frame
    particle_idx: np.ndarray | None = None    # indices into the particle set
    cog_local: np.ndarray = field(default_factory=vec3)
    medium: MediumState = field(default_factory=MediumState)
    contact_enabled: bool = True
    contact_k: float = 600.0
    contact_c: float = 12.0

    def __post_init__(self):
        self.contact_k, self.contact_c = contact_gains(
            self.state.mass, len(self.local_points))

    def world_points(self) -> np.ndarray:
        r = quat_to_matrix(self.state.orientation)
        return self.state.position + self.local_points @ r.T

    def cog_world(self) -> np.ndarray:
        return self.state.position + quat_rotate(self.state.orientation,
                                                 self.cog_local)

    def point_velocities(self, points_world: np.ndarray) -> np.ndarray:
        omega_w = quat_rotate(self.state.orientation, self.state.omega)
        rel = points_world - self.state.position
        return self.state.velocity + np.cross(omega_w, rel)


class World:
    def __init__(self, cfg: ConfigNode):
        self.cfg = cfg
        self.clock = SimClock(cfg.dt, cfg.substeps)
        self.rng = make_rng(cfg)
        self.g = cfg.gravity
        self.g_vec = np.array([0.0, 0.0, -cfg.gravity])

        ext = np.asarray(cfg.tank.extent)
        cx, cy = cfg.tank.center
        self.tank_lo = np.array([cx - ext[0] / 2, cy - ext[1] / 2, 0.0])
        self.tank_hi = np.array([cx + ext[0] / 2, cy + ext[1] / 2, ext[2]])
        self.water_level = cfg.tank.fill

        self.bodies: list[SimBody] = []
        self.particles = ParticleSet()
        self.fluid_params = FluidParams.from_config(cfg.fluid)
        self.particle_mass = calibrated_particle_mass(
            self.fluid_params.rest_density, self.fluid_params.spacing,
            self.fluid_params.h)
        self.solver: FluidSolver | None = None
        self.wavemaker: Wavemaker | None = None

        self._build_robot()
        if cfg.fauna.enabled:
            self._build_crab()
        else:
            self.crab = None
        self.target_body: SimBody | None = None

        if cfg.fluid.enabled:
            self._build_fluid()

        self.thrusters_enabled = True
        self.freeze_aam = False      # park the vehicle (prop-only scenes)
        self.last_controller_output: ControllerOutput | None = None
        self.last_speeds = np.zeros(4)
        self.aam_v_prev = self.aam.state.velocity.copy()
        self.imu = Imu(cfg.sensors.imu_rate, cfg.dt, cfg.gravity,
                       cfg.sensors.imu_noise, cfg.seed)

    # ------------------------------------------------------------- assembly

    def _build_robot(self):
        cfg = self.cfg
        self.layout = RotorLayout.from_config(cfg.robot)
        self.arm_model = ArmModel.from_config(cfg.arm)
        self.arm = ArmState()
        total_mass = cfg.robot.mass + self.arm_model.link_masses.sum()
        self.total_mass = total_mass
        hull = np.asarray(cfg.robot.hull)
        state = RigidBodyState(position=np.asarray(cfg.robot.start, dtype=np.float64),
                               mass=total_mass, inertia=np.diag(cfg.robot.inertia),
                               name="aam")
        pts = sample_box_surface(hull, self.fluid_params.spacing)
        self.aam = SimBody(state, pts)
        self.bodies.append(self.aam)
        self.drag = DragModel(np.asarray(cfg.robot.drag_c))
        self.controller = Controller(self.layout, self.arm_model, cfg,
                                     total_mass, cfg.gravity)
        self.controller.cog_update = cfg.task.cog_update
        self._joint_inertia = cfg.arm.joint_inertia

    def _build_crab(self):
        cfg = self.cfg
        model = AnimalModel.from_config(cfg.fauna)
        pos = np.array([cfg.fauna.position[0], cfg.fauna.position[1],
                        model.tibia_length + model.body_extent[2] / 2 + 0.005])
        self.crab = Crab(model, pos, cfg.gravity)
        pts = sample_box_surface(model.body_extent, self.fluid_params.spacing)
        self.crab_body = SimBody(self.crab.body, pts)
        self.bodies.append(self.crab_body)
        self._prev_feet = self.crab.feet_world()

    def _build_fluid(self):
        cfg = self.cfg
        fill = cfg.tank.fill
        if fill > 0:
            self.particles.add_fluid_block(
                self.tank_lo, [self.tank_hi[0], self.tank_hi[1], fill],
                self.fluid_params.spacing, self.particle_mass)
        for bid, body in enumerate(self.bodies):
            idx = self.particles.add(body.world_points(), np.zeros(3),
                                     self.particle_mass, PHASE_SOLID, bid,
                                     self.fluid_params.boundary_mass_weight)
            body.particle_idx = idx
        if cfg.wavemaker.enabled:
            plane = self.tank_lo[0] + 2.5 * self.fluid_params.spacing
            idx = build_wavemaker_particles(self.particles, self.tank_lo,
                                            [self.tank_hi[0], self.tank_hi[1], fill + 0.25],
                                            self.fluid_params.spacing,
                                            self.particle_mass, plane)
            self.wavemaker = Wavemaker(self.particles, idx,
                                       cfg.wavemaker.amplitude,
                                       cfg.wavemaker.frequency)
        self.solver = FluidSolver(self.particles, self.fluid_params,
                                  self.tank_lo, self.tank_hi)

    def add_box_prop(self, extent, density: float, position,
                     name: str = "prop") -> SimBody:
        """Drop-in rigid box (for buoyancy checks and props)."""
        extent = np.asarray(extent, dtype=np.float64)
        mass = density * extent.prod()
        inertia = np.diag(mass / 12.0 * np.array([
            extent[1] ** 2 + extent[2] ** 2,
            extent[0] ** 2 + extent[2] ** 2,
            extent[0] ** 2 + extent[1] ** 2]))
        state = RigidBodyState(position=np.asarray(position, dtype=np.float64),
                               mass=mass, inertia=inertia, name=name)
        pts = sample_box_surface(extent, self.fluid_params.spacing)
        body = SimBody(state, pts)
        self.bodies.append(body)
        if self.solver is not None:
            idx = self.particles.add(body.world_points(), np.zeros(3),
                                     self.particle_mass, PHASE_SOLID,
                                     len(self.bodies) - 1,
                                     self.fluid_params.boundary_mass_weight)
            body.particle_idx = idx
            # rebuild solver-side views (arrays were reallocated)
            self.solver.particles = self.particles
        return body

    # ------------------------------------------------------------- queries

    def target_position(self) -> np.ndarray:
        if self.crab is not None:
            return self.crab.body.position.copy()
        if self.target_body is not None:
            return self.target_body.state.position.copy()
        return np.zeros(3)

    def target_orientation(self) -> np.ndarray:
        if self.crab is not None:
            return self.crab.body.orientation.copy()
        if self.target_body is not None:
            return self.target_body.state.orientation.copy()
        return np.array([1.0, 0.0, 0.0, 0.0])

    def gripper_tip_world(self) -> np.ndarray:
        ee = forward_kinematics(self.arm_model, self.arm.q)
        tip_local = ee.t + vec3(0, 0, -0.02)
        return self.aam.state.position + quat_rotate(self.aam.state.orientation,
                                                     tip_local)

    def gripper_distance(self) -> float:
        """Gripper-to-target distance with the grasp-clearance height offset."""
        approach = self.target_position() + vec3(0, 0, self.cfg.env.height_offset)
        return float(np.linalg.norm(self.gripper_tip_world() - approach))

    def fingertip_positions(self) -> np.ndarray:
        ee = forward_kinematics(self.arm_model, self.arm.q)
        tips = fingertip_offsets(self.arm_model, self.arm.aperture)
        out = np.zeros((3, 3))
        for i in range(3):
            local = ee.apply(tips[i])
            out[i] = self.aam.state.position + quat_rotate(
                self.aam.state.orientation, local)
        return out

    # ------------------------------------------------------------- stepping

    def _floor_contact(self, body: SimBody):
        """Spring-damper normal + regularized Coulomb friction on the tank
        floor for every boundary sample below it."""
        pts = body.world_points()
        pen = self.tank_lo[2] - pts[:, 2]
        touching = pen > 0.0
        if not np.any(touching):
            return np.zeros(3), np.zeros(3), 0.0
        pw = pts[touching]
        vels = body.point_velocities(pw)
        fn = body.contact_k * pen[touching] - body.contact_c * vels[:, 2]
        fn = np.maximum(fn, 0.0)
        vxy = vels[:, :2]
        speed = np.linalg.norm(vxy, axis=1) + FRICTION_V_EPS
        ft = -CONTACT_FRICTION * fn[:, None] * vxy / speed[:, None]
        forces = np.column_stack([ft[:, 0], ft[:, 1], fn])
        total_f = forces.sum(axis=0)
        cog_w = body.cog_world()
        torque_w = np.cross(pw - cog_w, forces).sum(axis=0)
        return total_f, torque_w, float(fn.sum())

    def _wall_contact(self, body: SimBody):
        """Keep bodies inside the tank walls (x/y) with the same model.
        Penetration is capped so a body far outside the footprint (a parked
        vehicle) does not see runaway spring forces."""
        pts = body.world_points()
        total_f = np.zeros(3)
        torque_w = np.zeros(3)
        cog_w = body.cog_world()
        pen_cap = 3.0 * self.fluid_params.spacing
        for axis in (0, 1):
            for side, wall in ((1.0, self.tank_lo[axis]), (-1.0, self.tank_hi[axis])):
                pen = np.minimum(side * (wall - pts[:, axis]), pen_cap)
                touching = pen > 0.0
                if not np.any(touching):
                    continue
                pw = pts[touching]
                vels = body.point_velocities(pw)
                fn = body.contact_k * pen[touching] \
                    - body.contact_c * side * vels[:, axis]
                fn = np.maximum(fn, 0.0) * side
                forces = np.zeros((len(pw), 3))
                forces[:, axis] = fn
                total_f += forces.sum(axis=0)
                torque_w += np.cross(pw - cog_w, forces).sum(axis=0)
        return total_f, torque_w

    def _aam_forces(self, speeds, medium_factor):
        body = self.aam
        state = body.state
        cog3 = system_cog(self.cfg.robot.mass, self.arm_model, self.arm.q)
        body.cog_local = cog3
        wrench = wrench_from_speeds(speeds, self.layout, cog3[:2], medium_factor)
        force = self.total_mass * self.g_vec.copy()
        force = force + quat_rotate(state.orientation, vec3(0, 0, wrench[0]))
        force = force + air_drag(self.drag, state.velocity,
                                 body.medium.submerged_fraction)
        torque_body = wrench[1:4]
        fc, tc_w, _ = self._floor_contact(body)
        fw, tw_w = self._wall_contact(body)
        force = force + fc + fw
        torque_body = torque_body + quat_rotate_inv(state.orientation, tc_w + tw_w)
        return force, torque_body

    def _crab_forces(self, dt_sub: float):
        crab = self.crab
        body = self.crab_body
        force = crab.body.mass * self.g_vec.copy()
        torque_w = np.zeros(3)
        cog_w = crab.body.position
        feet = crab.feet_world()
        foot_v = (feet - self._prev_feet) / dt_sub
        self._prev_feet = feet
        k_ft, c_ft = contact_gains(crab.body.mass, feet.shape[0])
        for leg in range(feet.shape[0]):
            pen = self.tank_lo[2] - feet[leg, 2]
            if pen <= 0.0:
                continue
            fn = k_ft * pen - c_ft * foot_v[leg, 2]
            fn = max(fn, 0.0)
            vxy = foot_v[leg, :2]
            speed = np.linalg.norm(vxy) + FRICTION_V_EPS
            ft = -CONTACT_FRICTION * fn * vxy / speed
            f = np.array([ft[0], ft[1], fn])
            force += f
            torque_w += np.cross(feet[leg] - cog_w, f)
        fc, tc_w, _ = self._floor_contact(body)
        fw, tw_w = self._wall_contact(body)
        force += fc + fw
        torque_w += tc_w + tw_w
        torque_body = quat_rotate_inv(crab.body.orientation, torque_w)
        return force, torque_body

    def _prop_forces(self, body: SimBody):
        force = body.state.mass * self.g_vec.copy()
        fc, tc_w, _ = self._floor_contact(body)
        fw, tw_w = self._wall_contact(body)
        force += fc + fw
        torque_body = quat_rotate_inv(body.state.orientation, tc_w + tw_w)
        return force, torque_body

    def _sync_boundary_particles(self, dt_sub: float):
        for body in self.bodies:
            if body.particle_idx is None:
                continue
            pts = body.world_points()
            old = self.particles.pos[body.particle_idx]
            self.particles.vel[body.particle_idx] = (pts - old) / dt_sub
            self.particles.pos[body.particle_idx] = pts

    def _apply_impulses(self, impulses):
        for bid, body in enumerate(self.bodies):
            if body.particle_idx is None:
                continue
            imp, pts = impulses.for_owner(bid)
            if len(imp) == 0:
                continue
            agg = apply_coupling(imp, pts, body.cog_world(), 1.0)
            state = body.state
            state.velocity = state.velocity + agg.momentum / state.mass
            torque_imp_body = quat_rotate_inv(state.orientation, agg.torque)
            state.omega = state.omega + np.linalg.solve(state.inertia,
                                                        torque_imp_body)

    def _step_arm(self, joint_torques, finger_setpoint, dt_sub: float):
        arm = self.arm
        arm.q_prev = arm.q.copy()
        arm.qdot = arm.qdot + joint_torques / self._joint_inertia * dt_sub
        # joint friction keeps the kinematic arm from ringing
        arm.qdot *= 0.95
        arm.q = self.arm_model.clamp(arm.q + arm.qdot * dt_sub)
        rate = 4.0 * dt_sub
        delta = np.clip(finger_setpoint - arm.aperture, -rate, rate)
        arm.aperture = float(np.clip(arm.aperture + delta, 0.0, 1.0))

    def step(self, cmd: ControllerCommand | None = None):
        """Advance one physics step (controller once + fluid substeps)."""
        cfg = self.cfg
        dt_sub = self.clock.sub_dt
        t = self.clock.time

        if cmd is not None and self.thrusters_enabled:
            out = self.controller.step(cmd, self.aam.state, self.arm, cfg.dt)
            self.last_controller_output = out
            speeds = out.rotor_speeds
            joint_torques = out.joint_torques
            finger_setpoint = out.finger_setpoint
        else:
            speeds = np.zeros(4)
            joint_torques = np.zeros(3)
            finger_setpoint = self.arm.aperture
        self.last_speeds = speeds

        phi = self.aam.medium.submerged_fraction
        factor = thrust_medium_factor(phi, cfg.robot.thrust_factor_air,
                                      cfg.robot.thrust_factor_water)

        self.aam_v_prev = self.aam.state.velocity.copy()

        for s in range(cfg.substeps):
            if not self.freeze_aam:
                f, tau = self._aam_forces(speeds, factor)
                self.aam.state = integrate_rigid_body(self.aam.state, f, tau,
                                                      dt_sub)
                self._step_arm(joint_torques, finger_setpoint, dt_sub)

            if self.crab is not None:
                targets = self.crab.joint_targets(t + s * dt_sub)
                self.crab.step_joints(targets, dt_sub)
                f, tau = self._crab_forces(dt_sub)
                self.crab.body = integrate_rigid_body(self.crab.body, f, tau, dt_sub)
                self.crab_body.state = self.crab.body

            for body in self.bodies:
                if body is self.aam or (self.crab is not None and body is self.crab_body):
                    continue
                f, tau = self._prop_forces(body)
                body.state = integrate_rigid_body(body.state, f, tau, dt_sub)

            if self.solver is not None:
                if self.wavemaker is not None:
                    self.wavemaker.advance(dt_sub)
                self._sync_boundary_particles(dt_sub)
                impulses = self.solver.solve_step(self.g_vec, dt_sub)
                self._apply_impulses(impulses)

        if self.solver is not None:
            counts = self.solver.wet_counts()
            for body in self.bodies:
                if body.particle_idx is None:
                    continue
                frac = submerged_fraction(counts[body.particle_idx])
                body.medium = body.medium.update(frac, t + cfg.dt)

        self.clock.tick()

    def settle_fluid(self, max_time: float = 4.0, target_mean_c: float = 0.02,
                     run_wavemaker: bool = False) -> float:
        """Pre-roll the fluid (bodies frozen) until the interior density
        error falls under target_mean_c; returns the time spent."""
        if self.solver is None:
            return 0.0
        dt_sub = self.clock.sub_dt
        steps = int(max_time / dt_sub)
        check_every = 50
        for k in range(steps):
            if run_wavemaker and self.wavemaker is not None:
                self.wavemaker.advance(dt_sub)
            self.solver.solve_step(self.g_vec, dt_sub)
            if k % check_every == check_every - 1 and k * dt_sub > 0.3:
                mean_c, _ = self.solver.density_error_stats()
                if mean_c <= target_mean_c:
                    return (k + 1) * dt_sub
        return steps * dt_sub

    def kinematic_acceleration(self) -> np.ndarray:
        return (self.aam.state.velocity - self.aam_v_prev) / self.cfg.dt

    def fingertip_contact_forces(self) -> np.ndarray:
        """Penalty contact force on each fingertip (floor + crab hull)."""
        tips = self.fingertip_positions()
        vels = self.aam.point_velocities(tips)
        forces = np.zeros((3, 3))
        k_tip, c_tip = contact_gains(self.aam.state.mass, 12)
        for i in range(3):
            pen = self.tank_lo[2] - tips[i, 2]
            if pen > 0.0:
                fn = max(k_tip * pen - c_tip * vels[i, 2], 0.0)
                forces[i, 2] += fn
            if self.crab is not None:
                local = quat_rotate_inv(self.crab.body.orientation,
                                        tips[i] - self.crab.body.position)
                half = self.crab.model.body_extent / 2 + 0.01
                d = half - np.abs(local)
                if np.all(d > 0.0):
                    axis = int(np.argmin(d))
                    n = np.zeros(3)
                    n[axis] = np.sign(local[axis])
                    n_world = quat_rotate(self.crab.body.orientation, n)
                    forces[i] += k_tip * d[axis] * n_world
        return forces
