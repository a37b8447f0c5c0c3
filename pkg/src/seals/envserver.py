"""MDP wrapper and network stepping protocol.

Observation (17): AAM position (3), orientation quat (4), linear velocity
(3), target position (3), target orientation quat (4). Action: body
velocity command [vx, vy, vz] m/s, optionally extended with arm joint
targets and a gripper command for teleoperation.

Rewards fall into three distance regions (d measured gripper to target
with a grasp-clearance height offset): outer d > 1: exp(-d); inner
d_t < d <= 1: 1/d; success d <= d_t: 1000/d_t. Over-speed adds -5;
leaving the success region inside the grace window adds -1000/d_t.

Protocol: line-delimited JSON over TCP, and the same messages over
WebSocket (port+1) for browsers. One controller at a time, any number of
view subscribers.
"""

import asyncio
import json
import threading

import numpy as np

from .config import ConfigNode, load_scenario
from .control import ControllerCommand
from .demofile import DemoRecorder, EnvTransition, read_demo
from .world import World

OBS_SIZE = 17


class ProtocolError(RuntimeError):
    pass


def reward(d: float, d_t: float, speed: float, success_exit: bool,
           velocity_threshold: float = 2.0) -> float:
    """Piecewise distance reward with speed and success-exit penalties.

    Region membership: d = 1 belongs to the inner region, d = d_t to the
    success region. Deliberately discontinuous at both boundaries.
    """
    if d < 0 or d_t <= 0:
        raise ValueError("d >= 0 and d_t > 0 required")
    if d <= d_t:
        r = 1000.0 / d_t
    elif d <= 1.0:
        r = 1.0 / d
    else:
        r = float(np.exp(-d))
    if speed > velocity_threshold:
        r -= 5.0
    if success_exit:
        r -= 1000.0 / d_t
    return r


class AamEnv:
    """Deterministic episode wrapper around the world."""

    def __init__(self, cfg: ConfigNode):
        self.cfg = cfg
        self.world: World | None = None
        self.step_count = 0
        self.done = True
        self._in_success = False
        self._success_entry_step = -1

    # ------------------------------------------------------------ lifecycle

    def reset(self, seed: int | None = None) -> np.ndarray:
        cfg = self.cfg
        if seed is not None:
            cfg.seed = int(seed)
        self.world = World(cfg)
        if self.world.solver is not None:
            self.world.settle_fluid(max_time=cfg.task.settle_time,
                                    target_mean_c=0.02)
        if cfg.task.type == "reach":
            self._spawn_reach()
        self.step_count = 0
        self.done = False
        self._in_success = False
        self._success_entry_step = -1
        return self.observation()

    def _spawn_reach(self):
        """Reach task: fixed target, AAM spawned on a seeded circle."""
        world = self.world
        target = np.array([0.0, 0.0, 0.6])
        world.target_body = None
        world._reach_target = target
        angle = world.rng.uniform(0.0, 2.0 * np.pi)
        radius = self.cfg.task.spawn_radius
        world.aam.state.position = target + np.array(
            [radius * np.cos(angle), radius * np.sin(angle), 0.35])

    def observation(self) -> np.ndarray:
        w = self.world
        target_p = getattr(w, "_reach_target", None)
        if target_p is None:
            target_p = w.target_position()
            target_q = w.target_orientation()
        else:
            target_q = np.array([1.0, 0.0, 0.0, 0.0])
        s = w.aam.state
        return np.concatenate([s.position, s.orientation, s.velocity,
                               target_p, target_q])

    def _distance(self) -> float:
        w = self.world
        target_p = getattr(w, "_reach_target", None)
        if target_p is not None:
            approach = target_p + np.array([0.0, 0.0, self.cfg.env.height_offset])
            return float(np.linalg.norm(w.gripper_tip_world() - approach))
        return w.gripper_distance()

    # ------------------------------------------------------------- stepping

    def step(self, action) -> EnvTransition:
        if self.done:
            raise ProtocolError("step() after episode end; call reset first")
        cfg = self.cfg
        action = np.asarray(action, dtype=np.float64).ravel()
        limit = cfg.env.velocity_limit
        v_cmd = action[:3]
        clipped = bool(np.any(np.abs(v_cmd) > limit))
        v_cmd = np.clip(v_cmd, -limit, limit)

        cmd = ControllerCommand(v_ref=v_cmd)
        if cfg.env.action_includes_arm and action.size >= 7:
            cmd.q_ref = self.world.arm_model.clamp(action[3:6])
            grip = action[6]
            cmd.gripper = "close" if grip < -0.5 else ("open" if grip > 0.5 else "hold")

        self.world.step(cmd)
        self.step_count += 1

        d = self._distance()
        speed = float(np.linalg.norm(self.world.aam.state.velocity))
        d_t = cfg.env.success_distance

        success_exit = False
        if d <= d_t:
            if not self._in_success:
                self._in_success = True
                self._success_entry_step = self.step_count
        elif self._in_success:
            if self.step_count - self._success_entry_step <= cfg.env.grace_window:
                success_exit = True
            self._in_success = False

        r = reward(d, d_t, speed, success_exit,
                   cfg.env.velocity_penalty_threshold)

        success = d <= d_t
        truncated = self.step_count >= cfg.episode_length
        self.done = bool(success or truncated)
        info = {"success": bool(success), "distance": d,
                "truncated": bool(truncated and not success)}
        if clipped:
            info["action_clipped"] = True
        obs = self.observation()
        return EnvTransition(obs, np.asarray(action, dtype=np.float64), r,
                             self.done, info)


def replay_demo(path, cfg: ConfigNode | None = None):
    """Re-run a recorded action sequence against the same seed; returns
    (recorded terminal obs, replayed terminal obs)."""
    header, transitions = read_demo(path)
    if cfg is None:
        from .config import scenario_from_dict
        cfg = scenario_from_dict(header.get("config", {}))
    env = AamEnv(cfg)
    env.reset(header["seed"])
    last = None
    for tr in transitions:
        last = env.step(tr.action)
        if last.done:
            break
    recorded = transitions[-1].observation if transitions else None
    replayed = last.observation if last is not None else None
    return recorded, replayed


# ------------------------------------------------------------------ serving

class EnvServer:
    """Stepping protocol server: TCP line JSON on `port`, WebSocket mirror
    on `port + 1`. Single controller, many view subscribers."""

    def __init__(self, cfg: ConfigNode, port: int = 7777):
        self.cfg = cfg
        self.port = port
        self.env = AamEnv(cfg)
        self.controller_id = None
        self.recorder: DemoRecorder | None = None
        self.viewers: dict[int, dict] = {}
        self._client_seq = 0
        self._step_index = 0
        self._lock = asyncio.Lock()
        self._view_queues: dict[int, asyncio.Queue] = {}

    # --------------------------------------------------------- message core

    async def handle(self, client_id: int, msg: dict) -> dict:
        cmd = msg.get("cmd")
        try:
            if cmd == "hello":
                return {"ok": True, "protocol": 1, "dt": self.cfg.dt,
                        "action_limits": [self.cfg.env.velocity_limit] * 3,
                        "episode_length": self.cfg.episode_length,
                        "obs_size": OBS_SIZE}
            if cmd == "reset":
                self._claim_controller(client_id)
                async with self._lock:
                    obs = self.env.reset(msg.get("seed"))
                    self._step_index = 0
                self._broadcast_view()
                return {"obs": obs.tolist(), "reward": 0.0, "done": False,
                        "info": {"reset": True}}
            if cmd == "step":
                self._claim_controller(client_id)
                async with self._lock:
                    tr = self.env.step(np.array(msg["action"], dtype=np.float64))
                    self._step_index += 1
                    if self.recorder is not None:
                        self.recorder.record(tr)
                self._broadcast_view()
                return {"obs": tr.observation.tolist(), "reward": tr.reward,
                        "done": tr.done, "info": tr.info,
                        "step": self._step_index}
            if cmd == "subscribe_view":
                self.viewers[client_id] = {
                    "decimation": int(msg.get("particle_decimation", 10)),
                    "hz": float(msg.get("hz", 20.0)),
                    "last_t": -1e9,
                }
                return {"ok": True, "subscribed": True}
            if cmd == "record":
                self._claim_controller(client_id)
                mode = msg.get("mode")
                if mode == "start":
                    self.recorder = DemoRecorder(
                        msg["path"], self.cfg.name, self.cfg.seed, self.cfg.dt,
                        self.cfg.as_dict())
                    return {"ok": True, "recording": True}
                if mode == "stop":
                    if self.recorder is None:
                        return {"error": "not recording"}
                    n = self.recorder.close()
                    path = self.recorder.path
                    self.recorder = None
                    return {"ok": True, "recording": False,
                            "transitions": n, "path": path}
                return {"error": f"unknown record mode {mode!r}"}
            return {"error": f"unknown command {cmd!r}"}
        except ProtocolError as exc:
            return {"error": str(exc)}
        except (KeyError, TypeError, ValueError) as exc:
            return {"error": f"malformed message: {exc}"}

    def _claim_controller(self, client_id: int):
        if self.controller_id is None:
            self.controller_id = client_id
        elif self.controller_id != client_id:
            raise ProtocolError("another controller is active")

    def release(self, client_id: int):
        if self.controller_id == client_id:
            self.controller_id = None
        self.viewers.pop(client_id, None)
        self._view_queues.pop(client_id, None)

    # ---------------------------------------------------------- view frames

    def view_frame(self, decimation: int) -> dict:
        w = self.env.world
        frame = {"t": w.clock.time if w else 0.0, "step": self._step_index,
                 "bodies": [], "particles": []}
        if w is None:
            return frame
        for i, body in enumerate(w.bodies):
            s = body.state
            frame["bodies"].append({
                "id": s.name, "pose": [*map(float, s.position),
                                       *map(float, s.orientation)]})
        if w.crab is not None:
            frame["crab_joints"] = [float(x) for x in w.crab.q]
        frame["arm_joints"] = [float(x) for x in w.arm.q]
        frame["gripper"] = float(w.arm.aperture)
        if w.solver is not None:
            fl = w.particles.pos[w.particles.fluid_mask][::max(1, decimation)]
            frame["particles"] = np.round(fl, 4).ravel().tolist()
        if not self.env.done and self.env.world is not None:
            frame["distance"] = self.env._distance()
        frame["phi"] = w.aam.medium.submerged_fraction
        return frame

    def _broadcast_view(self):
        if not self.viewers:
            return
        w = self.env.world
        t = w.clock.time if w else 0.0
        for cid, sub in list(self.viewers.items()):
            if t - sub["last_t"] < 1.0 / sub["hz"] - 1e-9:
                continue
            sub["last_t"] = t
            q = self._view_queues.get(cid)
            if q is not None:
                frame = self.view_frame(sub["decimation"])
                # latest-wins: drop a stale frame rather than queue up
                if q.full():
                    try:
                        q.get_nowait()
                    except asyncio.QueueEmpty:
                        pass
                q.put_nowait({"view": frame})

    # ------------------------------------------------------------ transports

    async def _serve_tcp(self):
        async def on_client(reader, writer):
            self._client_seq += 1
            cid = self._client_seq
            q: asyncio.Queue = asyncio.Queue(maxsize=2)
            self._view_queues[cid] = q

            async def pump_views():
                while True:
                    frame = await q.get()
                    writer.write((json.dumps(frame) + "\n").encode())
                    await writer.drain()

            pump = asyncio.create_task(pump_views())
            try:
                while True:
                    line = await reader.readline()
                    if not line:
                        break
                    try:
                        msg = json.loads(line)
                    except json.JSONDecodeError as exc:
                        resp = {"error": f"bad json: {exc}"}
                    else:
                        resp = await self.handle(cid, msg)
                    writer.write((json.dumps(resp) + "\n").encode())
                    await writer.drain()
            finally:
                pump.cancel()
                self.release(cid)
                writer.close()

        return await asyncio.start_server(on_client, "0.0.0.0", self.port)

    async def _serve_ws(self):
        try:
            from websockets.asyncio.server import serve as ws_serve
        except ImportError:
            from websockets import serve as ws_serve

        async def on_client(ws):
            self._client_seq += 1
            cid = self._client_seq
            q: asyncio.Queue = asyncio.Queue(maxsize=2)
            self._view_queues[cid] = q

            async def pump_views():
                while True:
                    frame = await q.get()
                    await ws.send(json.dumps(frame))

            pump = asyncio.create_task(pump_views())
            try:
                async for raw in ws:
                    try:
                        msg = json.loads(raw)
                    except json.JSONDecodeError as exc:
                        resp = {"error": f"bad json: {exc}"}
                    else:
                        resp = await self.handle(cid, msg)
                    await ws.send(json.dumps(resp))
            finally:
                pump.cancel()
                self.release(cid)

        return await ws_serve(on_client, "0.0.0.0", self.port + 1)

    async def run_forever(self):
        tcp = await self._serve_tcp()
        ws = await self._serve_ws()
        async with tcp:
            await asyncio.Future()


def serve(cfg: ConfigNode, port: int = 7777):
    """Blocking entry point for `seals serve`."""
    server = EnvServer(cfg, port)
    asyncio.run(server.run_forever())


class BackgroundServer:
    """Run an EnvServer on a daemon thread (tests and local tooling)."""

    def __init__(self, cfg: ConfigNode, port: int):
        self.server = EnvServer(cfg, port)
        self.loop = asyncio.new_event_loop()
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        asyncio.set_event_loop(self.loop)
        self.loop.run_until_complete(self.server.run_forever())

    def start(self):
        self.thread.start()

    def stop(self):
        self.loop.call_soon_threadsafe(self.loop.stop)
