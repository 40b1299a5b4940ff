"""Seeded self-chat simulator: two policy-driven agents on a 160ms tick loop.

Every tick each agent observes the conversation so far (a trailing 20s
window) and emits one action. A Listening agent may stay silent or initiate
speech (SPK); a Speaking agent may continue (CON) or stop mid-utterance
(STP). The engine enforces that contract, materializes speech as trace
segments, and is bit-reproducible for a given (config, seed) pair: each agent
draws from its own generator spawned from the run seed via SeedSequence.

Speech always starts on a tick boundary, and generator-drawn response
durations are quantized to whole ticks, which is what makes the
fixed-silence baseline's turn gaps land exactly on its threshold. Scripted
policies may schedule arbitrary-millisecond durations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PolicyContractViolation, ValidationError
from .labeler import Action
from .segments import (
    EMPTY_TRACE,
    TICK_MS,
    ConversationTrace,
    SpeechSegment,
    build_trace,
    speaker_index,
    window,
)

PAUSE_TICKS = 2       # inserted mid-response pauses: 320ms, a countable within-turn pause
MIN_BURST_TICKS = 7   # split bursts stay over the 1s backchannel cutoff
SELF_RESUME_MS = 480  # a speaker re-initiating sooner would merge into its own turn


def _quantize_ms(ms: float) -> int:
    """Round a duration to whole ticks, at least one."""
    return max(1, int(round(ms / TICK_MS))) * TICK_MS


# ------------------------------------------------------------ response draws

@dataclass(frozen=True)
class UniformResponse:
    """Uniform response duration, tick-quantized."""

    min_ms: int = 1600
    max_ms: int = 4000

    def __post_init__(self):
        if not 0 < self.min_ms <= self.max_ms:
            raise ValidationError("need 0 < min_ms <= max_ms")

    def draw(self, rng):
        return _quantize_ms(rng.uniform(self.min_ms, self.max_ms)), None

    def to_dict(self):
        return {"kind": "uniform", "min_ms": self.min_ms, "max_ms": self.max_ms}


@dataclass(frozen=True)
class LogNormalResponse:
    """Log-normal response duration with a configurable mean, tick-quantized.

    min_ms floors the draw; the default keeps full responses above the 1s
    backchannel cutoff so only deliberate backchannels register as such.
    """

    mean_ms: float = 2800.0
    sigma: float = 0.6
    min_ms: int = 1120
    max_ms: int = 15000

    def __post_init__(self):
        if self.mean_ms <= 0 or self.sigma < 0 or not 0 < self.min_ms <= self.max_ms:
            raise ValidationError("bad log-normal response parameters")

    def draw(self, rng):
        mu = math.log(self.mean_ms) - self.sigma**2 / 2.0
        ms = min(max(float(rng.lognormal(mu, self.sigma)), float(self.min_ms)), float(self.max_ms))
        return _quantize_ms(ms), None

    def to_dict(self):
        return {
            "kind": "lognormal",
            "mean_ms": self.mean_ms,
            "sigma": self.sigma,
            "min_ms": self.min_ms,
            "max_ms": self.max_ms,
        }


@dataclass(frozen=True)
class CorpusResponse:
    """Sample raw unit sequences; duration follows the sampled sequence."""

    sequences: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        usable = tuple(
            tuple(int(u) for u in seq)[: len(seq) // 8 * 8]
            for seq in self.sequences
            if len(seq) >= 8
        )
        if not usable:
            raise ValidationError("corpus needs sequences of at least 8 frames")
        object.__setattr__(self, "sequences", usable)

    def draw(self, rng):
        seq = self.sequences[int(rng.integers(len(self.sequences)))]
        return 20 * len(seq), seq

    def to_dict(self):
        return {"kind": "corpus", "sequences": [list(s) for s in self.sequences]}


def response_from_dict(data):
    kind = data.get("kind")
    if kind == "uniform":
        return UniformResponse(int(data["min_ms"]), int(data["max_ms"]))
    if kind == "lognormal":
        return LogNormalResponse(
            mean_ms=float(data.get("mean_ms", 2800.0)),
            sigma=float(data.get("sigma", 0.6)),
            min_ms=int(data.get("min_ms", 1120)),
            max_ms=int(data.get("max_ms", 15000)),
        )
    if kind == "corpus":
        return CorpusResponse(tuple(tuple(s) for s in data["sequences"]))
    raise ValidationError(f"unknown response generator kind {kind!r}")


# ----------------------------------------------------------------- policies

@dataclass(frozen=True)
class CascadedConfig:
    """Fixed-silence-threshold turn taking: answer once the line has been
    quiet long enough; never barge in, never stop early."""

    eot_silence_ms: int = 800
    response_min_ms: int = 1600
    response_max_ms: int = 4000

    kind = "cascaded"

    def __post_init__(self):
        if self.eot_silence_ms < 0:
            raise ValidationError("eot_silence_ms must be non-negative")

    def to_dict(self):
        return {
            "kind": self.kind,
            "eot_silence_ms": self.eot_silence_ms,
            "response_min_ms": self.response_min_ms,
            "response_max_ms": self.response_max_ms,
        }

    def default_response(self):
        return UniformResponse(self.response_min_ms, self.response_max_ms)


@dataclass(frozen=True)
class StochasticConfig:
    """Duplex-style behavior: backchannels while listening, probabilistic
    initiation after short mutual silence, stop-on-overlap, and mid-response
    pause insertion. Defaults were frozen from a seeded calibration run
    (scripts/calibrate_stochastic.py)."""

    p_backchannel_per_tick: float = 0.007
    backchannel_ms: int = 480
    p_initiate_per_tick_after_gap: float = 0.25
    min_gap_ticks: int = 1
    p_stop_on_overlap_per_tick: float = 0.03
    pause_insertion_rate: float = 0.46

    kind = "stochastic"

    def __post_init__(self):
        for name in (
            "p_backchannel_per_tick",
            "p_initiate_per_tick_after_gap",
            "p_stop_on_overlap_per_tick",
            "pause_insertion_rate",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {p}")
        if self.backchannel_ms <= 0 or self.min_gap_ticks < 0:
            raise ValidationError("bad stochastic policy durations")

    def to_dict(self):
        return {
            "kind": self.kind,
            "p_backchannel_per_tick": self.p_backchannel_per_tick,
            "backchannel_ms": self.backchannel_ms,
            "p_initiate_per_tick_after_gap": self.p_initiate_per_tick_after_gap,
            "min_gap_ticks": self.min_gap_ticks,
            "p_stop_on_overlap_per_tick": self.p_stop_on_overlap_per_tick,
            "pause_insertion_rate": self.pause_insertion_rate,
        }

    def default_response(self):
        return LogNormalResponse()


@dataclass(frozen=True)
class ScriptedConfig:
    """Explicit tick -> action table; unlisted ticks take the idle action
    (SIL when listening, CON when speaking). SPK entries carry a duration."""

    steps: tuple  # of (tick, action_name, duration_ms or None)

    kind = "scripted"

    def to_dict(self):
        return {"kind": self.kind, "steps": [list(s) for s in self.steps]}

    def default_response(self):
        return UniformResponse()


def policy_config_from_dict(data):
    kind = data.get("kind")
    if kind == "cascaded":
        return CascadedConfig(
            eot_silence_ms=int(data.get("eot_silence_ms", 800)),
            response_min_ms=int(data.get("response_min_ms", 1600)),
            response_max_ms=int(data.get("response_max_ms", 4000)),
        )
    if kind == "stochastic":
        defaults = StochasticConfig()
        return StochasticConfig(
            **{
                f: type(getattr(defaults, f))(data.get(f, getattr(defaults, f)))
                for f in (
                    "p_backchannel_per_tick",
                    "backchannel_ms",
                    "p_initiate_per_tick_after_gap",
                    "min_gap_ticks",
                    "p_stop_on_overlap_per_tick",
                    "pause_insertion_rate",
                )
            }
        )
    if kind == "scripted":
        return ScriptedConfig(steps=tuple(tuple(s) for s in data["steps"]))
    raise ValidationError(f"unknown policy kind {kind!r}")


@dataclass
class Observation:
    """What one agent sees at a tick: cheap summaries of the conversation so
    far, plus the full trailing context window on demand."""

    now_ms: int
    other_speaking: bool          # other's utterance covers the instant now_ms
    other_has_spoken: bool        # other has at least one finished segment
    other_last_end_ms: int | None # end of other's latest finished segment
    own_last_end_ms: int | None   # end of own latest finished segment
    mutual_silence_ms: int | None # trailing silence on both channels; None = nothing yet
    _window: object = None        # lazy builder

    @property
    def context(self) -> ConversationTrace:
        return self._window()


@dataclass
class AgentState:
    """Engine-visible agent state plus policy scratch space."""

    rng: np.random.Generator
    is_opener: bool = False
    utterance_start_ms: int | None = None
    planned_end_ms: int | None = None
    utterance_units: tuple[int, ...] | None = None
    # policy scratch
    answered_end_ms: int | None = None     # cascaded: other-turn already answered
    pending_bursts: list = field(default_factory=list)
    resume_tick: int | None = None

    def mode(self, tick_index: int) -> str:
        """Speaking while the planned utterance extends strictly past the
        tick's end; the final covered chunk already counts as Listening, which
        keeps emitted actions aligned with the labeler's offset convention."""
        covers = (
            self.planned_end_ms is not None
            and self.planned_end_ms > TICK_MS * (tick_index + 1)
        )
        return "Speaking" if covers else "Listening"


_LEGAL = {"Listening": (Action.SIL, Action.SPK), "Speaking": (Action.CON, Action.STP)}


class CascadedPolicy:
    def __init__(self, cfg: CascadedConfig, response):
        self.cfg = cfg
        self.response = response

    def decide(self, obs: Observation, state: AgentState, mode: str):
        if mode == "Speaking":
            return Action.CON, None
        if state.is_opener and obs.mutual_silence_ms is None:
            return Action.SPK, self.response.draw(state.rng)
        if (
            obs.other_has_spoken
            and obs.mutual_silence_ms is not None
            and obs.mutual_silence_ms >= self.cfg.eot_silence_ms
            and obs.other_last_end_ms != state.answered_end_ms
        ):
            state.answered_end_ms = obs.other_last_end_ms
            return Action.SPK, self.response.draw(state.rng)
        return Action.SIL, None


class StochasticPolicy:
    def __init__(self, cfg: StochasticConfig, response):
        self.cfg = cfg
        self.response = response

    def _plan(self, state: AgentState, tick_index: int):
        """Draw a response and split it into bursts separated by 320ms pauses.

        Cut points keep every burst at least MIN_BURST_TICKS long, so split
        bursts never masquerade as backchannels.
        """
        total_ms, units = self.response.draw(state.rng)
        n_ticks = total_ms // TICK_MS
        cuts = []
        prev = 0
        for k in range(MIN_BURST_TICKS, n_ticks - MIN_BURST_TICKS + 1):
            if k - prev >= MIN_BURST_TICKS and state.rng.random() < self.cfg.pause_insertion_rate:
                cuts.append(k)
                prev = k
        bursts = []
        prev = 0
        for cut in cuts + [n_ticks]:
            span = (prev, cut)
            burst_ms = (cut - prev) * TICK_MS
            if units is not None:
                frames_per_tick = TICK_MS // 20
                burst_units = units[prev * frames_per_tick : cut * frames_per_tick]
            else:
                burst_units = None
            bursts.append((burst_ms, burst_units))
            prev = cut
        state.pending_bursts = bursts[1:]
        return bursts[0]

    def _start_burst(self, state: AgentState, tick_index: int, burst):
        burst_ms, _units = burst
        end_tick = tick_index + burst_ms // TICK_MS
        state.resume_tick = end_tick + PAUSE_TICKS if state.pending_bursts else None
        return Action.SPK, burst

    def decide(self, obs: Observation, state: AgentState, mode: str):
        cfg = self.cfg
        if mode == "Speaking":
            if obs.other_speaking and state.rng.random() < cfg.p_stop_on_overlap_per_tick:
                state.pending_bursts = []
                state.resume_tick = None
                return Action.STP, None
            return Action.CON, None
        tick_index = obs.now_ms // TICK_MS
        if state.resume_tick is not None:
            if obs.other_speaking:  # floor was taken mid-pause: yield
                state.pending_bursts = []
                state.resume_tick = None
                return Action.SIL, None
            if tick_index >= state.resume_tick and state.pending_bursts:
                return self._start_burst(state, tick_index, state.pending_bursts.pop(0))
            if not state.pending_bursts:
                state.resume_tick = None
            return Action.SIL, None
        if state.is_opener and obs.mutual_silence_ms is None:
            state.pending_bursts = []
            return self._start_burst(state, tick_index, self._plan(state, tick_index))
        if state.planned_end_ms is not None and state.planned_end_ms > obs.now_ms:
            return Action.SIL, None  # own utterance tail still in flight
        if obs.other_speaking and state.rng.random() < cfg.p_backchannel_per_tick:
            return Action.SPK, (_quantize_ms(cfg.backchannel_ms), None)
        gate_ms = cfg.min_gap_ticks * TICK_MS
        long_enough = obs.mutual_silence_ms is None or obs.mutual_silence_ms >= gate_ms
        # taking the floor: wait long enough after one's own turn that the new
        # utterance cannot read as a continuation of it
        floor_open = (
            obs.own_last_end_ms is None
            or obs.now_ms - obs.own_last_end_ms >= SELF_RESUME_MS
        )
        if long_enough and floor_open and state.rng.random() < cfg.p_initiate_per_tick_after_gap:
            return self._start_burst(state, tick_index, self._plan(state, tick_index))
        return Action.SIL, None


class ScriptedPolicy:
    def __init__(self, cfg: ScriptedConfig, response):
        self.table = {}
        for raw in cfg.steps:
            raw = tuple(raw)
            tick, name = raw[0], raw[1]
            dur = raw[2] if len(raw) > 2 else None
            self.table[int(tick)] = (Action.from_name(name), dur)
        self.response = response

    def decide(self, obs: Observation, state: AgentState, mode: str):
        tick_index = obs.now_ms // TICK_MS
        entry = self.table.get(tick_index)
        if entry is None:
            return (Action.CON if mode == "Speaking" else Action.SIL), None
        action, dur = entry
        if action is Action.SPK:
            if dur is None:
                return Action.SPK, self.response.draw(state.rng)
            return Action.SPK, (int(dur), None)  # scripted durations verbatim
        return action, None


_POLICY_CLASSES = {
    "cascaded": CascadedPolicy,
    "stochastic": StochasticPolicy,
    "scripted": ScriptedPolicy,
}


def make_policy(cfg, response=None):
    if response is None:
        response = cfg.default_response()
    return _POLICY_CLASSES[cfg.kind](cfg, response)


def cascaded_decide(observation, state, cfg: CascadedConfig, response=None) -> Action:
    """One fixed-silence-baseline decision (see CascadedPolicy)."""
    policy = make_policy(cfg, response)
    mode = state.mode(observation.now_ms // TICK_MS)
    return policy.decide(observation, state, mode)[0]


def stochastic_decide(observation, state, cfg: StochasticConfig, response=None) -> Action:
    """One stochastic duplex decision (see StochasticPolicy)."""
    policy = make_policy(cfg, response)
    mode = state.mode(observation.now_ms // TICK_MS)
    return policy.decide(observation, state, mode)[0]


# -------------------------------------------------------------------- engine

@dataclass(frozen=True)
class SimRun:
    """Everything that determines one self-chat run."""

    seed: int
    duration_ms: int = 30000
    agents: tuple = (CascadedConfig(), CascadedConfig())
    responses: tuple = (None, None)          # None -> policy default
    opening_speaker: int | None = None       # who seeds the conversation
    window_ms: int = 20000
    tick_ms: int = TICK_MS

    def __post_init__(self):
        if self.tick_ms != TICK_MS:
            raise ValidationError(f"tick_ms is fixed at {TICK_MS}")
        if self.duration_ms < TICK_MS:
            raise ValidationError(
                f"duration must cover at least one {TICK_MS}ms tick"
            )
        if len(self.agents) != 2 or len(self.responses) != 2:
            raise ValidationError("a run needs exactly two agents")

    def to_dict(self):
        return {
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "opening_speaker": None
            if self.opening_speaker is None
            else "AB"[self.opening_speaker],
            "window_ms": self.window_ms,
            "agents": [
                {
                    "policy": cfg.to_dict(),
                    "response": None if resp is None else resp.to_dict(),
                }
                for cfg, resp in zip(self.agents, self.responses)
            ],
        }

    @classmethod
    def from_dict(cls, data) -> "SimRun":
        agents = []
        responses = []
        for entry in data.get("agents", ({"policy": {"kind": "cascaded"}},) * 2):
            agents.append(policy_config_from_dict(entry["policy"]))
            resp = entry.get("response")
            responses.append(None if resp is None else response_from_dict(resp))
        opening = data.get("opening_speaker")
        return cls(
            seed=int(data["seed"]),
            duration_ms=int(data.get("duration_ms", 30000)),
            agents=tuple(agents),
            responses=tuple(responses),
            opening_speaker=None if opening is None else speaker_index(opening),
            window_ms=int(data.get("window_ms", 20000)),
        )


class SelfChat:
    """Lock-step tick loop over two agents; deterministic for a given run."""

    def __init__(self, run: SimRun):
        self.run = run
        streams = np.random.SeedSequence(run.seed).spawn(2)
        self.states = tuple(
            AgentState(
                rng=np.random.default_rng(streams[i]),
                is_opener=(run.opening_speaker == i),
            )
            for i in (0, 1)
        )
        self.policies = tuple(
            make_policy(run.agents[i], run.responses[i]) for i in (0, 1)
        )
        self.completed: tuple[list, list] = ([], [])
        self.actions: tuple[list, list] = ([], [])
        self.last_committed_end: list[int | None] = [None, None]
        self.tick = 0

    @property
    def n_ticks(self) -> int:
        return self.run.duration_ms // TICK_MS

    def _visible_segments(self, agent: int, horizon_ms: int):
        segs = list(self.completed[agent])
        st = self.states[agent]
        if st.utterance_start_ms is not None:
            end = min(st.planned_end_ms, horizon_ms)
            if end > st.utterance_start_ms:
                segs.append((st.utterance_start_ms, end, st.utterance_units))
        return [(s, min(e, horizon_ms), u) for s, e, u in segs if s < horizon_ms]

    def _visible_end(self, ch: int, now_ms: int):
        """Latest audible instant on a channel as of now_ms (O(1))."""
        end = self.last_committed_end[ch]
        st = self.states[ch]
        if st.utterance_start_ms is not None and st.utterance_start_ms < now_ms:
            live = min(st.planned_end_ms, now_ms)
            end = live if end is None else max(end, live)
        return end

    def _observation(self, agent: int) -> Observation:
        now = self.tick * TICK_MS
        other = 1 - agent
        other_state = self.states[other]
        other_speaking = (
            other_state.utterance_start_ms is not None
            and other_state.utterance_start_ms < now
            and other_state.planned_end_ms > now
        )
        other_last_end = self.last_committed_end[other]
        ends = [self._visible_end(0, now), self._visible_end(1, now)]
        last_activity = max((e for e in ends if e is not None), default=None)
        mutual_silence = None if last_activity is None else now - last_activity
        engine = self

        def build_window():
            if now == 0:
                return EMPTY_TRACE
            trace = engine._trace_until(now)
            return window(trace, now, engine.run.window_ms)

        return Observation(
            now_ms=now,
            other_speaking=other_speaking,
            other_has_spoken=other_last_end is not None,
            other_last_end_ms=other_last_end,
            own_last_end_ms=self.last_committed_end[agent],
            mutual_silence_ms=mutual_silence,
            _window=build_window,
        )

    def _trace_until(self, horizon_ms: int) -> ConversationTrace:
        events = []
        for agent in (0, 1):
            for s, e, units in self._visible_segments(agent, horizon_ms):
                if units is not None:
                    units = units[: (e - s) // 20]
                events.append((agent, SpeechSegment(s, e, units=units)))
        return build_trace(events, horizon_ms)

    def _commit_if_done(self, agent: int, now_ms: int) -> None:
        st = self.states[agent]
        if st.planned_end_ms is not None and st.planned_end_ms <= now_ms:
            self.completed[agent].append(
                (st.utterance_start_ms, st.planned_end_ms, st.utterance_units)
            )
            prev = self.last_committed_end[agent]
            self.last_committed_end[agent] = (
                st.planned_end_ms if prev is None else max(prev, st.planned_end_ms)
            )
            st.utterance_start_ms = None
            st.planned_end_ms = None
            st.utterance_units = None

    def step(self):
        """Advance one tick; returns the (action A, action B) pair."""
        if self.tick >= self.n_ticks:
            raise ValidationError("run already finished")
        now = self.tick * TICK_MS
        tick_end = now + TICK_MS
        for agent in (0, 1):
            self._commit_if_done(agent, now)
        observations = [self._observation(agent) for agent in (0, 1)]
        emitted = []
        for agent in (0, 1):
            state = self.states[agent]
            mode = state.mode(self.tick)
            action, payload = self.policies[agent].decide(
                observations[agent], state, mode
            )
            action = Action(action)
            if action not in _LEGAL[mode]:
                raise PolicyContractViolation(self.tick, "AB"[agent], mode, action)
            if action is Action.SPK:
                self._commit_if_done(agent, tick_end)  # flush any finishing tail
                dur_ms, units = payload
                state.utterance_start_ms = now
                state.planned_end_ms = min(now + dur_ms, self.run.duration_ms)
                state.utterance_units = units
            elif action is Action.STP:
                state.planned_end_ms = tick_end
                if state.utterance_units is not None:
                    keep = (tick_end - state.utterance_start_ms) // 20
                    state.utterance_units = state.utterance_units[:keep]
            emitted.append(action)
            self.actions[agent].append(action)
        self.tick += 1
        return emitted[0], emitted[1]

    def finish(self) -> ConversationTrace:
        for agent in (0, 1):
            self._commit_if_done(agent, self.run.duration_ms)
        return self._trace_until(self.run.duration_ms)


def run_selfchat(run: SimRun) -> ConversationTrace:
    """Run the whole tick loop and return the realized conversation."""
    chat = SelfChat(run)
    for _ in range(chat.n_ticks):
        chat.step()
    return chat.finish()


def cascaded_run(seed: int, duration_ms: int = 30000) -> SimRun:
    """Both sides on the fixed-silence baseline, speaker A opening."""
    return SimRun(
        seed=seed,
        duration_ms=duration_ms,
        agents=(CascadedConfig(), CascadedConfig()),
        opening_speaker=0,
    )


def stochastic_run(seed: int, duration_ms: int = 30000, cfg: StochasticConfig | None = None) -> SimRun:
    cfg = cfg or StochasticConfig()
    return SimRun(
        seed=seed,
        duration_ms=duration_ms,
        agents=(cfg, cfg),
        opening_speaker=None,
    )


def read_run_config(path) -> SimRun:
    with open(path, "r", encoding="utf-8") as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed run config: {exc}") from exc
    return SimRun.from_dict(data)
