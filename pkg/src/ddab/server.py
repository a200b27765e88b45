"""Interactive play server: a human drives the attacker over a socket.

The human sees the whole board (the attacker has full information); the
defender side runs the implemented policy and answers every attacker
move immediately, so the client always renders cause -> response pairs.
All legality lives server-side: a client message can only select among
the legal moves the server itself advertised.

Message protocol (JSON over one bidirectional channel):
  client -> server: {"type": "new", "config": {...}}
                    {"type": "move", "session": id, "flows": [[src, dst, amt], ...]}
                    {"type": "export", "session": id}
  server -> client: {"type": "state", ...} | {"type": "trace", ...}
                    | {"type": "error", "reason": ...}
"""

from __future__ import annotations

import asyncio
import http
import json
import time
import uuid
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from ddab.adversary import SPLIT_MENU, ExternalStrategy
from ddab.engine import Game, GameConfig
from ddab.graph import EnvironmentError_, InputError, environment_from_dict, environment_to_dict
from ddab.policy import compute_advantages, required_assets
from ddab.state import Flow, IllegalMoveError, ProtocolError, observe_group, rational, rational_str

SESSION_TTL_SECONDS = 3600.0


@dataclass
class Session:
    id: str
    game: Game
    strategy: ExternalStrategy
    fractional: bool
    log: list[dict] = field(default_factory=list)
    last_used: float = field(default_factory=time.monotonic)
    last_attacker_flows: list[list[str]] = field(default_factory=list)
    last_defender_flows: list[list[str]] = field(default_factory=list)

    def legal_moves(self) -> list[dict]:
        """Every move plan the attacker may submit right now."""
        if self.game.outcome is not None:
            return []
        moves = []
        env = self.game.env
        for g in sorted(self.game.state.groups, key=lambda g: g.label):
            dests = sorted(env.graph.neighbors(g.node)) + [g.node]
            for dst in dests:
                moves.append(
                    {
                        "group": g.label,
                        "flows": [[g.node, dst, rational_str(g.amount)]],
                        "kind": "stay" if dst == g.node else "step",
                    }
                )
            if self.fractional:
                for share in sorted(set(SPLIT_MENU)):
                    for a in dests:
                        for b in dests:
                            if a >= b:
                                continue
                            first = g.amount * share
                            second = g.amount * (1 - share)
                            moves.append(
                                {
                                    "group": g.label,
                                    "flows": [
                                        [g.node, a, rational_str(first)],
                                        [g.node, b, rational_str(second)],
                                    ],
                                    "kind": "split",
                                }
                            )
        for i, m in enumerate(moves):
            m["id"] = i
        return moves


class SessionNotFound(KeyError):
    pass


class SessionManager:
    """Owns live sessions; all game legality checks happen here."""

    def __init__(self, ttl: float = SESSION_TTL_SECONDS):
        self.ttl = ttl
        self.sessions: dict[str, Session] = {}

    def _expire(self) -> None:
        now = time.monotonic()
        for sid in [s for s, sess in self.sessions.items() if now - sess.last_used > self.ttl]:
            del self.sessions[sid]

    def create_session(self, config: dict) -> dict:
        for key in ("environment", "k", "X", "Y", "start"):
            if key not in config:
                raise InputError(f"session config missing {key!r}")
        env = environment_from_dict(config["environment"])
        strategy = ExternalStrategy(start=config["start"])
        cfg = GameConfig(
            env=env,
            k=int(config["k"]),
            defender_total=rational(config["X"]),
            attacker_total=rational(config["Y"]),
            strategy=strategy,
            max_steps=config.get("max_steps"),
        )
        game = Game(cfg)
        session = Session(
            id=uuid.uuid4().hex,
            game=game,
            strategy=strategy,
            fractional=bool(config.get("fractional", False)),
        )
        session.log.append({"type": "new", "config": config})
        # The defender opens every timestep; play it so the human chooses
        # with the defender's answer to the initial observation on board.
        if game.outcome is None:
            plan = game.defender_phase()
            session.last_defender_flows = plan.to_wire()
        self.sessions[session.id] = session
        self._expire()
        return self.view(session)

    def _session(self, session_id: str) -> Session:
        self._expire()
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        session.last_used = time.monotonic()
        return session

    def submit_move(self, session_id: str, flows: list) -> dict:
        session = self._session(session_id)
        game = session.game
        if game.outcome is not None:
            raise ProtocolError("session already finished")
        chosen = [[str(src), str(dst), rational_str(rational(a))] for src, dst, a in flows]
        legal = session.legal_moves()
        match = next((m for m in legal if sorted(m["flows"]) == sorted(chosen)), None)
        if match is None:
            raise IllegalMoveError("move is not in the advertised legal set")
        session.log.append({"type": "move", "session": session_id, "flows": chosen})
        group_flows = {
            match["group"]: [Flow(src, dst, rational(a)) for src, dst, a in match["flows"]]
        }
        plan = game.attacker_phase(group_flows)
        session.last_attacker_flows = plan.to_wire()
        session.last_defender_flows = []
        game.evaluate_phase()
        if game.outcome is None:
            answer = game.defender_phase()
            session.last_defender_flows = answer.to_wire()
        return self.view(session)

    def export_trace(self, session_id: str) -> dict:
        session = self._session(session_id)
        records = list(session.game.trace.records)
        if session.game.outcome is None:
            # Live sessions have no outcome record yet; export what exists.
            pass
        return {"type": "trace", "session": session_id, "records": records}

    def view(self, session: Session) -> dict:
        game = session.game
        env = game.env
        k = game.k
        advantages = {}
        for sub in game.subgames:
            group = next((g for g in game.state.groups if g.label == sub.label), None)
            if group is None:
                continue
            obs = observe_group(group, env, k)
            report = compute_advantages(env, game.scheme, sub.platoons, obs)
            advantages[sub.label] = [r.to_wire() for r in report.rows]
        bound = required_assets(len(env.path), k, game.cfg.attacker_total)
        return {
            "type": "state",
            "session": session.id,
            "t": game.state.t,
            "environment": environment_to_dict(env),
            "d_star": {v: env.path_distance(v) for v in env.graph.nodes},
            "k": k,
            "X": rational_str(game.cfg.defender_total),
            "Y": rational_str(game.cfg.attacker_total),
            "guarantee": game.cfg.defender_total >= bound,
            "defender_amounts": game.state.defender.to_wire(),
            "attacker_amounts": game.state.attacker.to_wire(),
            "groups": [[g.label, g.node, rational_str(g.amount)] for g in game.state.groups],
            "platoon_centers": {s.label: list(s.platoons.centers) for s in game.subgames},
            "advantages": advantages,
            "visibility": sorted(env.visibility_region(k).members),
            "legal_moves": session.legal_moves(),
            "last_attacker_flows": session.last_attacker_flows,
            "last_defender_flows": session.last_defender_flows,
            "outcome": None
            if game.outcome is None
            else {
                "result": game.outcome.result,
                "win_step": game.outcome.win_step,
                "witness": game.outcome.witness,
            },
        }

    def handle(self, message: dict) -> dict:
        """Dispatch one client message; errors come back as messages."""
        try:
            kind = message.get("type")
            if kind == "new":
                return self.create_session(message.get("config", {}))
            if kind == "move":
                return self.submit_move(message.get("session", ""), message.get("flows", []))
            if kind == "export":
                return self.export_trace(message.get("session", ""))
            return {"type": "error", "reason": f"unknown message type {kind!r}"}
        except SessionNotFound as exc:
            return {"type": "error", "reason": "not-found", "session": str(exc)}
        except (IllegalMoveError, ProtocolError, InputError, EnvironmentError_, ValueError) as exc:
            return {"type": "error", "reason": str(exc)}


MIME = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".svg": "image/svg+xml",
}


def _static_response(ui_dir: str | None, path: str):
    from websockets.datastructures import Headers
    from websockets.http11 import Response

    if path in ("/ws", ""):
        return None
    if ui_dir is None:
        body = b"ddab play server: websocket endpoint at /ws\n"
        return Response(
            http.HTTPStatus.OK, "OK", Headers([("Content-Type", "text/plain")]), body
        )
    name = "index.html" if path in ("/", "/index.html") else path.lstrip("/")
    target = (Path(ui_dir) / name).resolve()
    root = Path(ui_dir).resolve()
    if root not in target.parents and target != root or not target.is_file():
        return Response(
            http.HTTPStatus.NOT_FOUND, "Not Found", Headers([("Content-Type", "text/plain")]), b"not found\n"
        )
    mime = MIME.get(target.suffix, "application/octet-stream")
    return Response(
        http.HTTPStatus.OK, "OK", Headers([("Content-Type", mime)]), target.read_bytes()
    )


async def serve_sessions(manager: SessionManager, host: str, port: int, ui_dir: str | None = None):
    """Run the websocket endpoint (at /ws) plus the static UI files."""
    from websockets.asyncio.server import serve

    async def handler(connection):
        async for raw in connection:
            try:
                message = json.loads(raw)
            except json.JSONDecodeError:
                await connection.send(json.dumps({"type": "error", "reason": "not JSON"}))
                continue
            reply = manager.handle(message)
            await connection.send(json.dumps(reply, sort_keys=True))

    def process_request(connection, request):
        return _static_response(ui_dir, request.path)

    return await serve(handler, host, port, process_request=process_request)


def serve_forever(host: str, port: int, ui_dir: str | None = None) -> None:
    async def run():
        manager = SessionManager()
        server = await serve_sessions(manager, host, port, ui_dir)
        print(f"ddab play server listening on ws://{host}:{port}/ws")
        await server.serve_forever()

    asyncio.run(run())
