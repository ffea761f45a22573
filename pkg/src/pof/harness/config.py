"""Experiment configuration: JSON, validated against a published schema,
with errors reported as ``file:line: message``."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import jsonschema

from ..channel import PathLossParams, ShadowFieldParams
from ..kinematics import RouteError, read_route_csv
from ..protocol.session import SessionConfig
from ..simnet import AttackScenario, ScenarioError, World
from ..verify import PofParams


class ConfigError(ValueError):
    """Invalid configuration; the message is anchored to a file and line."""


def load_schema() -> dict:
    return json.loads(resources.files("pof.harness").joinpath("config_schema.json").read_text("utf-8"))


_WS = re.compile(r"[ \t\n\r]*")


def value_offsets(text: str) -> dict:
    """Character offset of every value in a JSON document, keyed by path tuple."""
    dec = json.JSONDecoder()
    out = {}

    def skip(i):
        return _WS.match(text, i).end()

    def value(i, path):
        i = skip(i)
        out[path] = i
        c = text[i:i + 1]
        if c == "{":
            i = skip(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = json.decoder.scanstring(text, skip(i) + 1)
                i = skip(i) + 1  # ':'
                i = skip(value(i, path + (key,)))
                if text[i] == "}":
                    return i + 1
                i += 1
        if c == "[":
            i = skip(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = skip(value(i, path + (k,)))
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        _, end = dec.raw_decode(text, i)
        return end

    value(0, ())
    return out


def _line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


@dataclass
class TuneSpec:
    legit_distance: float = 20.0
    adversary: AttackScenario = AttackScenario("following-afar", follow_distance=90.0)
    pairs: int = 40
    K_max: int = 40
    train_fraction: float = 0.3
    strategy: str = "eer"
    seed: int = 0


@dataclass
class ExperimentConfig:
    world: World = field(default_factory=World)
    session: dict = field(default_factory=dict)
    latency: float = 0.01
    params: PofParams = field(default_factory=PofParams)
    tune: TuneSpec | None = None
    training: dict | None = None
    scenarios: list = field(default_factory=lambda: [AttackScenario()])
    seeds: list = field(default_factory=lambda: [0])
    output: Path | None = None
    write_transcripts: bool = True
    source: str = "<defaults>"

    def session_config(self, scenario: AttackScenario | None = None,
                       params: PofParams | None = None) -> SessionConfig:
        variant = scenario.variant if scenario else "A"
        return SessionConfig(params=params or self.params, variant=variant,
                             rate=self.world.rate, **self.session)


def _scenario(d: dict) -> AttackScenario:
    return AttackScenario(**d)


def parse_config(doc: dict, base: Path, source: str = "<config>", offsets: dict | None = None,
                 text: str = "") -> ExperimentConfig:
    """Build an ExperimentConfig from an already-parsed document."""
    offsets = offsets or {}

    def where(path) -> str:
        path = tuple(path)
        while path and path not in offsets:
            path = path[:-1]
        if path in offsets and text:
            return f"{source}:{_line_of(text, offsets[path])}"
        return source

    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            loc = "/".join(map(str, e.absolute_path)) or "(root)"
            lines.append(f"{where(e.absolute_path)}: {loc}: {e.message}")
        raise ConfigError("\n".join(lines))

    def resolve(p: str, path) -> Path:
        q = Path(p)
        if not q.is_absolute():
            q = base / q
        if not q.exists():
            raise ConfigError(f"{where(path)}: referenced file does not exist: {q}")
        return q

    cfg = ExperimentConfig(source=source)
    try:
        w = dict(doc.get("world", {}))
        kw = {}
        if "path_file" in w:
            pf = resolve(w.pop("path_file"), ("world", "path_file"))
            try:
                route = read_route_csv(pf)
            except (RouteError, ValueError) as exc:
                raise ConfigError(f"{where(('world', 'path_file'))}: {exc}") from None
            kw["path"] = tuple(map(tuple, route.positions))
        if "pathloss" in w:
            kw["pathloss"] = PathLossParams(**w.pop("pathloss"))
        if "shadow" in w:
            kw["shadow"] = replace(ShadowFieldParams(), **w.pop("shadow"))
        for k in ("path", "stations"):
            if k in w:
                kw[k] = tuple(tuple(p) for p in w.pop(k))
        kw.update(w)
        cfg.world = World(**kw)

        s = dict(doc.get("session", {}))
        cfg.latency = float(s.pop("latency", cfg.latency))
        cfg.session = s
        cfg.params = PofParams(**doc.get("params", {}))
        SessionConfig(params=cfg.params, rate=cfg.world.rate, **s)

        if "tune" in doc:
            t = dict(doc["tune"])
            if "adversary" in t:
                t["adversary"] = _scenario(t["adversary"])
            cfg.tune = TuneSpec(**t)
        if "training" in doc:
            tr = {}
            for label in ("legit", "adversary"):
                tr[label] = [
                    (resolve(p["verifier"], ("training", label, i, "verifier")),
                     resolve(p["candidate"], ("training", label, i, "candidate")))
                    for i, p in enumerate(doc["training"][label])
                ]
            cfg.training = tr
        if "scenarios" in doc:
            cfg.scenarios = []
            for i, sd in enumerate(doc["scenarios"]):
                try:
                    sc = _scenario(sd)
                    sc.check(cfg.world)
                except ScenarioError as exc:
                    raise ConfigError(f"{where(('scenarios', i))}: {exc}") from None
                cfg.scenarios.append(sc)
            labels = [sc.label for sc in cfg.scenarios]
            if len(set(labels)) != len(labels):
                raise ConfigError(f"{where(('scenarios',))}: scenario labels must be unique; "
                                  "add a 'name' to repeated kinds")
        if "seeds" in doc:
            sd = doc["seeds"]
            cfg.seeds = list(sd) if isinstance(sd, list) else list(
                range(sd.get("start", 0), sd.get("start", 0) + sd["count"]))
        if "output" in doc:
            cfg.output = Path(doc["output"]) if Path(doc["output"]).is_absolute() else base / doc["output"]
        cfg.write_transcripts = bool(doc.get("write_transcripts", True))
    except ConfigError:
        raise
    except (ValueError, TypeError, NotImplementedError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file does not exist")
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(doc, path.parent, str(path), value_offsets(text), text)


def params_from_json(path: str | Path) -> PofParams:
    """PoF parameters from a tuned-parameters file (extra keys are ignored)."""
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: file does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    names = {f.name for f in fields(PofParams)}
    try:
        return PofParams(**{k: v for k, v in d.items() if k in names})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
