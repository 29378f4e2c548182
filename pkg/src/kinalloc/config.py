"""JSON documents: game configs, pedigrees, profiles and reports.

Game config::

    {
      "individuals": [
        {"id": "parent", "budget": 3.0, "fitness": {"kind": "log", "w": 1, "c": 1}},
        {"id": "child", "budget": 0.1, "fitness": {"kind": "power", "w": 1, "c": 0, "p": 0.5}}
      ],
      "relatedness": [[1, 0.5], [0.5, 1]]
    }

``relatedness`` may instead be ``{"from_pedigree": "family.json"}``; the
path is resolved against the config file's directory and the pedigree must
contain every individual of the game (it may contain more).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .equilibrium import Classification, EquilibriumReport, KktCertificate
from .family_model import FamilyGame, FitnessFunction, FitnessKind, inclusive_fitness, validate_game
from .pedigree import Pedigree, PedigreeError, pedigree_to_relatedness

__all__ = [
    "ConfigError",
    "parse_game_config",
    "load_game",
    "emit_game",
    "load_pedigree",
    "load_profile",
    "report_to_dict",
    "certificate_to_dict",
    "classification_to_dict",
    "dumps",
]


class ConfigError(ValueError):
    pass


def _loads(text: str, source: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{source}:{err.lineno}:{err.colno}: {err.msg}") from None


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    return float(value)


def _parse_fitness(doc, who) -> FitnessFunction:
    if not isinstance(doc, dict):
        raise ConfigError(f"individual {who!r}: fitness must be an object")
    try:
        kind = FitnessKind(str(doc.get("kind", "")).lower())
    except ValueError:
        known = ", ".join(k.value for k in FitnessKind)
        raise ConfigError(f"individual {who!r}: unknown fitness kind {doc.get('kind')!r} (expected one of {known})") from None
    w = _number(doc.get("w", 1.0), f"individual {who!r}: fitness w")
    if kind is FitnessKind.LINEAR:
        return FitnessFunction.linear(w)
    if kind is FitnessKind.POWER:
        if "p" not in doc:
            raise ConfigError(f"individual {who!r}: power fitness needs an exponent 'p'")
        return FitnessFunction.power(
            w, _number(doc.get("c", 0.0), f"individual {who!r}: fitness c"), _number(doc["p"], f"individual {who!r}: fitness p")
        )
    return FitnessFunction(kind, w, _number(doc.get("c", 1.0), f"individual {who!r}: fitness c"))


def parse_game_config(document, base_dir: str | Path | None = None, source: str = "<game>") -> FamilyGame:
    """Parse and validate a game config (JSON text or already-decoded object).

    Raises
    ------
    ConfigError
        On malformed documents, unknown fitness kinds, dimension mismatches
        or failed validation (violations are listed verbatim).
    """
    doc = _loads(document, source) if isinstance(document, str) else document
    if not isinstance(doc, dict) or "individuals" not in doc:
        raise ConfigError(f"{source}: expected an object with an 'individuals' list")
    people = doc["individuals"]
    if not isinstance(people, list) or not people:
        raise ConfigError(f"{source}: 'individuals' must be a non-empty list")
    ids, budgets, fitness = [], [], []
    for k, person in enumerate(people):
        if not isinstance(person, dict) or "id" not in person:
            raise ConfigError(f"{source}: individual #{k} has no 'id'")
        who = person["id"]
        if who in ids:
            raise ConfigError(f"{source}: duplicate individual id {who!r}")
        if "budget" not in person:
            raise ConfigError(f"{source}: individual {who!r} has no 'budget'")
        if "fitness" not in person:
            raise ConfigError(f"{source}: individual {who!r} has no 'fitness'")
        ids.append(who)
        budgets.append(_number(person["budget"], f"individual {who!r}: budget"))
        fitness.append(_parse_fitness(person["fitness"], who))

    rel_doc = doc.get("relatedness")
    if isinstance(rel_doc, dict) and "from_pedigree" in rel_doc:
        path = Path(rel_doc["from_pedigree"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        ped = load_pedigree(path)
        missing = [i for i in ids if i not in ped.ids]
        if missing:
            raise ConfigError(f"{source}: individuals {missing!r} are not in pedigree {path}")
        full = pedigree_to_relatedness(ped)
        pos = [ped.ids.index(i) for i in ids]
        rel = full[np.ix_(pos, pos)]
    elif isinstance(rel_doc, list):
        n = len(ids)
        if len(rel_doc) != n or any(not isinstance(row, list) or len(row) != n for row in rel_doc):
            raise ConfigError(f"{source}: relatedness must be a {n}x{n} matrix in individual order")
        rel = np.array([[_number(v, "relatedness entry") for v in row] for row in rel_doc])
    else:
        raise ConfigError(f"{source}: 'relatedness' must be a matrix or {{\"from_pedigree\": path}}")

    game = FamilyGame(ids, budgets, rel, fitness)
    check = validate_game(game)
    if not check.ok:
        raise ConfigError(f"{source}: invalid game: " + "; ".join(check.violations))
    return game


def load_game(path: str | Path) -> FamilyGame:
    path = Path(path)
    return parse_game_config(path.read_text(), base_dir=path.parent, source=str(path))


def _fitness_to_dict(f: FitnessFunction) -> dict:
    out = {"kind": f.kind.value, "w": f.w}
    if f.kind is not FitnessKind.LINEAR:
        out["c"] = f.c
    if f.kind is FitnessKind.POWER:
        out["p"] = f.p
    return out


def emit_game(game: FamilyGame) -> dict:
    """Config document for ``game`` (relatedness always explicit)."""
    return {
        "individuals": [
            {"id": who, "budget": float(b), "fitness": _fitness_to_dict(f)}
            for who, b, f in zip(game.individuals, game.budgets, game.fitness)
        ],
        "relatedness": game.relatedness.tolist(),
    }


def load_pedigree(path: str | Path) -> Pedigree:
    """Pedigree from a JSON list of records or ``{"individuals": [...]}``."""
    path = Path(path)
    doc = _loads(path.read_text(), str(path))
    records = doc.get("individuals") if isinstance(doc, dict) else doc
    if not isinstance(records, list):
        raise ConfigError(f"{path}: expected a list of pedigree records")
    try:
        return Pedigree.from_records(records)
    except PedigreeError as err:
        raise ConfigError(f"{path}: {err}") from None


def load_profile(path: str | Path, game: FamilyGame) -> np.ndarray:
    """Investment matrix from a bare matrix or any document with a ``profile`` key."""
    path = Path(path)
    doc = _loads(path.read_text(), str(path))
    if isinstance(doc, dict):
        if "profile" not in doc:
            raise ConfigError(f"{path}: no 'profile' key")
        ids = doc.get("individuals")
        if ids is not None and list(ids) != list(game.individuals):
            raise ConfigError(f"{path}: profile individuals {ids!r} do not match the game")
        doc = doc["profile"]
    try:
        m = np.array(doc, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: profile must be a numeric matrix") from None
    if m.shape != (game.n, game.n):
        raise ConfigError(f"{path}: profile has shape {m.shape}, game has {game.n} individuals")
    return m


def _finite(v):
    """JSON-safe float: infinities become the string ``"inf"``."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def certificate_to_dict(cert: KktCertificate) -> dict:
    return {
        "certified": cert.certified,
        "tol": cert.tol,
        "lambda": [_finite(v) for v in cert.lam],
        "mu": [[_finite(v) for v in row] for row in cert.mu],
        "residuals": {k: _finite(v) for k, v in cert.residuals.items()},
    }


def classification_to_dict(game: FamilyGame, cls: Classification) -> dict:
    ids = game.individuals

    def names(indices):
        return [ids[k] for k in sorted(indices)]

    return {
        "beneficiaries": {str(ids[s]): names(b) for s, b in enumerate(cls.beneficiaries)},
        "selfish": names(cls.selfish),
        "altruistic": names(cls.altruistic),
        "totally_altruistic": names(cls.totally_altruistic),
        "argmax_adjusted": {str(ids[s]): names(a) for s, a in enumerate(cls.argmax_adjusted)},
        "argmax_plain": names(cls.argmax_plain),
    }


def report_to_dict(report: EquilibriumReport) -> dict:
    game, m = report.game, report.profile.matrix
    d = report.diagnostics
    return {
        "individuals": list(game.individuals),
        "profile": m.tolist(),
        "incoming": m.sum(axis=0).tolist(),
        "inclusive_fitness": [inclusive_fitness(game, m, i) for i in range(game.n)],
        "certificate": certificate_to_dict(report.certificate),
        "classification": classification_to_dict(game, report.classification),
        "diagnostics": {
            "mode": d.mode,
            "iterations": d.iterations,
            "damping": d.damping,
            "displacement": _finite(d.displacement),
            "converged": d.converged,
        },
    }


def dumps(doc) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"
