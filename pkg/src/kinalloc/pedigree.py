"""Wright's coefficient of relationship from a pedigree.

Kinship coefficients follow the usual recursion over a parents-first
ordering: with ``m(j)``/``f(j)`` the parents of ``j`` (missing parents
contribute zero)::

    phi[j, j] = (1 + phi[m(j), f(j)]) / 2
    phi[i, j] = (phi[i, m(j)] + phi[i, f(j)]) / 2   for i before j

Founders are unrelated and non-inbred. The relationship coefficient is
``r[i, j] = 2 phi[i, j] / sqrt((1 + F_i)(1 + F_j))`` with inbreeding
``F_i = phi[m(i), f(i)]``.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

import numpy as np

__all__ = ["Pedigree", "PedigreeError", "kinship_matrix", "pedigree_to_relatedness", "relationship"]


class PedigreeError(ValueError):
    pass


@dataclass(frozen=True)
class Pedigree:
    ids: tuple
    mother: tuple
    father: tuple

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> Pedigree:
        """Build from ``{"id": .., "mother": .., "father": ..}`` records."""
        ids, mothers, fathers = [], [], []
        for k, rec in enumerate(records):
            if "id" not in rec:
                raise PedigreeError(f"pedigree record {k} has no 'id'")
            ids.append(rec["id"])
            mothers.append(rec.get("mother"))
            fathers.append(rec.get("father"))
        ped = cls(tuple(ids), tuple(mothers), tuple(fathers))
        ped.check()
        return ped

    def check(self) -> None:
        seen = set()
        for i in self.ids:
            if i in seen:
                raise PedigreeError(f"duplicate pedigree id {i!r}")
            seen.add(i)
        for i, m, f in zip(self.ids, self.mother, self.father):
            for role, p in (("mother", m), ("father", f)):
                if p is not None and p not in seen:
                    raise PedigreeError(f"{role} {p!r} of {i!r} is not in the pedigree")
                if p == i:
                    raise PedigreeError(f"{i!r} is its own {role}")
        self.order()

    def order(self) -> list[Hashable]:
        """Ids sorted parents-first; raises on cycles."""
        graph = {
            i: [p for p in (m, f) if p is not None]
            for i, m, f in zip(self.ids, self.mother, self.father)
        }
        try:
            return list(graphlib.TopologicalSorter(graph).static_order())
        except graphlib.CycleError as err:
            raise PedigreeError(f"pedigree has a cycle through {err.args[1]!r}") from None


def kinship_matrix(ped: Pedigree) -> np.ndarray:
    """Kinship coefficients, indexed in the order of ``ped.ids``."""
    pos = {i: k for k, i in enumerate(ped.ids)}
    order = [pos[i] for i in ped.order()]
    parents = [
        (pos.get(m) if m is not None else None, pos.get(f) if f is not None else None)
        for m, f in zip(ped.mother, ped.father)
    ]
    n = len(ped.ids)
    phi = np.zeros((n, n))
    done = []
    for j in order:
        m, f = parents[j]
        for i in done:
            v = 0.5 * ((phi[i, m] if m is not None else 0.0) + (phi[i, f] if f is not None else 0.0))
            phi[i, j] = phi[j, i] = v
        inbreeding = phi[m, f] if m is not None and f is not None else 0.0
        phi[j, j] = 0.5 * (1.0 + inbreeding)
        done.append(j)
    return phi


def pedigree_to_relatedness(ped: Pedigree) -> np.ndarray:
    """Relationship coefficients in ``[0, 1]`` with an exact unit diagonal."""
    phi = kinship_matrix(ped)
    inbreeding = 2.0 * phi.diagonal() - 1.0
    norm = np.sqrt(np.outer(1.0 + inbreeding, 1.0 + inbreeding))
    r = np.clip(2.0 * phi / norm, 0.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def relationship(ped: Pedigree, a: Hashable, b: Hashable) -> float:
    r = pedigree_to_relatedness(ped)
    return float(r[ped.ids.index(a), ped.ids.index(b)])

