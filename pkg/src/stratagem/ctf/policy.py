"""Team policy interface used by the simulator.

A team policy is an immutable object with ``start(config, team)`` returning a
per-episode context whose ``decide(agent, view)`` picks the next macro-action
for a robot whose previous macro terminated.  The view exposes only what the
robot knows locally: its macro-observation, which macros it may initiate, its
own cell, and addressable random draws for this decision.

Policies that can also express themselves as arrays implement
``compile(config, team) -> CompiledTeam``; when both teams do, episodes run
entirely inside the compiled engine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng
from ._engine import N_OBS


@dataclass(frozen=True)
class AgentView:
    step: int
    robot: int
    agent: int
    team: int
    observation: int
    eligible: np.ndarray
    position: tuple
    key: int

    def draw(self, channel: int) -> float:
        return float(rng.uniform(rng.to_key(self.key), self.step, self.robot, channel))


@dataclass
class CompiledTeam:
    """Array form of one team's policies (one row per robot)."""

    kind: np.ndarray        # 0 controller, 1 scripted
    lam: np.ndarray         # (n, R, K, A)
    dlt: np.ndarray         # (n, R, K, 64, K)
    gate: np.ndarray        # (n, R, K)
    edge: np.ndarray        # (n, R*K, R*K), zero on the own block
    init_sub: np.ndarray
    nsub: np.ndarray
    nnode: np.ndarray
    roster: np.ndarray      # (n, T)
    switch: np.ndarray      # (n, T, T)
    init_tac: np.ndarray    # -1: uniform draw per episode
    ntac: np.ndarray

    @classmethod
    def empty(cls, n: int, n_actions: int, r: int = 1, k: int = 1, tactics: int = 1) -> "CompiledTeam":
        return cls(
            kind=np.zeros(n, dtype=np.int64),
            lam=np.zeros((n, r, k, n_actions)),
            dlt=np.zeros((n, r, k, N_OBS, k)),
            gate=np.zeros((n, r, k)),
            edge=np.zeros((n, r * k, r * k)),
            init_sub=np.zeros(n, dtype=np.int64),
            nsub=np.ones(n, dtype=np.int64),
            nnode=np.ones(n, dtype=np.int64),
            roster=np.zeros((n, tactics), dtype=np.int64),
            switch=np.ones((n, tactics, tactics)) / tactics,
            init_tac=np.zeros(n, dtype=np.int64),
            ntac=np.ones(n, dtype=np.int64),
        )


def merge_teams(blue: CompiledTeam, red: CompiledTeam) -> tuple:
    """Stack two compiled teams into the engine's per-robot argument tuple."""
    teams = (blue, red)
    n = [len(t.kind) for t in teams]
    r = max(t.lam.shape[1] for t in teams)
    k = max(t.lam.shape[2] for t in teams)
    a = teams[0].lam.shape[3]
    nt = max(t.roster.shape[1] for t in teams)
    total = sum(n)
    out = CompiledTeam.empty(total, a, r, k, nt)
    row = 0
    for t in teams:
        m = len(t.kind)
        sl = slice(row, row + m)
        tr, tk = t.lam.shape[1], t.lam.shape[2]
        out.kind[sl] = t.kind
        out.lam[sl, :tr, :tk] = t.lam
        out.dlt[sl, :tr, :tk, :, :tk] = t.dlt
        out.gate[sl, :tr, :tk] = t.gate
        # edges keep each robot's own node count k: global node = s * k + v
        out.edge[sl, :tr * tk, :tr * tk] = t.edge
        out.init_sub[sl] = t.init_sub
        out.nsub[sl] = t.nsub
        out.nnode[sl] = t.nnode
        tt = t.roster.shape[1]
        out.roster[sl, :tt] = t.roster
        out.switch[sl] = 0.0
        out.switch[sl, :tt, :tt] = t.switch
        out.init_tac[sl] = t.init_tac
        out.ntac[sl] = t.ntac
        row += m
    return (out.kind, out.lam, out.dlt, out.gate, out.edge, out.init_sub, out.nsub, out.nnode,
            out.roster, out.switch, out.init_tac, out.ntac)
