"""Shared test utilities."""
from stratagem.ctf import run_episode


class Spy:
    """Wraps a team policy and keeps the per-episode context for inspection."""

    def __init__(self, policy):
        self.policy = policy
        self.context = None

    def start(self, config, team):
        self.context = self.policy.start(config, team)
        return self.context


def controller_trace(team, adversary, config, seed, episode=0):
    """(step, agent, local node, macro) decisions of ``team`` in one episode."""
    spy = Spy(team)
    res = run_episode(spy, adversary, config, seed, episode=episode)
    trace = []
    for step, agent, node, macro in spy.context.trace:
        k = spy.context.units[agent].k
        trace.append((step, agent, node % k, macro))
    return trace, res
