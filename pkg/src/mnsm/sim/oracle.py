"""Independent oracle for the aggregation rules, plus interleaving enumeration.

``oracle_aggregate`` is a second, deliberately naive implementation of the
coherence rules: it keeps per-node delivered-report lists with a consumed
index and recomputes who can make progress on every pass, instead of the
core's record/queue/phase machinery.  Structuring it differently makes a
shared bug between the two implementations less likely.

Scope: one operation epoch after START.  Items are totally ordered and each
is one of::

    ("report", node, state)   a major-class state report
    ("disconnect", node)      loss of the node's session
    ("timer",)                expiry of the bounding timer

``enumerate_interleavings`` generates every ordering of per-node report
sequences (optionally with a disconnect of one node injected at every
possible position), drives a fresh core through each, and compares the
published aggregates against the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from mnsm.aggregator import (
    Aggregator,
    ControllerCommand,
    ManagerConfig,
    NodeConnected,
    NodeDisconnected,
    PublishAggregate,
    Report,
    TimerFired,
    check_invariants,
)

READY = "READY"
ERROR = "ERROR"


def oracle_aggregate(
    items: list[tuple], active: set[str], config: ManagerConfig
) -> list[str]:
    """Expected published-aggregate sequence for one post-START epoch."""
    published: list[str] = []
    current = READY
    act = set(active)
    delivered: dict[str, list[str]] = {n: [] for n in act}
    consumed: dict[str, int] = {n: 0 for n in act}
    errors = 0
    errored = False
    transition: tuple[str, set[str]] | None = None

    def heads() -> dict[str, str]:
        return {
            n: delivered[n][consumed[n]]
            for n in act
            if consumed[n] < len(delivered[n])
        }

    def settle() -> None:
        nonlocal current, transition, errored
        while not errored:
            if not act:
                if transition is not None or current != READY:
                    transition = None
                    if current != READY:
                        current = READY
                        published.append(READY)
                return
            h = heads()
            if transition is None:
                ready_nodes = sorted(n for n in h)
                if not ready_nodes:
                    return
                n = ready_nodes[0]
                state = h[n]
                consumed[n] += 1
                if state == READY:
                    act.discard(n)
                elif state != current:
                    transition = (state, {n})
            else:
                target, done = transition
                if act <= done:
                    current = target
                    published.append(target)
                    transition = None
                    continue
                movable = sorted(n for n in h if n not in done)
                if not movable:
                    return
                n = movable[0]
                state = h[n]
                consumed[n] += 1
                if state == target:
                    done.add(n)
                elif state == READY:
                    act.discard(n)
                else:
                    errored = True
                    published.append(ERROR)
                    return

    for item in items:
        if errored:
            break
        kind = item[0]
        if kind == "report":
            _, node, state = item
            if node in delivered:
                delivered[node].append(state)
        elif kind == "disconnect":
            _, node = item
            if node in act:
                errors += 1
                act.discard(node)
                if transition is not None:
                    transition[1].discard(node)
                if errors > config.max_errors:
                    errored = True
                    published.append(ERROR)
                    break
        elif kind == "timer":
            errored = True
            published.append(ERROR)
            break
        else:
            raise ValueError(f"unknown oracle item {item!r}")
        settle()
    return published


# ---------------------------------------------------------------------------
# Exhaustive interleaving enumeration


class ExplosionGuardExceeded(RuntimeError):
    pass


@dataclass
class EnumerationResult:
    count: int = 0
    counterexample: dict | None = None
    variants: int = 1

    @property
    def ok(self) -> bool:
        return self.counterexample is None


def interleaving_count(seqs: dict[str, list]) -> int:
    total = sum(len(s) for s in seqs.values())
    count = math.factorial(total)
    for s in seqs.values():
        count //= math.factorial(len(s))
    return count


def _orders(seqs: dict[str, list[tuple]]):
    """Yield every merge of the per-node item lists, preserving each list's order."""
    nodes = sorted(n for n in seqs if seqs[n])
    if not nodes:
        yield []
        return
    for n in nodes:
        head, rest = seqs[n][0], {**seqs, n: seqs[n][1:]}
        for tail in _orders(rest):
            yield [head] + tail


def _run_core(items: list[tuple], nodes: list[str], config: ManagerConfig) -> list[str]:
    agg = Aggregator(config)
    for n in sorted(nodes):
        agg.ingest(NodeConnected(n))
        agg.ingest(Report(n, READY, "major", "x"))
    agg.ingest(ControllerCommand("START"))
    published = []
    for item in items:
        if item[0] == "report":
            fx = agg.ingest(Report(item[1], item[2], "major", "x"))
        elif item[0] == "disconnect":
            fx = agg.ingest(NodeDisconnected(item[1]))
        elif item[0] == "timer":
            if agg.state.active_timer is None:
                continue
            fx = agg.ingest(TimerFired(*agg.state.active_timer))
        else:
            raise ValueError(f"unknown item {item!r}")
        check_invariants(agg.state)
        published += [e.state for e in fx if isinstance(e, PublishAggregate)]
    return published


def enumerate_interleavings(
    per_node: dict[str, list[str]],
    config: ManagerConfig,
    fault_node: str | None = None,
    guard: int = 10**5,
) -> EnumerationResult:
    """Check core against oracle on every interleaving; stop at the first mismatch.

    With ``fault_node`` set, a disconnect of that node is additionally
    injected at every position its report sequence allows (after 0, 1, ...
    all of its reports), dropping the reports it would have sent afterwards.
    """
    nodes = sorted(per_node)
    base = {n: [("report", n, s) for s in seq] for n, seq in per_node.items()}
    variants: list[dict[str, list[tuple]]] = []
    if fault_node is None:
        variants.append(base)
    else:
        seq = per_node[fault_node]
        for k in range(len(seq) + 1):
            v = dict(base)
            v[fault_node] = [("report", fault_node, s) for s in seq[:k]]
            v[fault_node] = v[fault_node] + [("disconnect", fault_node)]
            variants.append(v)

    total = sum(interleaving_count(v) for v in variants)
    if total > guard:
        raise ExplosionGuardExceeded(f"{total} interleavings exceed the guard of {guard}")

    result = EnumerationResult(variants=len(variants))
    cfg = ManagerConfig(
        min_nodes=1,
        max_nodes=max(config.max_nodes, len(nodes)),
        max_errors=config.max_errors,
        timeout=config.timeout,
    )
    for variant in variants:
        for order in _orders(variant):
            result.count += 1
            core_pub = _run_core(order, nodes, cfg)
            oracle_pub = oracle_aggregate(order, set(nodes), cfg)
            if core_pub != oracle_pub:
                result.counterexample = {
                    "order": order,
                    "core": core_pub,
                    "oracle": oracle_pub,
                }
                return result
    return result
