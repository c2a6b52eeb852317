"""Negotiation rollout engine.

Runs the bilateral negotiation loop with controlled violation injection,
optional remediation interception, and moderator termination. Two lanes share
the loop structure: a deterministic scripted lane driven by the bargaining
world, and a remote lane driven by chat completions.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Callable, Optional

from .backends import (
    BackendError,
    BackendSession,
    BargainState,
    ContentFilterError,
    ScriptedWorld,
    chat,
    check_round_boundary,
    scripted_outcome,
    scripted_step,
)
from .core import Dialogue, PriceBounds, Speaker, Topic, Turn, format_money
from .prompts import TemplateStore, render, render_conversation

__all__ = [
    "SimulationConfig",
    "ViolationPoint",
    "Remediator",
    "simulate",
    "moderator_end",
    "rollout_to_first_violation",
    "continue_rollout",
    "BUYER_OPENER",
    "seller_opener",
    "violation_utterance",
]

log = logging.getLogger(__name__)

# The two hard-coded opening turns: a buyer question, then the seller's
# answer stating the initial price.
BUYER_OPENER = "Hello, does your esteemed company have a special industrial product?"

# A remediator is any callable from (history, violating text) to a rewrite.
Remediator = Callable[[tuple[Turn, ...], str], str]


def seller_opener(bounds: PriceBounds) -> str:
    return (
        "Hello, our company has abundant production capacity and can offer to sell "
        "the required industrial product to your company in a one-time deal. "
        f"The unit price for this industrial product is {format_money(bounds.seller_init)}."
    )


def violation_utterance(price: str) -> str:
    """The scripted seller's norm-violating rendering of its current ask."""
    return (
        f"How can you be so unreasonable? We will not go below {price}. "
        "Take it or leave it!"
    )


@dataclass(frozen=True)
class SimulationConfig:
    p_c: float = 0.4
    remediation_enabled: bool = False
    single_remediation_point: bool = False
    max_turns: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_c <= 1.0:
            raise ValueError("p_c must be a probability")
        if self.max_turns < 1:
            raise ValueError("max_turns must be positive")


@dataclass(frozen=True)
class ViolationPoint:
    """Prefix and first violating utterance of a rollout, pre-remediation."""

    prefix: tuple[Turn, ...]
    violation_text: str
    seed: int


def _opening_turns(bounds: PriceBounds) -> list[Turn]:
    return [
        Turn(speaker=Speaker.BUYER, text=BUYER_OPENER),
        Turn(speaker=Speaker.SELLER, text=seller_opener(bounds)),
    ]


# ---------------------------------------------------------------------------
# Scripted lane


def _run_scripted(
    world: ScriptedWorld,
    config: SimulationConfig,
    remediator: Optional[Remediator],
    *,
    stop_at_violation: bool = False,
    forced_remediation: Optional[str] = None,
) -> tuple[list[Turn], BargainState, Optional[str]]:
    """Run the scripted loop from the opening turns.

    With ``stop_at_violation`` the loop returns at the first coin head with
    the raw violating text as the third element (goodwill not yet charged).
    ``forced_remediation`` replays the same rollout and applies the given
    rewrite at the first head instead of consulting a remediator; later
    violations are suppressed, which enforces the single-point rule for
    value-estimation rollouts.
    """
    turns = _opening_turns(world.bounds)
    state = BargainState.initial(world)
    rng = random.Random(config.seed)
    violation_seen = False

    while True:
        check_round_boundary(world, state)
        if state.terminal:
            break
        if len(turns) + 1 > config.max_turns:
            state.terminal = True
            state.deal = False
            break

        buyer_text = scripted_step(world, state, "buyer")
        turns.append(Turn(speaker=Speaker.BUYER, text=buyer_text))
        if len(turns) >= config.max_turns:
            state.terminal = True
            state.deal = False
            break

        suppress = violation_seen and (
            config.single_remediation_point or forced_remediation is not None
        )
        violate = (not suppress) and rng.random() < config.p_c

        if violate:
            first = not violation_seen
            violation_seen = True
            raw = violation_utterance(format_money(round(state.pending_ask)))
            if first and stop_at_violation:
                return turns, state, raw
            if first and forced_remediation is not None:
                rewrite: Optional[str] = forced_remediation
            elif config.remediation_enabled and remediator is not None:
                rewrite = remediator(tuple(turns), raw)
            else:
                rewrite = None
            if rewrite is not None:
                scripted_step(world, state, "seller", violation=True, remediation=rewrite)
                turns.append(
                    Turn(speaker=Speaker.SELLER, text=rewrite, violation=True, original_text=raw)
                )
            else:
                scripted_step(world, state, "seller", violation=True)
                turns.append(Turn(speaker=Speaker.SELLER, text=raw, violation=True))
        else:
            text = scripted_step(world, state, "seller")
            turns.append(Turn(speaker=Speaker.SELLER, text=text))

        if state.terminal:
            break
        if len(turns) >= config.max_turns:
            state.terminal = True
            state.deal = False
            break

    return turns, state, None


def _scripted_dialogue(
    world: ScriptedWorld,
    config: SimulationConfig,
    turns: list[Turn],
    state: BargainState,
    *,
    dialogue_id: str,
    topic: Topic,
    language: str,
) -> Dialogue:
    outcome = scripted_outcome(world, state)
    return Dialogue(
        id=dialogue_id,
        topic=topic,
        bounds=world.bounds,
        turns=tuple(turns),
        outcome=outcome,
        language=language,
    )


# ---------------------------------------------------------------------------
# Remote lane


def _remote_turn(session: BackendSession, messages: list[dict]) -> tuple[str, Optional[str]]:
    try:
        return chat(session, messages), None
    except ContentFilterError:
        return "", "content_filter"
    except BackendError as exc:
        return "", f"backend: {exc}"


def _run_remote(
    seller: BackendSession,
    buyer: BackendSession,
    moderator: BackendSession,
    config: SimulationConfig,
    templates: TemplateStore,
    remediator: Optional[Remediator],
    bounds: PriceBounds,
) -> tuple[list[Turn], Optional[str]]:
    turns = _opening_turns(bounds)
    rng = random.Random(config.seed)
    violation_seen = False
    price_bindings = {
        "SELLER_INIT_PRICE": format_money(bounds.seller_init),
        "COST_PRICE": format_money(bounds.cost_price),
        "BUYER_INIT_PRICE": format_money(bounds.buyer_init),
    }

    while len(turns) < config.max_turns:
        conv = render_conversation(turns)
        msgs = render(templates.get("buyer"), {**price_bindings, "$CONVERSATION": conv})
        text, err = _remote_turn(buyer, msgs)
        if err:
            return turns, err
        turns.append(Turn(speaker=Speaker.BUYER, text=text))
        if moderator_end(tuple(turns), moderator, templates=templates, max_turns=config.max_turns):
            break

        suppress = violation_seen and config.single_remediation_point
        violate = (not suppress) and rng.random() < config.p_c
        template_id = "seller_violate" if violate else "seller_normal"
        conv = render_conversation(turns)
        msgs = render(templates.get(template_id), {**price_bindings, "$CONVERSATION": conv})
        text, err = _remote_turn(seller, msgs)
        if err == "content_filter":
            # Mark the turn and keep the rollout alive.
            turns.append(
                Turn(speaker=Speaker.SELLER, text="[withheld by provider content filter]")
            )
            continue
        if err:
            return turns, err
        if violate:
            violation_seen = True
            if config.remediation_enabled and remediator is not None:
                rewrite = remediator(tuple(turns), text)
                turns.append(
                    Turn(speaker=Speaker.SELLER, text=rewrite, violation=True, original_text=text)
                )
            else:
                turns.append(Turn(speaker=Speaker.SELLER, text=text, violation=True))
        else:
            turns.append(Turn(speaker=Speaker.SELLER, text=text))
        if moderator_end(tuple(turns), moderator, templates=templates, max_turns=config.max_turns):
            break

    return turns, None


# ---------------------------------------------------------------------------
# Public operations


def moderator_end(
    trajectory: tuple[Turn, ...],
    backend: BackendSession | BargainState,
    *,
    templates: Optional[TemplateStore] = None,
    max_turns: int = 20,
) -> bool:
    """Decide whether the negotiation has concluded.

    Scripted rollouts decide from the bargaining state; remote rollouts ask a
    yes/no judgment prompt. A failing remote moderator counts as "continue",
    bounded by the turn cap.
    """
    if not trajectory:
        raise ValueError("trajectory must be non-empty")
    if len(trajectory) >= max_turns:
        return True
    if isinstance(backend, BargainState):
        return backend.terminal or backend.bid >= backend.ask
    if backend.kind == "scripted":
        return False
    if templates is None:
        raise ValueError("remote moderator requires templates")
    conv = render_conversation(trajectory)
    msgs = render(templates.get("moderator"), {"$CONVERSATION": conv})
    try:
        reply = chat(backend, msgs)
    except BackendError as exc:
        log.warning("moderator backend failed, treating as continue: %s", exc)
        return False
    return reply.strip().lower().startswith("yes")


def simulate(
    seller: BackendSession,
    buyer: BackendSession,
    moderator: BackendSession,
    config: SimulationConfig,
    templates: Optional[TemplateStore] = None,
    *,
    remediator: Optional[Remediator] = None,
    evaluator: Optional[BackendSession] = None,
    world: Optional[ScriptedWorld] = None,
    bounds: Optional[PriceBounds] = None,
    dialogue_id: str = "sim-0",
    topic: Topic = Topic.PRODUCT_SALE,
    language: str = "en",
) -> Dialogue:
    """Run one full negotiation rollout and attach its assessed outcome.

    The scripted lane needs ``world``; the remote lane needs ``bounds``,
    ``templates``, and an ``evaluator`` session.
    """
    if seller.kind == "scripted":
        if world is None:
            raise ValueError("scripted simulation requires a world")
        turns, state, _ = _run_scripted(world, config, remediator)
        return _scripted_dialogue(
            world, config, turns, state, dialogue_id=dialogue_id, topic=topic, language=language
        )

    if bounds is None or templates is None or evaluator is None:
        raise ValueError("remote simulation requires bounds, templates, and an evaluator")
    turns, err = _run_remote(seller, buyer, moderator, config, templates, remediator, bounds)
    d = Dialogue(
        id=dialogue_id,
        topic=topic,
        bounds=bounds,
        turns=tuple(turns),
        language=language,
        error=err,
    )
    if err is not None:
        return d
    from .outcome import assess_outcome

    return d.with_outcome(assess_outcome(d, evaluator, templates))


def rollout_to_first_violation(
    world: ScriptedWorld,
    config: SimulationConfig,
) -> Optional[ViolationPoint]:
    """Run a scripted rollout until the first coin head.

    Returns the prefix and the raw (unremediated) violating utterance, or
    None when the dialogue ends without a violation.
    """
    if config.p_c <= 0.0:
        return None
    turns, _state, raw = _run_scripted(world, config, None, stop_at_violation=True)
    if raw is None:
        return None
    return ViolationPoint(prefix=tuple(turns), violation_text=raw, seed=config.seed)


def continue_rollout(
    world: ScriptedWorld,
    config: SimulationConfig,
    point: ViolationPoint,
    remediation: str,
    *,
    dialogue_id: str = "probe-0",
    topic: Topic = Topic.PRODUCT_SALE,
    language: str = "en",
) -> Dialogue:
    """Complete a rollout from a violation point with the given remediation.

    The rollout is replayed deterministically from the point's seed, the
    rewrite replaces the violating utterance, and further violations are
    suppressed (the single-point rule). The same seed is used for every
    remediation candidate, so paired differences isolate the rewrite.
    """
    if not remediation:
        raise ValueError("remediation text must be non-empty")
    replay = SimulationConfig(
        p_c=config.p_c,
        remediation_enabled=True,
        single_remediation_point=True,
        max_turns=config.max_turns,
        seed=point.seed,
    )
    turns, state, _ = _run_scripted(world, replay, None, forced_remediation=remediation)
    return _scripted_dialogue(
        world, replay, turns, state, dialogue_id=dialogue_id, topic=topic, language=language
    )
