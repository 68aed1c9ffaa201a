from rulegoal.core import GoalRegistry, ReplayBuffer


def st(text: str) -> frozenset:
    return frozenset(p.strip() for p in text.split(",") if p.strip())


def chain_buffer(states, actions, prime="g", subgoals=()) -> ReplayBuffer:
    """Buffer whose tuple t goes from states[t] via actions[t] to states[t+1].

    ``subgoals`` is a sequence of (state text, parent id) registered in order.
    """
    registry = GoalRegistry(st(prime))
    for interp, parent in subgoals:
        registry.invent(st(interp), parent)
    buffer = ReplayBuffer(registry)
    states = [st(s) if isinstance(s, str) else s for s in states]
    for t, a in enumerate(actions):
        buffer.append(states[t], a, states[t + 1])
    return buffer
