"""Random generators shared by the property tests and the acceptance run."""

import random

from ttcc import fd
from ttcc.process import NULL, Ask, Local, Next, Par, Rep, Tell

RELS = ("=", "!=", "<", "<=", ">", ">=")


def rand_term(rng, names, max_value):
    roll = rng.random()
    if roll < 0.3:
        return fd.Const(rng.randrange(max_value))
    name = rng.choice(names)
    if roll < 0.7:
        return fd.Var(name)
    return fd.add(name, rng.randint(-3, 3))


def rand_atom(rng, names, max_value):
    return fd.Atom(rand_term(rng, names, max_value), rng.choice(RELS),
                   rand_term(rng, names, max_value))


def rand_constraint(rng, names, max_value, size=3, exists=True):
    items = [rand_atom(rng, names, max_value) for _ in range(rng.randint(1, size))]
    c = items[0] if len(items) == 1 else fd.Conj(tuple(items))
    if exists and rng.random() < 0.2:
        c = fd.Exists(rng.choice(names), c)
    return c


def rand_store(rng, names, max_value, size=4):
    c = rand_constraint(rng, names, max_value, size, exists=False)
    return fd.Store(c, fd.Domain(max_value))


def rand_process(rng, names, depth=3, max_value=8):
    """A closed process over stream variables ``names``."""
    roll = rng.random()
    if depth <= 0 or roll < 0.2:
        lhs = rng.choice(names)
        rhs = rng.choice([fd.Const(rng.randrange(max_value)), fd.add(rng.choice(names), 1)])
        return Tell(fd.Atom(fd.Var(lhs), "=", rhs))
    if roll < 0.35:
        return Ask(rand_atom(rng, names, max_value), rand_process(rng, names, depth - 1, max_value))
    if roll < 0.55:
        return Par((rand_process(rng, names, depth - 1, max_value),
                    rand_process(rng, names, depth - 1, max_value)))
    if roll < 0.7:
        return Next(rng.randint(1, 3), rand_process(rng, names, depth - 1, max_value))
    if roll < 0.85:
        return Rep(rng.randint(1, 5), rand_process(rng, names, depth - 1, max_value))
    if roll < 0.93:
        body = Tell(fd.Atom(fd.Var(rng.choice(names)), "=", fd.Var("h")))
        return Local(("h",), fd.Atom(fd.Var("h"), "=", fd.Const(rng.randrange(max_value))),
                     Par((body, rand_process(rng, names, depth - 1, max_value))))
    return NULL


def seeded(seed):
    return random.Random(seed)
