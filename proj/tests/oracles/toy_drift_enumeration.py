"""Brute-force enumeration of the toy-drift-v1 world.

Builds the full joint P(x, a, y, z, l') for the single persona value and
answers every query by summing joint cells. Shares no code with the C++
oracle; its printed values are frozen into the C++ tests.
"""
from fractions import Fraction as F
from itertools import product

X = ["athlete", "casual"]
prior = {"athlete": F(1, 2), "casual": F(1, 2)}
p_a1 = {"athlete": F(8, 10), "casual": F(2, 10)}
p_y1 = {(1, "athlete"): F(9, 10), (1, "casual"): F(5, 10),
        (0, "athlete"): F(6, 10), (0, "casual"): F(4, 10)}
p_z1 = {"athlete": F(9, 10), "casual": F(1, 10)}
p_fit = {"athlete": F(9, 10), "casual": F(1, 10)}


def joint():
    for x, a, y, z, lp in product(X, (0, 1), (0, 1), (0, 1), ("fit", "unfit")):
        pa = p_a1[x] if a == 1 else 1 - p_a1[x]
        py = p_y1[(a, x)] if y == 1 else 1 - p_y1[(a, x)]
        pz = p_z1[x] if z == 1 else 1 - p_z1[x]
        pl = p_fit[x] if lp == "fit" else 1 - p_fit[x]
        yield (x, a, y, z, lp), prior[x] * pa * py * pz * pl


def prob(event, given):
    num = sum(p for s, p in joint() if given(s) and event(s))
    den = sum(p for s, p in joint() if given(s))
    return num / den


def posterior_x(arm, lp=None):
    g = lambda s: s[1] == arm and (lp is None or s[4] == lp)
    return prob(lambda s: s[0] == "athlete", g)


def z1(arm, lp=None):
    g = lambda s: s[1] == arm and (lp is None or s[4] == lp)
    return prob(lambda s: s[3] == 1, g)


def mu(a, a_cond):
    # E[Y | A=a, x] weighted by P(x | A=a_cond)
    q = posterior_x(a_cond)
    return q * p_y1[(a, "athlete")] + (1 - q) * p_y1[(a, "casual")]


def tvd(lp=None):
    d = abs(z1(1, lp) - z1(0, lp))
    return F(1, 2) * (d + d)


m11, m00, m01, m10 = mu(1, 1), mu(0, 0), mu(0, 1), mu(1, 0)
sb = ((m11 - m10) + (m01 - m00)) / 2
prior_ate = sum(prior[x] * (p_y1[(1, x)] - p_y1[(0, x)]) for x in X)
mix_fit = F(1, 2) * prob(lambda s: s[4] == "fit", lambda s: s[1] == 1) + \
    F(1, 2) * prob(lambda s: s[4] == "fit", lambda s: s[1] == 0)

for name, v in [
    ("q_athlete_arm1", posterior_x(1)),
    ("q_athlete_arm1_fit", posterior_x(1, "fit")),
    ("q_athlete_arm0_fit", posterior_x(0, "fit")),
    ("pz1_arm1", z1(1)), ("pz1_arm0", z1(0)),
    ("mu11", m11), ("mu00", m00), ("mu01", m01), ("mu10", m10),
    ("tau_obs", m11 - m00), ("sb", sb), ("tau_ate_mix", m11 - m00 - sb),
    ("tau_ate_prior", prior_ate),
    ("tvd", tvd()), ("tvd_fit", tvd("fit")), ("tvd_unfit", tvd("unfit")),
    ("mixture_p_fit", mix_fit),
]:
    print(f"{name:20s} {str(v):>12s} {float(v):.17g}")
