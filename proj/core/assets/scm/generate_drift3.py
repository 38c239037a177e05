"""Writes drift3.json: three binary latents, each with its own negative
control and an exact plus a noisy elicitable copy.

Run from this directory: python3 generate_drift3.py
"""
import itertools
import json
import math

LATENTS = ["t1", "t2", "t3"]
LEVELS = ["low", "high"]
SEXES = ["Male", "Female"]
P_HIGH = {"Male": [0.4, 0.5, 0.6], "Female": [0.6, 0.5, 0.4]}
A_WEIGHTS = [1.2, 0.9, 0.6]   # log-odds of treatment per latent sign
Y_OPTIONS = ["1", "2", "3", "4"]


def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def states():
    # First latent most significant, matching the library's mixed radix.
    return list(itertools.product(range(2), repeat=len(LATENTS)))


def sign(level):
    return 1.0 if level == 1 else -1.0


def y_row(a, x):
    s = [sign(v) for v in x]
    score = 0.8 * a + 0.5 * s[0] + 0.3 * s[1] + 0.2 * s[2] + 0.3 * a * s[0]
    w = [math.exp(score * (k - 1.5)) for k in range(4)]
    total = sum(w)
    return [v / total for v in w]


def main():
    xs = states()
    x_given_l = []
    for sex in SEXES:
        row = []
        for x in xs:
            p = 1.0
            for k, v in enumerate(x):
                p *= P_HIGH[sex][k] if v == 1 else 1.0 - P_HIGH[sex][k]
            row.append(p)
        x_given_l.append(row)
    a_given_xl = [[sigmoid(sum(w * sign(v) for w, v in zip(A_WEIGHTS, x))) for x in xs] for _ in SEXES]
    y_given_axl = [[[y_row(a, x) for x in xs] for _ in SEXES] for a in (0, 1)]

    def binary_child(k, p_high, p_low):
        return [[[1.0 - (p_high if x[k] else p_low), p_high if x[k] else p_low] for x in xs] for _ in SEXES]

    parents = ["sex"] + LATENTS
    z_tables = {f"z{k + 1}": {"parents": parents, "table": binary_child(k, 0.85, 0.15)} for k in range(3)}
    lp_tables = {}
    lprime_vars = []
    for k, name in enumerate(LATENTS):
        lprime_vars += [{"name": f"{name}_copy", "options": LEVELS}, {"name": f"{name}_noisy", "options": LEVELS}]
        lp_tables[f"{name}_copy"] = {"parents": parents, "table": binary_child(k, 1.0, 0.0)}
        lp_tables[f"{name}_noisy"] = {"parents": parents, "table": binary_child(k, 0.8, 0.2)}

    spec = {
        "name": "drift3",
        "l_vars": [{"name": "sex", "options": SEXES}],
        "x_vars": [{"name": n, "options": LEVELS} for n in LATENTS],
        "z_vars": [{"name": f"z{k + 1}", "options": ["no", "yes"]} for k in range(3)],
        "lprime_vars": lprime_vars,
        "a_var": "A",
        "y_var": {"name": "Y", "options": Y_OPTIONS, "encoding": [1, 2, 3, 4]},
        "cpts": {
            "x_given_l": {"parents": ["sex"], "table": x_given_l},
            "a_given_xl": {"parents": parents, "table": a_given_xl},
            "y_given_axl": {"parents": ["A"] + parents, "table": y_given_axl},
            "z_given_xl": z_tables,
            "lprime_given_xl": lp_tables,
        },
    }
    with open("drift3.json", "w") as f:
        json.dump(spec, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
